"""Simulation and finite-time stability evidence for switched hybrid systems."""

from .certificate import (
    CertificateReport,
    ConditionSums,
    GKEnvelope,
    activation_budget,
    condition_sums,
    fit_gk_envelope,
    lemma1_oracle,
    theorem2_verdict,
    theorem3_verdict,
)
from .examples import REGISTRY, get_example
from .exprparse import parse, to_source
from .integrator import IntegrationConfig, settling_time, simulate
from .lyapunov import LyapunovSet, check_flow_decrease, estimate_fts_constants
from .model import HybridSystemDef, HybridTrajectory, SwitchingPolicy, validate_system
from .sweep import certify, run_sweep

__version__ = "0.1.0"
