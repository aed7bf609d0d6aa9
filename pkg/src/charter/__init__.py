"""Differentially private distributed stochastic convex optimization built on
Vaidya's volumetric cutting-plane method."""

from .estimators import CharterOptimizer, DPSGDBaseline, VaidyaMinimizer
from .exceptions import (CharterError, CollapsedPolytope, ConfigRejected, DegenerateDirection,
                         EmptyFreshBatch, InvalidBudget, InvalidInput, LedgerViolation, NoConvergence,
                         NotInterior, OracleUnavailable, PrivacyBudgetTooLarge, SingularH,
                         UnknownProblem)
from .mechanisms import DerivedParams, PrivacyLedger, PrivacyParams, charter_privacy_ledger, derive_params
from .orchestrator import RunTranscript, run_charter
from .polytope import Polyhedron, barrier_value, leverage_scores, volumetric_center
from .problems import HardInstance, builtin_problems, make_problem
from .vaidya import VaidyaConfig, run_cutting_plane

__version__ = "0.1.0"

__all__ = [
    "CharterError", "CharterOptimizer", "CollapsedPolytope", "ConfigRejected", "DPSGDBaseline",
    "DegenerateDirection", "DerivedParams", "EmptyFreshBatch", "HardInstance", "InvalidBudget",
    "InvalidInput", "LedgerViolation", "NoConvergence", "NotInterior", "OracleUnavailable",
    "Polyhedron", "PrivacyBudgetTooLarge", "PrivacyLedger", "PrivacyParams", "RunTranscript",
    "SingularH", "UnknownProblem", "VaidyaConfig", "VaidyaMinimizer", "barrier_value",
    "builtin_problems", "charter_privacy_ledger", "derive_params", "leverage_scores",
    "make_problem", "run_charter", "run_cutting_plane", "volumetric_center",
]
