"""Spreading speeds, hypothesis checks, linear determinacy and the recursion bracket."""
from __future__ import annotations

from .determinacy import (
    DeterminacyVerdict,
    LinearizedEigenPair,
    UpperSolutionReport,
    d2_margin,
    determinacy_verdict,
    linearized_multipliers,
    linearized_pair,
    upper_constants,
    verify_upper_solution,
)
from .hypotheses import Check, HypothesisReport, check_hypotheses, coexistence_search, small_mu_limit
from .minimize import SpeedReport, golden_section, spreading_speed
from .recursion import (
    BETA_LIMIT,
    INCONCLUSIVE,
    INTERMEDIATE,
    ZERO_LIMIT,
    Classification,
    RecursionSystem,
    SpeedBracket,
    recursion_bracket,
    recursion_classify,
)

__all__ = [
    "BETA_LIMIT", "INCONCLUSIVE", "INTERMEDIATE", "ZERO_LIMIT",
    "Check", "Classification", "DeterminacyVerdict", "HypothesisReport",
    "LinearizedEigenPair", "RecursionSystem", "SpeedBracket", "SpeedReport",
    "UpperSolutionReport", "check_hypotheses", "coexistence_search", "d2_margin",
    "determinacy_verdict", "golden_section", "linearized_multipliers", "linearized_pair",
    "recursion_bracket", "recursion_classify", "small_mu_limit", "spreading_speed",
    "upper_constants", "verify_upper_solution",
]
