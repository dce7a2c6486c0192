"""Decision-dependent distributionally robust resilience planning.

Library and CLI for planning hardening, distributed-generation placement,
and sectionalizing-switch installation on radial distribution networks
exposed to hurricanes.  The planning model is a trilevel program whose
middle level ranges over scenario-wise, decision-dependent ambiguity sets
of contingency distributions; it is solved by a customized
column-and-constraint-generation loop.
"""

from .cases import (CaseError, DanglingReferenceError, DuplicateIdError,
                    NetworkCase, SchemaError, ValidationReport, case_from_dict,
                    case_to_dict, parse_case, validate_case, write_case)
from .ccg import (CCGOptions, SolveReport, WorstCaseDistribution,
                  build_all_ambiguity, run_ccg, solve_drre)
from .formulation import PlanDecision
from .fragility import AmbiguityData, build_ambiguity_data
from .generator import make_ieee33_case, random_small_case

__version__ = "0.1.0"

__all__ = [
    "AmbiguityData", "CCGOptions", "CaseError", "DanglingReferenceError",
    "DuplicateIdError", "NetworkCase", "PlanDecision", "SchemaError",
    "SolveReport", "ValidationReport", "WorstCaseDistribution",
    "build_all_ambiguity", "build_ambiguity_data", "case_from_dict",
    "case_to_dict", "make_ieee33_case", "parse_case", "random_small_case",
    "run_ccg", "solve_drre", "validate_case", "write_case",
]
