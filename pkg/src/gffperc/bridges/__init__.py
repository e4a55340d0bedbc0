"""Deterministic multi-scale bridges: construction, certification, use.

A bridge is a connected collection of scale-tagged boxes routing between
two admissible sets inside a centered shell, subject to containment (B1),
endpoint (B2), separation (B3) and complexity (B4) constraints; it is
good when the attached seed/tower events hold (G1, G2).
"""

from .geometry import (
    Arch,
    BoxId,
    Bridge,
    DomainTriplet,
    Region,
    box_lattice,
    domain_triplet,
)
from .goodness import (
    FieldOracle,
    GoodnessEvaluator,
    TableOracle,
    evaluate_goodness,
    recursion_bound_check,
)
from .validate import CertificationReport, validate_arch, validate_bridge
from .construct import FailureWitness, construct_arch, construct_bridge
from .paths import extract_zero_bridge, reconstruct_path

__all__ = [
    "Arch", "BoxId", "Bridge", "CertificationReport", "DomainTriplet",
    "FailureWitness", "FieldOracle", "GoodnessEvaluator", "Region",
    "TableOracle", "box_lattice", "construct_arch", "construct_bridge",
    "domain_triplet", "evaluate_goodness", "extract_zero_bridge",
    "reconstruct_path", "recursion_bound_check", "validate_arch",
    "validate_bridge",
]
