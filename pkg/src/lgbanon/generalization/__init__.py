"""Local generalization: QI-signature-aware partitioning into equivalence groups."""

from ._common import LocalEquivalenceGroup
from .mdp import choose_dimension, generalize_mdp
from .ncp import SEED_ROUNDS, divide_table, find_seeds, generalize_ncp, pair_ncp

GENERALIZERS = {"mdp": generalize_mdp, "ncp": generalize_ncp}

__all__ = [
    "GENERALIZERS",
    "LocalEquivalenceGroup",
    "SEED_ROUNDS",
    "choose_dimension",
    "divide_table",
    "find_seeds",
    "generalize_mdp",
    "generalize_ncp",
    "pair_ncp",
]
