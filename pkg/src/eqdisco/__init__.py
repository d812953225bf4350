"""Equational lemma discovery for algebraic datatypes.

Pipeline: enumerate terms over the theory vocabulary, group them by symbolic
observational equivalence on an e-graph (bounded rewriting plus case splits),
screen the candidate equalities, and prove the survivors by one-level
structural induction. Proved lemmas feed back as rewrite rules, so later
conjectures can build on earlier ones.
"""

from .explorer import ExplorerConfig, explore, prove_goals, subsumption_ratio
from .lang import Theory, parse_theory, serialize_lemmas

__version__ = "0.1.0"

__all__ = [
    "ExplorerConfig",
    "Theory",
    "explore",
    "parse_theory",
    "prove_goals",
    "serialize_lemmas",
    "subsumption_ratio",
    "__version__",
]
