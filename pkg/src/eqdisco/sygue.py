"""Syntax-guided enumeration of placeholder terms, directly into an e-graph.

Level 0 interns every nullary vocabulary symbol plus a configurable number of
placeholders for each sort that occurs in an argument position. Each `grow`
level applies every non-nullary vocabulary symbol to all argument tuples drawn
from per-sort class pools that include at least one frontier (newest-level)
class, so enumeration is deduplicated against everything already known equal.
Pools can be pruned to one representative per observational-equivalence cell,
which keeps deeper levels from multiplying out unresolved conjecture families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .egraph import EClassId, EGraph
from .lang import Placeholder, Sort, Term, Theory, leaf

DEFAULT_LEVELS = 2
DEFAULT_PH_COUNT = 2


class EnumLimit(Exception):
    """Raised when growth past the configured level bound is requested."""


class EnumBudget(Exception):
    """Raised when growth would exceed the node budget; state stays valid."""


def placeholder_sorts(theory: Theory) -> list[Sort]:
    """Sorts appearing in argument positions of the vocabulary, in order."""
    out: dict[Sort, None] = {}
    for f in theory.funcs.values():
        for s in f.arg_sorts:
            out.setdefault(s)
    return list(out)


def _count_for(ph_count, sort: Sort) -> int:
    if isinstance(ph_count, dict):
        return ph_count.get(sort, DEFAULT_PH_COUNT)
    return ph_count


@dataclass
class EnumState:
    theory: Theory
    egraph: EGraph
    k: int
    level: int = 0
    frontier: list[EClassId] = field(default_factory=list)
    pools: dict[Sort, list[EClassId]] = field(default_factory=dict)
    enumerated: list[EClassId] = field(default_factory=list)
    placeholders: dict[Sort, list[Placeholder]] = field(default_factory=dict)

    def refresh(self) -> None:
        """Re-canonicalize all tracked class ids after merges."""
        g = self.egraph

        def canon(ids: list[EClassId]) -> list[EClassId]:
            out: list[EClassId] = []
            seen: dict[EClassId, None] = {}
            for c in ids:
                r = g.find(c)
                if r not in seen:
                    seen[r] = None
                    out.append(r)
            return out

        self.frontier = canon(self.frontier)
        self.enumerated = canon(self.enumerated)
        self.pools = {s: canon(ids) for s, ids in self.pools.items()}

    def prune_pools(self, cells: list[list[EClassId]]) -> int:
        """Keep one growth candidate per cell of observably-equal classes."""
        g = self.egraph
        drop: dict[EClassId, None] = {}
        for cell in cells:
            canon = sorted(dict.fromkeys(g.find(c) for c in cell))
            for c in canon[1:]:
                drop[c] = None
        if not drop:
            return 0
        removed = 0
        pools: dict[Sort, list[EClassId]] = {}
        for s, ids in self.pools.items():
            kept = [c for c in ids if g.find(c) not in drop]
            removed += len(ids) - len(kept)
            pools[s] = kept
        self.pools = pools
        return removed


def init_enum(theory: Theory, ph_count=DEFAULT_PH_COUNT, k: int = DEFAULT_LEVELS) -> EnumState:
    g = EGraph()
    st = EnumState(theory=theory, egraph=g, k=k)

    def take(sort: Sort, cid: EClassId):
        st.enumerated.append(cid)
        pool = st.pools.setdefault(sort, [])
        if cid not in pool:
            pool.append(cid)

    for f in theory.funcs.values():
        if f.arity == 0:
            take(f.ret_sort, g.add(leaf(f)))
    for sort in placeholder_sorts(theory):
        for i in range(1, _count_for(ph_count, sort) + 1):
            ph = Placeholder(i, sort)
            take(sort, g.add(leaf(ph)))
            st.placeholders.setdefault(sort, []).append(ph)
    st.frontier = list(st.enumerated)
    return st


def _grow_tuples(arg_pools: list[list[EClassId]], frontier: dict[EClassId, None]):
    """All argument tuples with at least one frontier member, without
    enumerating the all-stale tuples (partition on first frontier position)."""
    n = len(arg_pools)
    stale = [[c for c in p if c not in frontier] for p in arg_pools]
    fresh = [[c for c in p if c in frontier] for p in arg_pools]
    for j in range(n):
        parts = stale[:j] + [fresh[j]] + arg_pools[j + 1 :]
        if all(parts):
            yield from product(*parts)


def grow(st: EnumState, node_cap: int | None = None) -> int:
    """Enumerate the next level; returns how many new classes were created."""
    if st.level + 1 > st.k:
        raise EnumLimit(f"enumeration is bounded at {st.k} levels")
    g = st.egraph
    st.refresh()
    frontier = dict.fromkeys(st.frontier)
    new_classes: list[EClassId] = []
    for f in st.theory.funcs.values():
        if f.arity == 0:
            continue
        arg_pools = [st.pools.get(s, []) for s in f.arg_sorts]
        if not all(arg_pools):
            continue
        for combo in _grow_tuples(arg_pools, frontier):
            before = g.node_count()
            cid = g.add_node(f, tuple(combo))
            if g.node_count() != before:
                new_classes.append(cid)
                if node_cap is not None and g.node_count() > node_cap:
                    st.level += 1
                    st.frontier = new_classes
                    st.enumerated.extend(new_classes)
                    for c in new_classes:
                        pool = st.pools.setdefault(g.sort_of(c), [])
                        pool.append(c)
                    raise EnumBudget(f"node budget exceeded at level {st.level}")
    st.level += 1
    st.frontier = new_classes
    st.enumerated.extend(new_classes)
    for c in new_classes:
        st.pools.setdefault(g.sort_of(c), []).append(c)
    return len(new_classes)


def representatives(st: EnumState) -> dict[EClassId, Term]:
    """Minimal placeholder-form term for every enumerated class."""
    st.refresh()
    table = st.egraph.extract_all_min()
    return {cid: table[cid] for cid in st.enumerated}
