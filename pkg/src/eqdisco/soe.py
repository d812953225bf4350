"""Symbolic observational equivalence: conjectures from example partitions.

For each datatype that received placeholders, the first placeholder is merged
— in a copy of the enumeration graph, one copy per symbolic example — with
each constructor tree up to the example depth, and the copy is saturated
(rewriting plus case splits). Two enumerated classes that coincide in every
copy are observably equal for that datatype; each such pair, minus the pairs
already equal in the master graph, becomes an equational conjecture. Pairs
from all datatypes are pooled and deduplicated up to placeholder renaming.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .egraph import EClassId, EGraph
from .lang import (
    Datatype,
    Placeholder,
    Sort,
    Term,
    Theory,
    Uninterpreted,
    leaf,
    term_size,
    term_text,
)
from .rewrite import (
    INFERENCE_CAP_FACTOR,
    INFERENCE_CAP_FLOOR,
    SaturationAbort,
    Saturator,
    run_rewrites,
)

DEFAULT_EXAMPLE_DEPTH = 2


@dataclass(frozen=True)
class SymbolicExample:
    """One constructor tree with fresh opaque leaves."""

    sort: Sort
    term: Term


@dataclass
class Conjecture:
    lhs: Term
    rhs: Term
    lhs_class: EClassId
    rhs_class: EClassId
    status: str = "pending"  # pending | proved | failed | redundant


class TermOrder:
    """Proof order: smaller first, then more distinct free leaves first."""

    @staticmethod
    def key(t: Term) -> tuple:
        return (term_size(t), -_free_leaf_count(t), term_text(t))

    @staticmethod
    def leq(a: Term, b: Term) -> bool:
        return TermOrder.key(a) <= TermOrder.key(b)


def _free_leaf_count(*terms: Term) -> int:
    seen: dict = {}
    stack = list(terms)
    while stack:
        t = stack.pop()
        if isinstance(t.head, (Placeholder, Uninterpreted)) and t.head not in seen:
            seen[t.head] = None
        stack.extend(t.args)
    return len(seen)


def conjecture_order_key(c: Conjecture) -> tuple:
    text = f"(= {term_text(c.lhs)} {term_text(c.rhs)})"
    return (
        term_size(c.lhs) + term_size(c.rhs),
        -_free_leaf_count(c.lhs, c.rhs),
        text,
    )


def make_examples(datatype: Datatype, c: int = DEFAULT_EXAMPLE_DEPTH) -> list[SymbolicExample]:
    """All constructor trees up to depth c over fresh opaque leaves: every
    base constructor, then every recursive constructor over smaller trees
    with at least one child of the previous depth."""
    counter = [0]

    def fresh(sort: Sort) -> Term:
        counter[0] += 1
        return leaf(Uninterpreted(f"$v{counter[0]}", sort))

    def distinct_leaves(t: Term) -> Term:
        """Re-leaf the example if any opaque leaf occurs twice inside it."""
        leaves: list = []
        stack = [t]
        while stack:
            x = stack.pop()
            if isinstance(x.head, Uninterpreted):
                leaves.append(x.head)
            stack.extend(x.args)
        if len(leaves) == len(dict.fromkeys(leaves)):
            return t

        def rebuild(x: Term) -> Term:
            if isinstance(x.head, Uninterpreted):
                return fresh(x.head.sort)
            return Term(x.head, tuple(rebuild(a) for a in x.args))

        return rebuild(t)

    self_sort = datatype.sort
    levels: list[list[Term]] = [
        [Term(ct, tuple(fresh(s) for s in ct.arg_sorts)) for ct in datatype.base_constructors()]
    ]
    for _ in range(c):
        smaller = [t for lvl in levels for t in lvl]
        newest = dict.fromkeys(levels[-1])
        nxt: list[Term] = []
        for ct in datatype.constructors:
            rec_positions = [i for i, s in enumerate(ct.arg_sorts) if s == self_sort]
            if not rec_positions:
                continue
            for combo in _rec_combos(len(rec_positions), smaller, newest):
                args = []
                it = iter(combo)
                for i, s in enumerate(ct.arg_sorts):
                    args.append(next(it) if i in rec_positions else fresh(s))
                nxt.append(distinct_leaves(Term(ct, tuple(args))))
        if not nxt:
            break
        levels.append(nxt)
    return [SymbolicExample(self_sort, t) for lvl in levels for t in lvl]


def _rec_combos(n: int, smaller: list[Term], newest: dict):
    def go(m: int):
        if m == 0:
            yield ()
            return
        for head in smaller:
            for rest in go(m - 1):
                yield (head,) + rest

    for combo in go(n):
        if any(t in newest for t in combo):
            yield combo


def normalize_pair(lhs: Term, rhs: Term) -> tuple[Term, Term]:
    """Rename placeholders per sort in first-occurrence order (lhs first)."""
    mapping: dict[Placeholder, Placeholder] = {}
    next_index: dict[Sort, int] = {}

    def walk(t: Term) -> Term:
        h = t.head
        if isinstance(h, Placeholder):
            fresh = mapping.get(h)
            if fresh is None:
                n = next_index.get(h.sort, 0) + 1
                next_index[h.sort] = n
                fresh = Placeholder(n, h.sort)
                mapping[h] = fresh
            return leaf(fresh)
        return Term(h, tuple(walk(a) for a in t.args))

    return walk(lhs), walk(rhs)


def conjecture_key(c: Conjecture) -> str:
    l, r = normalize_pair(c.lhs, c.rhs)
    return f"(= {term_text(l)} {term_text(r)})"


def infer_conjectures(
    st,
    theory: Theory,
    saturator: Saturator,
    example_depth: int = DEFAULT_EXAMPLE_DEPTH,
    trace=None,
) -> list[Conjecture]:
    """Emit conjectures for all class pairs that coincide in every symbolic
    example of some datatype, excluding pairs already equal in the master."""
    g = st.egraph
    st.refresh()
    reps = g.extract_all_min()
    out: list[Conjecture] = []
    seen: dict[str, None] = {}
    # Condense before copying: one minimal representative term per enumerated
    # class.  Bounded rewriting keeps inventing wrapper classes the master can
    # never shed, and carrying those into every per-example copy starves the
    # copies' node budget — while the signatures below only ever ask about
    # enumerated classes.
    base = EGraph()
    cmap: dict[EClassId, EClassId] = {}
    for cid in st.enumerated:
        cmap[cid] = base.add(reps[cid])
    # Budget each copy relative to its starting size: enough for definitional
    # unfolding over every condensed class, not enough for runaway growth.
    cap = min(
        saturator.node_cap,
        max(INFERENCE_CAP_FACTOR * base.node_count(), INFERENCE_CAP_FLOOR),
    )
    saturator = replace(saturator, node_cap=cap)
    for dt in theory.datatypes:
        phs = st.placeholders.get(dt.sort)
        if not phs:
            continue
        examples = make_examples(dt, example_depth)
        if not examples:
            continue
        ph_base = base.find(base.add(leaf(phs[0])))
        signatures: dict[EClassId, list[EClassId]] = {c: [] for c in st.enumerated}
        for ex in examples:
            branch = base.clone()
            branch.merge(branch.find(ph_base), branch.add(ex.term))
            branch.rebuild()
            try:
                saturator.run(branch)
            except SaturationAbort:
                pass  # an unsaturated copy only under-merges; still sound
            for cid in st.enumerated:
                signatures[cid].append(branch.find(cmap[cid]))
        groups: dict[tuple, list[EClassId]] = {}
        for cid in st.enumerated:
            groups.setdefault(tuple(signatures[cid]), []).append(cid)
        for cell in groups.values():
            for i in range(len(cell)):
                for j in range(i + 1, len(cell)):
                    a, b = cell[i], cell[j]
                    if g.equiv(a, b):
                        continue
                    lhs, rhs = reps[a], reps[b]
                    if TermOrder.key(rhs) < TermOrder.key(lhs):
                        lhs, rhs, a, b = rhs, lhs, b, a
                    conj = Conjecture(lhs, rhs, a, b)
                    key = conjecture_key(conj)
                    if key in seen:
                        continue
                    seen[key] = None
                    out.append(conj)
    return out


def screen(
    conjs: list[Conjecture],
    g: EGraph,
    rules,
    d: int = 8,
    node_cap: int = 150_000,
    trace=None,
) -> list[Conjecture]:
    """Drop conjectures provable by rewriting alone in the master graph,
    refresh both sides to current minimal representatives, orient, dedupe,
    and sort by proof order (smallest first)."""
    try:
        run_rewrites(g, rules, d, node_cap)
    except SaturationAbort:
        pass  # a partially rewritten graph only under-merges; still sound
    reps = g.extract_all_min()
    out: list[Conjecture] = []
    seen: dict[str, None] = {}
    for c in conjs:
        a, b = g.find(c.lhs_class), g.find(c.rhs_class)
        if a == b:
            c.status = "redundant"
            continue
        lhs, rhs = reps[a], reps[b]
        if TermOrder.key(rhs) < TermOrder.key(lhs):
            lhs, rhs, a, b = rhs, lhs, b, a
        # Normal form: per sort, first occurrence gets index 1.  Downstream
        # induction always targets a sort's index-1 placeholder, so emitted
        # conjectures must keep that invariant.
        lhs, rhs = normalize_pair(lhs, rhs)
        c.lhs, c.rhs, c.lhs_class, c.rhs_class = lhs, rhs, a, b
        key = conjecture_key(c)
        if key in seen:
            continue
        seen[key] = None
        out.append(c)
    out.sort(key=conjecture_order_key)
    if trace is not None:
        for c in out:
            trace(f"conjecture {conjecture_order_key(c)[:2]} {term_text(c.lhs)} = {term_text(c.rhs)}")
    return out


def co_residence_cells(conjs: list[Conjecture], g: EGraph) -> list[list[EClassId]]:
    """Connected components of the conjecture pair graph (for pool pruning)."""
    parent: dict[EClassId, EClassId] = {}

    def find(x: EClassId) -> EClassId:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order: list[EClassId] = []
    seen: dict[EClassId, None] = {}
    for c in conjs:
        a, b = g.find(c.lhs_class), g.find(c.rhs_class)
        for x in (a, b):
            if x not in seen:
                seen[x] = None
                order.append(x)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    cells: dict[EClassId, list[EClassId]] = {}
    for x in order:
        cells.setdefault(find(x), []).append(x)
    return [cell for cell in cells.values() if len(cell) > 1]
