"""Bounded rewriting over e-graphs, with automatic case splitting.

Equations compile to rewrite rules under a free-variable rule: both directions
when the two sides bind the same variables, otherwise only the direction that
does not invent variables. `run_rewrites` applies a rule set for a bounded
number of iterations (e-matching incrementally against per-rule watermarks).
When rewriting gets stuck because a rule needs a constructor shape that an
opaque class does not expose, `saturate` splits that class over all
constructors of its datatype, saturates each alternative in a copied graph,
and merges back every class pair that coincides in all alternatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .egraph import EClassId, EGraph
from .lang import (
    MATCH_PREFIX,
    Equation,
    FuncDecl,
    PatternVar,
    Sort,
    Term,
    Uninterpreted,
    leaf,
    pattern_vars_of,
)

DEFAULT_DEPTH = 8
DEFAULT_NODE_CAP = 150_000
DEFAULT_SPLIT_DEPTH = 2
# Budget for the per-example graph copies made during conjecture inference,
# as a multiple of the condensed base graph they start from (with a floor for
# tiny bases). Definitional unfolding needs room proportional to the classes
# being evaluated; growth far beyond that multiple is runaway generative
# wrapping, and an aborted copy only under-merges.
INFERENCE_CAP_FACTOR = 32
INFERENCE_CAP_FLOOR = 12_000


class RewriteError(Exception):
    pass


class RuleAdmissionError(RewriteError):
    """Neither orientation of the equation is closed under its variables."""


class SaturationAbort(RewriteError):
    """Node budget exceeded; merges already performed remain sound."""

    def __init__(self, merges: int):
        super().__init__(f"node budget exceeded after {merges} merges")
        self.merges = merges


@dataclass(frozen=True)
class RewriteRule:
    name: str
    premise: Term
    conclusion: Term
    origin: str = "definition"  # definition | lemma | hypothesis | seed
    wf_guard: str | None = None


@dataclass
class CaseSplit:
    scrutinee: EClassId
    sort: Sort
    alternatives: list[Term]


def compile_equation(eq: Equation, origin: str = "definition") -> list[RewriteRule]:
    """Orient an equation into rewrite rules under the free-variable rule."""
    lfv = dict.fromkeys(pattern_vars_of(eq.lhs))
    rfv = dict.fromkeys(pattern_vars_of(eq.rhs))
    l2r = all(v in lfv for v in rfv)
    r2l = all(v in rfv for v in lfv)
    rules = []
    if l2r:
        rules.append(RewriteRule(f"{eq.name}.fwd", eq.lhs, eq.rhs, origin))
    if r2l:
        rules.append(RewriteRule(f"{eq.name}.bwd", eq.rhs, eq.lhs, origin))
    if not rules:
        raise RuleAdmissionError(
            f"equation {eq.name or eq} binds different variables on each side"
        )
    return rules


def order_rules(rules: list[RewriteRule]) -> list[RewriteRule]:
    """Stable order with forward orientations before backward ones.

    Within one iteration all rules match the same frozen graph, so ordering
    only decides which merges land first — but when a node budget cuts a
    batch short, the tail is lost, and the tail should be the generative
    backward directions rather than the reducing ones."""
    fwd = [r for r in rules if not r.name.endswith(".bwd")]
    bwd = [r for r in rules if r.name.endswith(".bwd")]
    return fwd + bwd


def instantiate(g: EGraph, pattern: Term, subst: dict[PatternVar, EClassId]) -> EClassId:
    head = pattern.head
    if isinstance(head, PatternVar):
        return g.find(subst[head])
    return g.add_node(head, tuple(instantiate(g, a, subst) for a in pattern.args))


def run_rewrites(
    g: EGraph,
    rules: list[RewriteRule],
    d: int = DEFAULT_DEPTH,
    node_cap: int = DEFAULT_NODE_CAP,
    trace=None,
) -> int:
    """Run up to d batch iterations; returns total merges, stops when an
    iteration merges nothing. Raises SaturationAbort past the node budget."""
    total = 0
    for it in range(d):
        tick0 = g.tick
        batch = []
        for rule in rules:
            since = g.rule_ticks.get(rule.name, 0)
            for subst, root in g.ematch(rule.premise, since, cached=True):
                batch.append((rule, subst, root))
            g.rule_ticks[rule.name] = tick0
        merges = 0
        for n, (rule, subst, root) in enumerate(batch):
            inst = instantiate(g, rule.conclusion, subst)
            root = g.find(root)
            if inst != root:
                g.merge(inst, root)
                merges += 1
                if trace is not None:
                    trace(f"iter={it} rule={rule.name} root=c{root}")
            if n % 2048 == 2047 and g.node_count() > node_cap:
                total += merges + g.rebuild()
                raise SaturationAbort(total)
        merges += g.rebuild()
        total += merges
        if g.node_count() > node_cap:
            raise SaturationAbort(total)
        if merges == 0:
            break
    return total


def _constructor_positions(premise: Term) -> list[tuple[Term, PatternVar]]:
    """Relaxed variants of the premise: each constructor-headed subterm
    replaced (one at a time) by a wildcard. A variant that degenerates to a
    bare wildcard is dropped — it would constrain nothing."""
    out: list[tuple[Term, PatternVar]] = []
    paths: list[tuple[int, ...]] = []

    def walk(t: Term, path: tuple[int, ...]):
        if isinstance(t.head, FuncDecl) and t.head.is_constructor:
            paths.append(path)
        for i, a in enumerate(t.args):
            walk(a, path + (i,))

    walk(premise, ())
    for path in paths:
        if not path:
            continue
        wild = PatternVar("?scrut", _subterm(premise, path).sort)
        out.append((_replace(premise, path, leaf(wild)), wild))
    return out


def _subterm(t: Term, path: tuple[int, ...]) -> Term:
    for i in path:
        t = t.args[i]
    return t


def _replace(t: Term, path: tuple[int, ...], repl: Term) -> Term:
    if not path:
        return repl
    i = path[0]
    args = list(t.args)
    args[i] = _replace(args[i], path[1:], repl)
    return Term(t.head, tuple(args))


class _FreshLeaves:
    """Deterministic allocator for the opaque leaves of split alternatives."""

    def __init__(self):
        self.n = 0

    def make(self, sort: Sort) -> Term:
        self.n += 1
        return leaf(Uninterpreted(f"$a{self.n}", sort))


def detect_blocked_splits(
    g: EGraph,
    rules: list[RewriteRule],
    datatypes: dict[Sort, tuple[FuncDecl, ...]],
    fresh: _FreshLeaves | None = None,
    mode: str = "full",
    candidates: list[EClassId] | None = None,
    exclude: set[EClassId] | None = None,
) -> list[CaseSplit]:
    """Case-split candidates: opaque classes sitting where some rule needs a
    constructor, with every other obligation of that rule already matched.

    mode="match" restricts detection to the scrutinee argument of match
    applications — the cheap, always-wanted case. mode="full" additionally
    relaxes every constructor position of every rule premise, which is what
    proof attempts need but is too broad for large enumeration graphs.

    ``candidates`` limits relaxed-position scrutinees to the given classes
    (match scrutinees are exempt: a match application is a definitional
    site, so splitting it is always productive). Rewriting invents classes
    freely — backward-oriented rules wrap old terms forever — and splitting
    those inventions multiplies branches without ever deciding the goal."""
    fresh = fresh if fresh is not None else _FreshLeaves()
    found: dict[EClassId, CaseSplit] = {}
    allowed = None
    if candidates is not None:
        allowed = {g.find(c): None for c in candidates}
    spent = {g.find(c) for c in exclude} if exclude else None

    def consider(scrut: EClassId, restricted: bool):
        scrut = g.find(scrut)
        if restricted and allowed is not None and scrut not in allowed:
            return
        if spent is not None and scrut in spent:
            return
        if scrut in found or g.has_constructor_node(scrut):
            return
        ctors = datatypes.get(g.sort_of(scrut))
        if not ctors:
            return
        alts = [Term(c, tuple(fresh.make(s) for s in c.arg_sorts)) for c in ctors]
        found[scrut] = CaseSplit(scrut, g.sort_of(scrut), alts)

    for head, keys in list(g.by_op.items()):
        if not (isinstance(head, FuncDecl) and head.name.startswith(MATCH_PREFIX)):
            continue
        for key in list(keys):
            if g.hashcons.get(key) is not None:
                consider(key[1][0], restricted=False)
    if mode == "full":
        for rule in rules:
            for relaxed, wild in _constructor_positions(rule.premise):
                for subst, _root in g.ematch(relaxed, 0):
                    consider(subst[wild], restricted=True)
    return list(found.values())


@dataclass
class Saturator:
    """Rewriting plus case splitting against a fixed rule set."""

    rules: list[RewriteRule]
    datatypes: dict[Sort, tuple[FuncDecl, ...]] = field(default_factory=dict)
    d: int = DEFAULT_DEPTH
    split_depth: int = DEFAULT_SPLIT_DEPTH
    node_cap: int = DEFAULT_NODE_CAP
    case_splits: bool = True
    split_mode: str = "full"  # "full" inside proofs, "match" during inference
    trace: object = None
    stop: object = None  # optional g -> bool; checked at the top level only

    def __post_init__(self):
        self.fresh = _FreshLeaves()

    def run(self, g: EGraph) -> int:
        """Rewrite to fixpoint-or-depth, then interleave case splits."""
        return self._saturate(g, 0, g.class_ids(), set())

    def rewrite_only(self, g: EGraph) -> int:
        return run_rewrites(g, self.rules, self.d, self.node_cap, self.trace)

    def _saturate(
        self, g: EGraph, depth: int, candidates: list[EClassId], spent: set[EClassId]
    ) -> int:
        # One bounded pass: rewriting runs at most d iterations, each detected
        # scrutinee is split at most once, then one final bounded rewrite.
        # (Looping rewrite/split rounds would defeat the iteration bound:
        # backward-oriented definition rules are generative, so every extra
        # round can invent fresh opaque classes — fresh scrutinees — forever.)
        total = run_rewrites(g, self.rules, self.d, self.node_cap, self.trace)
        # A merge inside one branch is conditional on that branch's
        # constructor choice, so the caller's goal test only means
        # anything on the top-level graph.
        stop = self.stop if depth == 0 else None
        if not self.case_splits or depth >= self.split_depth or not self.datatypes:
            return total
        if stop is not None and stop(g):
            return total
        splits = detect_blocked_splits(
            g, self.rules, self.datatypes, self.fresh, self.split_mode, candidates, spent
        )
        if not splits:
            return total
        merges = 0
        for split in splits:
            merges += self.apply_split(g, split, depth, candidates, spent)
            # An unordered scrutinee pair is analyzed jointly while the
            # earlier one is split (the later one nests inside its branches);
            # re-splitting it inside the later one's branches would repeat
            # that same analysis with the operands swapped.
            spent.add(g.find(split.scrutinee))
            if stop is not None and merges and stop(g):
                return total + merges
        total += merges
        if merges:
            total += run_rewrites(g, self.rules, self.d, self.node_cap, self.trace)
        return total

    def apply_split(
        self,
        g: EGraph,
        split: CaseSplit,
        depth: int,
        candidates: list[EClassId] | None = None,
        spent: set[EClassId] | None = None,
    ) -> int:
        """Saturate one copy of the graph per constructor alternative and
        merge back the class pairs that coincide in every copy."""
        scrut = g.find(split.scrutinee)
        if g.has_constructor_node(scrut):
            return 0
        originals = g.class_ids()
        if candidates is None:
            candidates = originals
        signatures: dict[EClassId, list[EClassId]] = {c: [] for c in originals}
        for alt in split.alternatives:
            branch = g.clone()
            branch.merge(branch.find(scrut), branch.add(alt))
            branch.rebuild()
            try:
                # Class ids survive cloning, so the candidate snapshot from
                # the top-level run stays meaningful inside every branch.
                # Each branch gets its own copy of the spent set: splits it
                # performs are conditional on this branch's choice and must
                # not suppress the sibling branch's analysis of the same
                # scrutinee.
                self._saturate(branch, depth + 1, candidates, set(spent or ()))
            except SaturationAbort:
                pass  # partial saturation only under-merges; still sound
            for cid in originals:
                signatures[cid].append(branch.find(cid))
        groups: dict[tuple, list[EClassId]] = {}
        for cid in originals:
            groups.setdefault(tuple(signatures[cid]), []).append(cid)
        merges = 0
        for cell in groups.values():
            first = cell[0]
            for other in cell[1:]:
                if g.find(first) != g.find(other):
                    g.merge(first, other)
                    merges += 1
        merges += g.rebuild()
        return merges


def apply_split(
    g: EGraph,
    split: CaseSplit,
    rules: list[RewriteRule],
    d: int = DEFAULT_DEPTH,
    max_split_depth: int = DEFAULT_SPLIT_DEPTH,
    datatypes: dict[Sort, tuple[FuncDecl, ...]] | None = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> int:
    sat = Saturator(
        rules,
        datatypes or {},
        d=d,
        split_depth=max_split_depth,
        node_cap=node_cap,
    )
    return sat.apply_split(g, split, 0)
