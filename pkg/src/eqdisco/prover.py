"""One-level structural induction with speculative generalization.

A conjecture is attempted per datatype that owns one of its placeholders: the
lowest-indexed placeholder of that sort becomes the induction variable. Every
constructor yields one proof case — the variable is replaced by the
constructor over fresh opaque leaves, the induction hypothesis (the conjecture
at each direct recursive argument, other placeholders generalized to pattern
variables) is added as rewrite rules, and the case graph is saturated with
case splits. The conjecture is proved when both sides merge in every case.

Before induction is tried, repeated placeholders can be speculatively
generalized: each bijection between the left and right occurrences of a
repeated placeholder is replaced by fresh placeholders, producing strictly
more general variants that are often the provable form of an over-specialized
observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import permutations, product

from .egraph import EGraph
from .lang import (
    Datatype,
    Equation,
    PatternVar,
    Placeholder,
    Sort,
    Term,
    Theory,
    Uninterpreted,
    leaf,
    substitute,
    term_text,
)
from .rewrite import (
    RewriteRule,
    RuleAdmissionError,
    SaturationAbort,
    Saturator,
    compile_equation,
)
from .soe import Conjecture, conjecture_key, normalize_pair


@dataclass
class ProofObligation:
    conjecture: Conjecture
    datatype: Datatype
    induction_var: Placeholder
    cases: list[str] = field(default_factory=list)  # "case=<ctor> result=<..>"


@dataclass
class Lemma:
    equation: Equation
    rules: list[RewriteRule]
    provenance: dict


def placeholders_in(*terms: Term) -> list[Placeholder]:
    out: dict[Placeholder, None] = {}
    stack = list(terms)
    while stack:
        t = stack.pop(0)
        if isinstance(t.head, Placeholder):
            out.setdefault(t.head)
        stack = list(t.args) + stack
    return list(out)


def _occurrences(t: Term, ph: Placeholder) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []

    def walk(x: Term, path: tuple[int, ...]):
        if x.head == ph:
            out.append(path)
        for i, a in enumerate(x.args):
            walk(a, path + (i,))

    walk(t, ())
    return out


def _replace_at(t: Term, path: tuple[int, ...], repl: Term) -> Term:
    if not path:
        return repl
    args = list(t.args)
    args[path[0]] = _replace_at(args[path[0]], path[1:], repl)
    return Term(t.head, tuple(args))


MAX_GENERALIZED_OCCURRENCES = 3

# Node budget for proof-obligation graphs. These start from two goal terms,
# so a successful case settles in well under a thousand nodes; anything that
# grows past this is a doomed attempt feeding on its own rewrites, and the
# budget decides how long we let it run before giving up on the case.
PROOF_NODE_CAP = 2_000


def generalize(c: Conjecture, ph_pool: dict[Sort, int] | None = None) -> list[Conjecture]:
    """Speculative variants of the conjecture, most general first, the
    original last. Each repeated placeholder with equally many occurrences on
    both sides is split along every left/right occurrence bijection."""
    phs = placeholders_in(c.lhs, c.rhs)
    next_index: dict[Sort, int] = dict(ph_pool or {})
    for p in phs:
        if next_index.get(p.sort, 0) <= p.index:
            next_index[p.sort] = p.index + 1

    per_ph_choices: list[list[tuple[Placeholder, list, list]]] = []
    for p in phs:
        locc = _occurrences(c.lhs, p)
        rocc = _occurrences(c.rhs, p)
        if (
            len(locc) < 2
            or len(locc) != len(rocc)
            or len(locc) > MAX_GENERALIZED_OCCURRENCES
        ):
            continue
        choices = [(p, locc, list(perm)) for perm in permutations(rocc)]
        per_ph_choices.append(choices)

    variants: list[Conjecture] = []
    seen: dict[str, None] = {}
    if per_ph_choices:
        for assignment in product(*per_ph_choices):
            lhs, rhs = c.lhs, c.rhs
            fresh_at = dict(next_index)
            for p, locc, rocc in assignment:
                for lo, ro in zip(locc, rocc):
                    n = fresh_at.get(p.sort, 1)
                    fresh_at[p.sort] = n + 1
                    np = leaf(Placeholder(n, p.sort))
                    lhs = _replace_at(lhs, lo, np)
                    rhs = _replace_at(rhs, ro, np)
            lhs, rhs = normalize_pair(lhs, rhs)
            v = Conjecture(lhs, rhs, c.lhs_class, c.rhs_class)
            key = conjecture_key(v)
            if key not in seen:
                seen[key] = None
                variants.append(v)
    original_key = conjecture_key(c)
    if original_key not in seen:
        variants.append(c)
    return variants


def _pattern_side(t: Term, keep: Placeholder | None, repl: dict[Placeholder, Term]) -> Term:
    """Replace placeholders by pattern variables (or by `repl` entries)."""
    h = t.head
    if isinstance(h, Placeholder):
        if h in repl:
            return repl[h]
        return leaf(PatternVar(h.name, h.sort))
    return Term(h, tuple(_pattern_side(a, keep, repl) for a in t.args))


def equation_of_conjecture(c: Conjecture, name: str) -> Equation:
    lhs = _pattern_side(c.lhs, None, {})
    rhs = _pattern_side(c.rhs, None, {})
    vars_: dict[tuple[str, Sort], None] = {}
    for p in placeholders_in(c.lhs, c.rhs):
        vars_.setdefault((p.name, p.sort))
    return Equation(lhs, rhs, tuple(vars_), name=name)


def conjecture_of_equation(eq: Equation) -> Conjecture:
    """View a universally quantified equation as a placeholder conjecture."""
    mapping: dict = {}
    next_index: dict[Sort, int] = {}
    for name, sort in eq.vars:
        n = next_index.get(sort, 0) + 1
        next_index[sort] = n
        mapping[PatternVar(name, sort)] = leaf(Placeholder(n, sort))
    lhs, rhs = normalize_pair(substitute(eq.lhs, mapping), substitute(eq.rhs, mapping))
    return Conjecture(lhs, rhs, -1, -1)


class _FreshArgs:
    def __init__(self):
        self.n = 0

    def make(self, sort: Sort) -> Term:
        self.n += 1
        return leaf(Uninterpreted(f"$i{self.n}", sort))


def check_no_induction(c: Conjecture, saturator: Saturator) -> bool:
    """Are the two sides joinable by saturation alone (no induction)?"""
    g = EGraph()
    a = g.add(c.lhs)
    b = g.add(c.rhs)
    if a == b:
        return True
    sat = replace(
        saturator,
        node_cap=min(saturator.node_cap, PROOF_NODE_CAP),
        stop=lambda gr: gr.equiv(a, b),
    )
    try:
        sat.rewrite_only(g)
    except SaturationAbort:
        pass
    if g.equiv(a, b):
        return True
    try:
        sat.run(g)
    except SaturationAbort:
        pass
    return g.equiv(a, b)


def prove_by_induction(
    c: Conjecture,
    theory: Theory,
    saturator: Saturator,
    trace=None,
) -> Lemma | None:
    """Try one-level structural induction over each datatype placeholder."""
    phs = placeholders_in(c.lhs, c.rhs)
    for dt in theory.datatypes:
        candidates = [p for p in phs if p.sort == dt.sort]
        if not candidates:
            continue
        iv = min(candidates, key=lambda p: p.index)
        obligation = ProofObligation(c, dt, iv)
        if _prove_cases(obligation, saturator, trace):
            eq = equation_of_conjecture(c, name="")
            return Lemma(
                equation=eq,
                rules=[],
                provenance={
                    "conjecture": f"(= {term_text(c.lhs)} {term_text(c.rhs)})",
                    "induction": f"{iv.name}:{dt.sort}",
                    "cases": obligation.cases,
                },
            )
    return None


def _prove_cases(ob: ProofObligation, saturator: Saturator, trace=None) -> bool:
    c, dt, iv = ob.conjecture, ob.datatype, ob.induction_var
    fresh = _FreshArgs()
    for ctor in dt.constructors:
        args = [fresh.make(s) for s in ctor.arg_sorts]
        ctor_term = Term(ctor, tuple(args))
        case_lhs = substitute(c.lhs, {iv: ctor_term})
        case_rhs = substitute(c.rhs, {iv: ctor_term})
        ih_rules: list[RewriteRule] = []
        for i, s in enumerate(ctor.arg_sorts):
            if s != dt.sort:
                continue
            rec_leaf = args[i]
            ih_lhs = _pattern_side(c.lhs, None, {iv: rec_leaf})
            ih_rhs = _pattern_side(c.rhs, None, {iv: rec_leaf})
            vars_: dict[tuple[str, Sort], None] = {}
            for p in placeholders_in(c.lhs, c.rhs):
                if p != iv:
                    vars_.setdefault((p.name, p.sort))
            eq = Equation(ih_lhs, ih_rhs, tuple(vars_), name=f"ih.{rec_leaf.head.name}")
            try:
                for rule in compile_equation(eq, origin="hypothesis"):
                    ih_rules.append(
                        RewriteRule(
                            rule.name,
                            rule.premise,
                            rule.conclusion,
                            rule.origin,
                            wf_guard=f"recursive-argument {rec_leaf.head.name}",
                        )
                    )
            except RuleAdmissionError:
                continue  # unusable hypothesis direction; proceed without it
        g = EGraph()
        a = g.add(case_lhs)
        b = g.add(case_rhs)
        case_sat = Saturator(
            saturator.rules + ih_rules,
            saturator.datatypes,
            d=saturator.d,
            split_depth=saturator.split_depth,
            node_cap=min(saturator.node_cap, PROOF_NODE_CAP),
            case_splits=saturator.case_splits,
            split_mode=saturator.split_mode,
            trace=saturator.trace,
            stop=lambda gr, a=a, b=b: gr.equiv(a, b),
        )
        try:
            case_sat.rewrite_only(g)
        except SaturationAbort:
            pass
        merged = g.equiv(a, b)
        if not merged:
            # Case splitting is far more expensive than plain rewriting, so
            # it only runs when rewriting alone leaves the sides apart.
            try:
                case_sat.run(g)
            except SaturationAbort:
                pass
            merged = g.equiv(a, b)
        line = f"case={ctor.name} result={'merged' if merged else 'stuck'}"
        ob.cases.append(line)
        if trace is not None:
            trace(line)
        if not merged:
            return False
    return True
