"""Independent reference implementations the tests check the engine against.

Everything here is deliberately naive: quadratic congruence closure over an
explicit term universe, an innermost ground-term interpreter driven directly
by the definitional equations, and brute-force enumeration of constructor
trees. Slow and obvious beats fast and wrong for an oracle.
"""

from __future__ import annotations

from itertools import product

from eqdisco.lang import (
    Equation,
    FuncDecl,
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


# ---------------------------------------------------------------------------
# Naive congruence closure


def subterms_of(t: Term, out: dict[Term, None] | None = None) -> dict[Term, None]:
    if out is None:
        out = {}
    if t not in out:
        for a in t.args:
            subterms_of(a, out)
        out[t] = None
    return out


class CongruenceOracle:
    """Ground congruence closure by fixpoint over an explicit universe.

    The universe is the subterm closure of the given terms. `merge` records an
    equation; `equiv` answers modulo the congruence closure of everything
    merged so far, recomputed from scratch on demand.
    """

    def __init__(self, terms: list[Term]):
        self.universe: list[Term] = list(subterms_of_all(terms))
        self._index = {t: i for i, t in enumerate(self.universe)}
        self._merged: list[tuple[int, int]] = []
        self._parent: list[int] | None = None

    def _find(self, parent: list[int], i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def merge(self, a: Term, b: Term) -> None:
        self._merged.append((self._index[a], self._index[b]))
        self._parent = None

    def _close(self) -> list[int]:
        if self._parent is not None:
            return self._parent
        n = len(self.universe)
        parent = list(range(n))
        for a, b in self._merged:
            ra, rb = self._find(parent, a), self._find(parent, b)
            if ra != rb:
                parent[ra] = rb
        args_of = [
            tuple(self._index[a] for a in t.args) for t in self.universe
        ]
        heads = [t.head for t in self.universe]
        changed = True
        while changed:
            changed = False
            for i in range(n):
                for j in range(i + 1, n):
                    if heads[i] != heads[j] or len(args_of[i]) != len(args_of[j]):
                        continue
                    ri, rj = self._find(parent, i), self._find(parent, j)
                    if ri == rj:
                        continue
                    if all(
                        self._find(parent, x) == self._find(parent, y)
                        for x, y in zip(args_of[i], args_of[j])
                    ):
                        parent[ri] = rj
                        changed = True
        self._parent = parent
        return parent

    def equiv(self, a: Term, b: Term) -> bool:
        parent = self._close()
        return self._find(parent, self._index[a]) == self._find(parent, self._index[b])


def subterms_of_all(terms: list[Term]) -> dict[Term, None]:
    out: dict[Term, None] = {}
    for t in terms:
        subterms_of(t, out)
    return out


# ---------------------------------------------------------------------------
# Ground interpreter


class StuckTerm(Exception):
    """Normalization got stuck on a non-value (missing rule or table entry)."""


class OutOfFuel(Exception):
    """Normalization did not terminate within the step budget."""


def _match(pattern: Term, t: Term, binding: dict[PatternVar, Term]) -> bool:
    h = pattern.head
    if isinstance(h, PatternVar):
        bound = binding.get(h)
        if bound is None:
            binding[h] = t
            return True
        return bound == t
    if h != t.head or len(pattern.args) != len(t.args):
        return False
    return all(_match(p, a, binding) for p, a in zip(pattern.args, t.args))


class GroundInterpreter:
    """Innermost rewriting with the theory's equations oriented left to right.

    Definitional equations (one per match arm) plus the match-selection
    equations form a terminating, orthogonal system for the benchmark
    theories, so innermost normalization computes the defined functions.
    Uninterpreted constants and opaque-sort constants are values.

    `fn_tables` gives semantics to declared function-sorted constants that
    have no defining equations: {const name: {(arg text, ...): result term}}.
    """

    def __init__(self, theory: Theory, fn_tables: dict[str, dict] | None = None):
        self.theory = theory
        self.fn_tables = fn_tables or {}
        self.rules: dict[object, list[tuple[Term, Term]]] = {}
        for eq in list(theory.eqs) + theory.match_select_equations():
            self.rules.setdefault(eq.lhs.head, []).append((eq.lhs, eq.rhs))

    def _step_root(self, t: Term) -> Term | None:
        for lhs, rhs in self.rules.get(t.head, ()):
            binding: dict[PatternVar, Term] = {}
            if _match(lhs, t, binding):
                return substitute(rhs, binding)
        head = t.head
        if isinstance(head, FuncDecl) and head.name.startswith("apply!") and t.args:
            fn = t.args[0]
            table = self.fn_tables.get(fn.head.name)
            if table is not None:
                key = tuple(term_text(a) for a in t.args[1:])
                if key not in table:
                    raise StuckTerm(f"no table entry for {term_text(t)}")
                return table[key]
        return None

    def normalize(self, t: Term, fuel: int = 200_000) -> Term:
        budget = [fuel]

        def go(x: Term) -> Term:
            while True:
                if budget[0] <= 0:
                    raise OutOfFuel(term_text(t))
                budget[0] -= 1
                x = Term(x.head, tuple(go(a) for a in x.args))
                nxt = self._step_root(x)
                if nxt is None:
                    return x
                x = nxt

        result = go(t)
        if not self._is_value(result):
            raise StuckTerm(term_text(result))
        return result

    def _is_value(self, t: Term) -> bool:
        h = t.head
        if isinstance(h, (Uninterpreted, Placeholder)):
            return True
        if isinstance(h, FuncDecl):
            if h.is_constructor or h.arity == 0 and h.name not in self.rules:
                return all(self._is_value(a) for a in t.args)
        return False


# ---------------------------------------------------------------------------
# Term generation


def constructor_trees(theory: Theory, sort: Sort, depth: int, leaves: dict[Sort, list[Term]]):
    """All constructor trees of the sort up to the given depth.

    Non-datatype argument sorts draw from `leaves`; the datatype's own
    recursive positions recurse at depth-1.
    """
    dt = theory.datatype_of(sort)
    if dt is None:
        yield from leaves.get(sort, [])
        return
    for ctor in dt.constructors:
        if depth <= 0 and dt.is_recursive(ctor):
            continue
        pools = [
            list(constructor_trees(theory, s, depth - 1, leaves)) for s in ctor.arg_sorts
        ]
        if not all(pools):
            continue
        for combo in product(*pools):
            yield Term(ctor, tuple(combo))


def random_ground_term(rng, theory: Theory, sort: Sort, depth: int,
                       leaves: dict[Sort, list[Term]]) -> Term:
    """One random well-sorted ground term mixing defined functions and
    constructors, bottoming out in constructor trees and leaf constants."""
    choices: list[FuncDecl] = []
    if depth > 0:
        for f in theory.funcs.values():
            if f.ret_sort == sort and f.arity > 0 and not _needs_fn_args(f):
                choices.append(f)
    dt = theory.datatype_of(sort)
    if choices and rng.random() < 0.6:
        f = rng.choice(choices)
        return Term(
            f, tuple(random_ground_term(rng, theory, s, depth - 1, leaves) for s in f.arg_sorts)
        )
    if dt is not None:
        ctors = dt.constructors if depth > 0 else dt.base_constructors()
        f = rng.choice(ctors)
        return Term(
            f,
            tuple(random_ground_term(rng, theory, s, max(depth - 1, 0), leaves) for s in f.arg_sorts),
        )
    return rng.choice(leaves[sort])


def _needs_fn_args(f: FuncDecl) -> bool:
    return any(s.name == "->" for s in f.arg_sorts)


# ---------------------------------------------------------------------------
# Lemma instantiation


def instantiate_equation(eq: Equation, assignment: dict[str, Term]) -> tuple[Term, Term]:
    mapping = {PatternVar(n, s): assignment[n] for n, s in eq.vars}
    return substitute(eq.lhs, mapping), substitute(eq.rhs, mapping)
