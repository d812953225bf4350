"""Sorted terms, equations, theories, and the SMT-LIB front end.

The input language is the UF+datatypes fragment needed for equational theory
exploration: ``declare-sort``, ``declare-datatype(s)``, ``declare-fun`` /
``declare-const``, ``define-fun`` / ``define-fun-rec``, ``assert`` of a
universally quantified equation, and ``prove`` / ``assert-not`` goals.

Function definitions are turned into equations, one per match arm; ``ite`` is
desugared into a ``match`` on Bool represented as an ordinary head symbol.
Higher-order arguments are supported through per-signature ``apply`` symbols.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field


class LangError(Exception):
    """Base error for this module."""


class ParseError(LangError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


class SortError(LangError):
    """Ill-sorted term or equation."""


# ---------------------------------------------------------------------------
# Sorts


@dataclass(frozen=True)
class Sort:
    """A sort: opaque, type variable, datatype instance, or function sort.

    Function sorts use name ``"->"`` with params ``(arg..., ret)`` (uncurried).
    """

    name: str
    params: tuple["Sort", ...] = ()
    is_type_var: bool = False

    def __post_init__(self):
        if self.is_type_var and self.params:
            raise SortError(f"type variable {self.name} cannot take parameters")
        object.__setattr__(self, "_hash", hash((self.name, self.params, self.is_type_var)))

    def __hash__(self):
        return self._hash

    def __str__(self):
        if self.name == "->":
            inner = " ".join(str(p) for p in self.params)
            return f"(=> {inner})"
        if self.params:
            inner = " ".join(str(p) for p in self.params)
            return f"({self.name} {inner})"
        return self.name


def fn_sort(arg_sorts: tuple[Sort, ...], ret: Sort) -> Sort:
    return Sort("->", (*arg_sorts, ret))


def is_fn_sort(s: Sort) -> bool:
    return s.name == "->"


def fn_arg_sorts(s: Sort) -> tuple[Sort, ...]:
    return s.params[:-1]


def fn_ret_sort(s: Sort) -> Sort:
    return s.params[-1]


def sort_contains(haystack: Sort, needle: Sort) -> bool:
    if haystack == needle:
        return True
    return any(sort_contains(p, needle) for p in haystack.params)


BOOL = Sort("Bool")


# ---------------------------------------------------------------------------
# Heads and terms


@dataclass(frozen=True)
class FuncDecl:
    name: str
    arg_sorts: tuple[Sort, ...]
    ret_sort: Sort
    is_constructor: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "_hash", hash((self.name, self.arg_sorts, self.ret_sort, self.is_constructor))
        )

    def __hash__(self):
        return self._hash

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Placeholder:
    """Enumeration variable ph_i of a sort; behaves as an opaque constant."""

    index: int
    sort: Sort

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("ph", self.index, self.sort)))

    def __hash__(self):
        return self._hash

    @property
    def name(self) -> str:
        return f"ph{self.index}_{_sort_tag(self.sort)}"


@dataclass(frozen=True)
class Uninterpreted:
    """A fresh opaque constant (symbolic-example leaf, split/induction arg)."""

    name: str
    sort: Sort

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("un", self.name, self.sort)))

    def __hash__(self):
        return self._hash


@dataclass(frozen=True)
class PatternVar:
    """A quantified variable of an equation / rewrite pattern."""

    name: str
    sort: Sort

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("pv", self.name, self.sort)))

    def __hash__(self):
        return self._hash


Head = FuncDecl | Placeholder | Uninterpreted | PatternVar
Leaf = Placeholder | Uninterpreted | PatternVar


def _sort_tag(s: Sort) -> str:
    if s.name == "->":
        return "fn_" + "_".join(_sort_tag(p) for p in s.params)
    if s.params:
        return s.name + "_" + "_".join(_sort_tag(p) for p in s.params)
    return s.name


@dataclass(frozen=True)
class Term:
    """An applicative term; leaves are nullary heads."""

    head: Head
    args: tuple["Term", ...] = ()

    def __post_init__(self):
        if isinstance(self.head, FuncDecl):
            if len(self.args) != self.head.arity:
                raise SortError(
                    f"{self.head.name} expects {self.head.arity} args, got {len(self.args)}"
                )
            for a, want in zip(self.args, self.head.arg_sorts):
                if a.sort != want:
                    raise SortError(
                        f"argument of {self.head.name}: expected sort {want}, got {a.sort}"
                    )
        elif self.args:
            raise SortError(f"leaf {self.head} cannot take arguments")
        object.__setattr__(self, "_hash", hash((self.head, self.args)))

    def __hash__(self):
        return self._hash

    @property
    def sort(self) -> Sort:
        if isinstance(self.head, FuncDecl):
            return self.head.ret_sort
        return self.head.sort

    def __str__(self):
        return term_text(self)


def app(decl: FuncDecl, *args: Term) -> Term:
    return Term(decl, tuple(args))


def leaf(head: Leaf) -> Term:
    return Term(head)


def term_size(t: Term) -> int:
    return 1 + sum(term_size(a) for a in t.args)


def _collect_heads(t: Term, kind, out: dict):
    if isinstance(t.head, kind):
        out.setdefault(t.head, None)
    for a in t.args:
        _collect_heads(a, kind, out)


def placeholders_of(t: Term) -> list[Placeholder]:
    out: dict[Placeholder, None] = {}
    _collect_heads(t, Placeholder, out)
    return list(out)


def pattern_vars_of(t: Term) -> list[PatternVar]:
    out: dict[PatternVar, None] = {}
    _collect_heads(t, PatternVar, out)
    return list(out)


def substitute(t: Term, mapping: dict[Head, Term]) -> Term:
    """Replace leaf heads by terms according to ``mapping``."""
    if not t.args:
        return mapping.get(t.head, t)
    return Term(t.head, tuple(substitute(a, mapping) for a in t.args))


def term_text(t: Term) -> str:
    """Deterministic s-expression rendering (debug + tie-breaking)."""
    name = t.head.name if not isinstance(t.head, FuncDecl) else t.head.name
    if not t.args:
        return name
    return "(" + name + " " + " ".join(term_text(a) for a in t.args) + ")"


# ---------------------------------------------------------------------------
# Equations, datatypes, theories


@dataclass
class Equation:
    lhs: Term
    rhs: Term
    vars: tuple[tuple[str, Sort], ...] = ()
    name: str = ""
    origin: str = "definition"  # "definition" | "seed" | "lemma"

    def __post_init__(self):
        if self.lhs.sort != self.rhs.sort:
            raise SortError(
                f"equation sides have different sorts: {self.lhs.sort} vs {self.rhs.sort}"
            )
        declared = {n for n, _ in self.vars}
        for side in (self.lhs, self.rhs):
            for pv in pattern_vars_of(side):
                if pv.name not in declared:
                    raise SortError(f"undeclared variable {pv.name} in equation")

    def text(self) -> str:
        return f"(= {term_text(self.lhs)} {term_text(self.rhs)})"


@dataclass
class Datatype:
    sort: Sort
    constructors: list[FuncDecl]

    def base_constructors(self) -> list[FuncDecl]:
        return [c for c in self.constructors if not self.is_recursive(c)]

    def is_recursive(self, ctor: FuncDecl) -> bool:
        return any(sort_contains(a, self.sort) for a in ctor.arg_sorts)


@dataclass
class _DatatypeTemplate:
    name: str
    params: tuple[str, ...]
    ctor_specs: list[tuple[str, list]]  # (ctor name, [(selector, sort sexpr), ...])
    instance_args: tuple[Sort, ...] | None = None  # single permitted instantiation


MATCH_PREFIX = "match!"
APPLY_PREFIX = "apply!"


@dataclass
class Theory:
    """Vocabulary, constructors, equations, and optional goals.

    ``funcs`` holds the user vocabulary (constructors included). Internal
    symbols (match/apply) live in ``internal_funcs`` and never enumerate.
    """

    sorts: dict[str, Sort] = field(default_factory=dict)
    datatypes: list[Datatype] = field(default_factory=list)
    funcs: dict[str, FuncDecl] = field(default_factory=dict)
    eqs: list[Equation] = field(default_factory=list)
    goals: list[Equation] = field(default_factory=list)
    internal_funcs: dict[str, FuncDecl] = field(default_factory=dict)
    templates: dict[str, _DatatypeTemplate] = field(default_factory=dict)

    def __post_init__(self):
        if "Bool" not in self.sorts:
            self.sorts["Bool"] = BOOL
            t = FuncDecl("true", (), BOOL, is_constructor=True)
            f = FuncDecl("false", (), BOOL, is_constructor=True)
            self.funcs["true"] = t
            self.funcs["false"] = f
            self.datatypes.append(Datatype(BOOL, [t, f]))

    # -- lookups ------------------------------------------------------------

    def datatype_of(self, sort: Sort) -> Datatype | None:
        for dt in self.datatypes:
            if dt.sort == sort:
                return dt
        return None

    def lookup(self, name: str) -> FuncDecl | None:
        return self.funcs.get(name) or self.internal_funcs.get(name)

    def constructors(self) -> list[FuncDecl]:
        return [f for f in self.funcs.values() if f.is_constructor]

    # -- internal symbol factories -------------------------------------------

    def ensure_apply(self, fsort: Sort) -> FuncDecl:
        """The full-application symbol for a function sort."""
        if not is_fn_sort(fsort):
            raise SortError(f"cannot apply non-function sort {fsort}")
        name = APPLY_PREFIX + _sort_tag(fsort)
        decl = self.internal_funcs.get(name)
        if decl is None:
            decl = FuncDecl(name, (fsort, *fn_arg_sorts(fsort)), fn_ret_sort(fsort))
            self.internal_funcs[name] = decl
        return decl

    def ensure_match(self, scrutinee_sort: Sort, ret_sort: Sort) -> FuncDecl:
        """The match symbol for a nullary-constructor datatype scrutinee.

        Args are (scrutinee, one arm per constructor in declaration order).
        """
        dt = self.datatype_of(scrutinee_sort)
        if dt is None:
            raise SortError(f"match scrutinee sort {scrutinee_sort} is not a datatype")
        if any(c.arity for c in dt.constructors):
            raise SortError(
                f"match on {scrutinee_sort} with binding patterns cannot be a plain term"
            )
        name = MATCH_PREFIX + _sort_tag(scrutinee_sort) + "!" + _sort_tag(ret_sort)
        decl = self.internal_funcs.get(name)
        if decl is None:
            arg_sorts = (scrutinee_sort, *([ret_sort] * len(dt.constructors)))
            decl = FuncDecl(name, arg_sorts, ret_sort)
            self.internal_funcs[name] = decl
        return decl

    def match_select_equations(self) -> list[Equation]:
        """One selection equation per (match symbol, constructor)."""
        out = []
        for decl in self.internal_funcs.values():
            if not decl.name.startswith(MATCH_PREFIX):
                continue
            scrut_sort = decl.arg_sorts[0]
            ret = decl.ret_sort
            dt = self.datatype_of(scrut_sort)
            arms = [PatternVar(f"a{i}", ret) for i in range(len(dt.constructors))]
            arm_terms = [leaf(v) for v in arms]
            for i, ctor in enumerate(dt.constructors):
                lhs = app(decl, app(ctor), *arm_terms)
                eq = Equation(
                    lhs,
                    arm_terms[i],
                    tuple((v.name, ret) for v in arms),
                    name=f"{decl.name}.{ctor.name}",
                )
                out.append(eq)
        return out

    # -- registration --------------------------------------------------------

    def add_func(self, decl: FuncDecl):
        if decl.name in self.funcs or decl.name in self.internal_funcs:
            raise ParseError(f"duplicate symbol {decl.name}")
        self.funcs[decl.name] = decl

    def validate(self):
        for dt in self.datatypes:
            if not dt.base_constructors():
                raise ParseError(f"datatype {dt.sort} has no base constructor (uninhabited)")
        for eq in self.eqs + self.goals:
            _check_known_symbols(self, eq.lhs)
            _check_known_symbols(self, eq.rhs)


def _check_known_symbols(theory: Theory, t: Term):
    if isinstance(t.head, FuncDecl) and theory.lookup(t.head.name) is None:
        raise ParseError(f"unknown symbol {t.head.name}")
    for a in t.args:
        _check_known_symbols(theory, a)


# ---------------------------------------------------------------------------
# Desugaring


def desugar(t: Term, theory: Theory) -> Term:
    """Replace every ``ite c a b`` under t by a Bool match term.

    Idempotent; the result contains no ``ite`` head.
    """
    args = tuple(desugar(a, theory) for a in t.args)
    if isinstance(t.head, FuncDecl) and t.head.name == "ite":
        cond, then_t, else_t = args
        decl = theory.ensure_match(BOOL, then_t.sort)
        # Bool constructors are declared (true, false); arm order follows them.
        return app(decl, cond, then_t, else_t)
    return Term(t.head, args) if args != t.args else t


# ---------------------------------------------------------------------------
# S-expression reader


@dataclass
class _SNode:
    value: str | list
    line: int
    col: int

    @property
    def is_atom(self) -> bool:
        return isinstance(self.value, str)


def _tokenize(text: str):
    line, col = 1, 0
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 0
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, col
            col += 1
            i += 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise ParseError("unterminated |symbol|", line, col)
            yield text[i + 1 : j], line, col
            col += j - i + 1
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();|":
                j += 1
            yield text[i:j], line, col
            col += j - i
            i = j


def _read_sexprs(text: str) -> list[_SNode]:
    stack: list[_SNode] = []
    top: list[_SNode] = []
    for tok, line, col in _tokenize(text):
        if tok == "(":
            stack.append(_SNode([], line, col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            node = stack.pop()
            (stack[-1].value if stack else top).append(node)
        else:
            node = _SNode(tok, line, col)
            (stack[-1].value if stack else top).append(node)
    if stack:
        raise ParseError("unbalanced '('", stack[-1].line, stack[-1].col)
    return top


# ---------------------------------------------------------------------------
# Parsing


class _Parser:
    def __init__(self, theory: Theory | None = None):
        self.theory = theory if theory is not None else Theory()
        self._eq_count = sum(1 for e in self.theory.eqs if e.name.startswith("ax"))

    # -- sorts ---------------------------------------------------------------

    def parse_sort(self, node: _SNode, tyvars: dict[str, Sort] | None = None) -> Sort:
        tyvars = tyvars or {}
        if node.is_atom:
            name = node.value
            if name in tyvars:
                return tyvars[name]
            if name in self.theory.sorts:
                return self.theory.sorts[name]
            if name in self.theory.templates:
                raise ParseError(f"parametric sort {name} needs arguments", node.line, node.col)
            raise ParseError(f"unknown sort {name}", node.line, node.col)
        items = node.value
        if not items or not items[0].is_atom:
            raise ParseError("bad sort expression", node.line, node.col)
        head = items[0].value
        if head == "=>":
            parts = [self.parse_sort(x, tyvars) for x in items[1:]]
            if len(parts) < 2:
                raise ParseError("function sort needs arguments and result", node.line, node.col)
            return fn_sort(tuple(parts[:-1]), parts[-1])
        if head in self.theory.templates:
            args = tuple(self.parse_sort(x, tyvars) for x in items[1:])
            return self._instantiate_template(self.theory.templates[head], args, node)
        raise ParseError(f"unknown sort constructor {head}", node.line, node.col)

    def _instantiate_template(
        self, tpl: _DatatypeTemplate, args: tuple[Sort, ...], node: _SNode
    ) -> Sort:
        if len(args) != len(tpl.params):
            raise ParseError(f"{tpl.name} expects {len(tpl.params)} sort args", node.line, node.col)
        if tpl.instance_args is not None:
            if tpl.instance_args != args:
                raise ParseError(
                    f"datatype {tpl.name} already instantiated at "
                    f"({' '.join(map(str, tpl.instance_args))}); a second instantiation "
                    "is not supported",
                    node.line,
                    node.col,
                )
            return Sort(tpl.name, args)
        tpl.instance_args = args
        dsort = Sort(tpl.name, args)
        tymap = dict(zip(tpl.params, args))
        # Materialize constructors; recursive references to the template with
        # the template's own parameters resolve to this very instance.
        placeholder_vars = {p: a for p, a in tymap.items()}
        ctors = []
        for cname, sels in tpl.ctor_specs:
            arg_sorts = tuple(self.parse_sort(s_expr, placeholder_vars) for _, s_expr in sels)
            ctors.append(FuncDecl(cname, arg_sorts, dsort, is_constructor=True))
        dt = Datatype(dsort, ctors)
        self.theory.datatypes.append(dt)
        for c in ctors:
            self.theory.add_func(c)
        if not dt.base_constructors():
            raise ParseError(f"datatype {tpl.name} has no base constructor", node.line, node.col)
        return dsort

    # -- terms ---------------------------------------------------------------

    def parse_term(self, node: _SNode, env: dict[str, Sort]) -> Term:
        th = self.theory
        if node.is_atom:
            name = node.value
            if name in env:
                return leaf(PatternVar(name, env[name]))
            decl = th.lookup(name)
            if decl is not None:
                if decl.arity != 0:
                    raise ParseError(f"{name} expects arguments", node.line, node.col)
                return app(decl)
            raise ParseError(f"unknown symbol {name}", node.line, node.col)
        items = node.value
        if not items:
            raise ParseError("empty application", node.line, node.col)
        if not items[0].is_atom:
            raise ParseError("application head must be a symbol", node.line, node.col)
        head = items[0].value
        if head == "match":
            return self._match_term(items, env, node)
        args = [self.parse_term(x, env) for x in items[1:]]

        if head == "ite":
            if len(args) != 3 or args[0].sort != BOOL:
                raise ParseError("ite expects (ite Bool a b)", node.line, node.col)
            if args[1].sort != args[2].sort:
                raise ParseError("ite branches must share a sort", node.line, node.col)
            decl = th.ensure_match(BOOL, args[1].sort)
            return app(decl, *args)
        if head == "@":
            fn, rest = args[0], args[1:]
            if not is_fn_sort(fn.sort):
                raise ParseError("@ needs a function-sorted head", node.line, node.col)
            return self._apply_fn(fn, rest, node)
        if head in env and is_fn_sort(env[head]):
            fn = leaf(PatternVar(head, env[head]))
            return self._apply_fn(fn, args, node)
        decl = th.lookup(head)
        if decl is not None:
            if decl.arity == 0 and is_fn_sort(decl.ret_sort):
                return self._apply_fn(app(decl), args, node)
            if decl.arity != len(args):
                raise ParseError(
                    f"{head} expects {decl.arity} args, got {len(args)}", node.line, node.col
                )
            try:
                return app(decl, *args)
            except SortError as e:
                raise ParseError(str(e), node.line, node.col) from None
        raise ParseError(f"unknown symbol {head}", node.line, node.col)

    def _apply_fn(self, fn: Term, args: list[Term], node: _SNode) -> Term:
        want = fn_arg_sorts(fn.sort)
        if len(args) != len(want):
            raise ParseError(
                f"function of sort {fn.sort} applied to {len(args)} args", node.line, node.col
            )
        decl = self.theory.ensure_apply(fn.sort)
        try:
            return app(decl, fn, *args)
        except SortError as e:
            raise ParseError(str(e), node.line, node.col) from None

    def _raw_arms(self, items: list[_SNode], ctor_names: set[str], node: _SNode):
        """Normalize both accepted match syntaxes into [(pattern, body)].

        Accepts arms wrapped in one list, ``(match x ((p1 r1) (p2 r2)))``, or
        splatted, ``(match x (p1 r1) (p2 r2))``, including ``(case p r)`` arms.
        """

        def pattern_head(p: _SNode) -> str | None:
            if p.is_atom:
                return p.value
            if p.value and p.value[0].is_atom:
                return p.value[0].value
            return None

        def looks_like_arm(e: _SNode) -> bool:
            if e.is_atom:
                return False
            v = e.value
            if len(v) == 3 and v[0].is_atom and v[0].value == "case":
                return pattern_head(v[1]) in ctor_names
            return len(v) == 2 and pattern_head(v[0]) in ctor_names

        def split_arm(e: _SNode):
            v = e.value
            if len(v) == 3 and v[0].is_atom and v[0].value == "case":
                return v[1], v[2]
            return v[0], v[1]

        candidates = items[2:]
        if (
            len(candidates) == 1
            and not candidates[0].is_atom
            and candidates[0].value
            and all(looks_like_arm(e) for e in candidates[0].value)
        ):
            candidates = candidates[0].value
        arms = []
        for e in candidates:
            if not looks_like_arm(e):
                raise ParseError("bad match arm", e.line, e.col)
            arms.append(split_arm(e))
        if not arms:
            raise ParseError("match needs at least one arm", node.line, node.col)
        return arms

    def _match_term(self, items: list[_SNode], env: dict[str, Sort], node: _SNode) -> Term:
        """A match in term position: scrutinee's constructors must be nullary."""
        if len(items) < 3:
            raise ParseError("match expects a scrutinee and arms", node.line, node.col)
        scrut = self.parse_term(items[1], env)
        dt = self.theory.datatype_of(scrut.sort)
        if dt is None:
            raise ParseError(f"match scrutinee sort {scrut.sort} is not a datatype", node.line, node.col)
        if any(c.arity for c in dt.constructors):
            raise ParseError(
                "match with binding patterns is only supported at the top level of a "
                "definition body, on a parameter variable",
                node.line,
                node.col,
            )
        ctor_names = {c.name for c in dt.constructors}
        by_ctor: dict[str, Term] = {}
        for pat_node, body_node in self._raw_arms(items, ctor_names, node):
            cname, bound = self._parse_pattern(pat_node)
            if bound:
                raise ParseError(f"{cname} is nullary", pat_node.line, pat_node.col)
            if cname in by_ctor:
                raise ParseError(f"duplicate match arm {cname}", pat_node.line, pat_node.col)
            by_ctor[cname] = self.parse_term(body_node, env)
        missing = [c.name for c in dt.constructors if c.name not in by_ctor]
        if missing:
            raise ParseError(
                f"match does not cover constructors: {', '.join(missing)}", node.line, node.col
            )
        ordered = [by_ctor[c.name] for c in dt.constructors]
        ret = ordered[0].sort
        for b in ordered[1:]:
            if b.sort != ret:
                raise ParseError("match arms must share a sort", node.line, node.col)
        decl = self.theory.ensure_match(scrut.sort, ret)
        return app(decl, scrut, *ordered)

    # -- commands -------------------------------------------------------------

    def run(self, text: str) -> Theory:
        for node in _read_sexprs(text):
            self.command(node)
        self.theory.validate()
        return self.theory

    def command(self, node: _SNode):
        if node.is_atom or not node.value or not node.value[0].is_atom:
            raise ParseError("expected a command", node.line, node.col)
        items = node.value
        cmd = items[0].value
        handler = {
            "declare-sort": self._cmd_declare_sort,
            "declare-datatype": self._cmd_declare_datatype,
            "declare-datatypes": self._cmd_declare_datatypes,
            "declare-fun": self._cmd_declare_fun,
            "declare-const": self._cmd_declare_const,
            "define-fun": self._cmd_define_fun,
            "define-fun-rec": self._cmd_define_fun,
            "assert": self._cmd_assert,
            "assert-not": self._cmd_assert_not,
            "prove": self._cmd_prove,
            "check-sat": lambda i, n: None,
            "set-logic": lambda i, n: None,
            "set-info": lambda i, n: None,
            "set-option": lambda i, n: None,
            "exit": lambda i, n: None,
        }.get(cmd)
        if handler is None:
            raise ParseError(f"unsupported command {cmd}", node.line, node.col)
        handler(items, node)

    def _cmd_declare_sort(self, items, node):
        if len(items) not in (2, 3):
            raise ParseError("declare-sort expects (declare-sort Name [arity])", node.line, node.col)
        name = items[1].value
        arity = int(items[2].value) if len(items) == 3 else 0
        if arity != 0:
            raise ParseError("only arity-0 declared sorts are supported", node.line, node.col)
        if name in self.theory.sorts:
            raise ParseError(f"duplicate sort {name}", node.line, node.col)
        self.theory.sorts[name] = Sort(name)

    def _ctor_specs(self, decl_node: _SNode):
        specs = []
        for ctor_node in decl_node.value:
            if ctor_node.is_atom:
                specs.append((ctor_node.value, []))
                continue
            parts = ctor_node.value
            cname = parts[0].value
            sels = []
            for sel in parts[1:]:
                if sel.is_atom or len(sel.value) != 2:
                    raise ParseError("selector must be (name Sort)", sel.line, sel.col)
                sels.append((sel.value[0].value, sel.value[1]))
            specs.append((cname, sels))
        return specs

    def _register_datatype(self, name: str, decl_node: _SNode, node: _SNode):
        params: tuple[str, ...] = ()
        if (
            not decl_node.is_atom
            and decl_node.value
            and decl_node.value[0].is_atom
            and decl_node.value[0].value == "par"
        ):
            params = tuple(p.value for p in decl_node.value[1].value)
            decl_node = decl_node.value[2]
        specs = self._ctor_specs(decl_node)
        if name in self.theory.sorts or name in self.theory.templates:
            raise ParseError(f"duplicate sort {name}", node.line, node.col)
        if params:
            self.theory.templates[name] = _DatatypeTemplate(name, params, specs)
            return
        dsort = Sort(name)
        self.theory.sorts[name] = dsort
        ctors = []
        for cname, sels in specs:
            arg_sorts = tuple(self.parse_sort(s_expr) for _, s_expr in sels)
            ctors.append(FuncDecl(cname, arg_sorts, dsort, is_constructor=True))
        dt = Datatype(dsort, ctors)
        self.theory.datatypes.append(dt)
        for c in ctors:
            self.theory.add_func(c)
        if not dt.base_constructors():
            raise ParseError(f"datatype {name} has no base constructor", node.line, node.col)

    def _cmd_declare_datatype(self, items, node):
        if len(items) != 3:
            raise ParseError("declare-datatype expects name and declaration", node.line, node.col)
        self._register_datatype(items[1].value, items[2], node)

    def _cmd_declare_datatypes(self, items, node):
        if len(items) != 3:
            raise ParseError("declare-datatypes expects two lists", node.line, node.col)
        names = []
        for d in items[1].value:
            if d.is_atom:
                names.append(d.value)
            else:
                names.append(d.value[0].value)
        decls = items[2].value
        if len(names) != len(decls):
            raise ParseError("declare-datatypes arity mismatch", node.line, node.col)
        for name, decl in zip(names, decls):
            self._register_datatype(name, decl, node)

    def _cmd_declare_fun(self, items, node):
        if len(items) != 4:
            raise ParseError("declare-fun expects (declare-fun name (args) ret)", node.line, node.col)
        name = items[1].value
        arg_sorts = tuple(self.parse_sort(x) for x in items[2].value)
        ret = self.parse_sort(items[3])
        self.theory.add_func(FuncDecl(name, arg_sorts, ret))

    def _cmd_declare_const(self, items, node):
        if len(items) != 3:
            raise ParseError("declare-const expects (declare-const name Sort)", node.line, node.col)
        ret = self.parse_sort(items[2])
        self.theory.add_func(FuncDecl(items[1].value, (), ret))

    def _cmd_define_fun(self, items, node):
        # (define-fun[-rec] name ((x S)...) Ret body), optionally (par (a...) (...))
        rest = items[1:]
        tyvars: dict[str, Sort] = {}
        if len(rest) == 1 and not rest[0].is_atom and rest[0].value[0].value == "par":
            par = rest[0].value
            for tv in par[1].value:
                tyvars[tv.value] = self._type_var(tv.value)
            rest = par[2].value
        if len(rest) != 4:
            raise ParseError("define-fun expects name, params, return sort, body", node.line, node.col)
        name = rest[0].value
        params = []
        for p in rest[1].value:
            if p.is_atom or len(p.value) != 2:
                raise ParseError("parameter must be (name Sort)", p.line, p.col)
            params.append((p.value[0].value, self.parse_sort(p.value[1], tyvars)))
        ret = self.parse_sort(rest[2], tyvars)
        decl = FuncDecl(name, tuple(s for _, s in params), ret)
        self.theory.add_func(decl)
        env = dict(params)
        lhs = app(decl, *[leaf(PatternVar(n, s)) for n, s in params])
        self._define_arms(decl, lhs, env, rest[3])

    def _type_var(self, name: str) -> Sort:
        existing = self.theory.sorts.get(name)
        if existing is not None:
            return existing
        tv = Sort(name, is_type_var=True)
        self.theory.sorts[name] = tv
        return tv

    def _define_arms(
        self,
        decl: FuncDecl,
        lhs: Term,
        env: dict[str, Sort],
        body: _SNode,
        subst: dict[Head, Term] | None = None,
    ):
        """Split a definition body into equations, one per leaf match arm.

        ``subst`` rewrites already-matched scrutinee variables to their
        constructor patterns inside arm bodies (they stay in scope).
        """
        subst = subst or {}
        scrut = self._match_on_var(body, env)
        if scrut is None:
            rhs = substitute(self.parse_term(body, env), subst)
            rhs = desugar(rhs, self.theory)
            k = sum(1 for e in self.theory.eqs if e.name.startswith(decl.name + ".")) + 1
            vars_ = tuple(
                (v.name, v.sort)
                for v in dict.fromkeys(pattern_vars_of(lhs) + pattern_vars_of(rhs))
            )
            self.theory.eqs.append(Equation(lhs, rhs, vars_, name=f"{decl.name}.{k}"))
            return
        var_name, arms = scrut
        var_sort = env[var_name]
        dt = self.theory.datatype_of(var_sort)
        seen = []
        for pat_node, body_node in arms:
            ctor_name, bound = self._parse_pattern(pat_node)
            ctor = self.theory.lookup(ctor_name)
            if ctor is None or not ctor.is_constructor or ctor.ret_sort != var_sort:
                raise ParseError(f"bad match pattern constructor {ctor_name}", pat_node.line, pat_node.col)
            if len(bound) != ctor.arity:
                raise ParseError(f"pattern arity mismatch for {ctor_name}", pat_node.line, pat_node.col)
            seen.append(ctor_name)
            arm_env = dict(env)
            for bname, bsort in zip(bound, ctor.arg_sorts):
                arm_env[bname] = bsort
            pat_term = app(ctor, *[leaf(PatternVar(b, s)) for b, s in zip(bound, ctor.arg_sorts)])
            arm_subst = dict(subst)
            arm_subst[PatternVar(var_name, var_sort)] = pat_term
            arm_lhs = substitute(lhs, {PatternVar(var_name, var_sort): pat_term})
            self._define_arms(decl, arm_lhs, arm_env, body_node, arm_subst)
        missing = [c.name for c in dt.constructors if c.name not in seen]
        if missing:
            raise ParseError(f"match does not cover constructors: {', '.join(missing)}", body.line, body.col)

    @staticmethod
    def _parse_pattern(pat: _SNode) -> tuple[str, list[str]]:
        if pat.is_atom:
            return pat.value, []
        return pat.value[0].value, [x.value for x in pat.value[1:]]

    def _match_on_var(self, body: _SNode, env: dict[str, Sort]):
        """If body is a match on a bound variable, return (name, arms).

        Non-variable scrutinees fall through to term parsing, which supports
        them only for nullary-constructor datatypes.
        """
        if body.is_atom or not body.value or not body.value[0].is_atom:
            return None
        items = body.value
        if items[0].value != "match" or len(items) < 3:
            return None
        scrut = items[1]
        if not (scrut.is_atom and scrut.value in env):
            return None
        dt = self.theory.datatype_of(env[scrut.value])
        if dt is None:
            raise ParseError(
                f"match scrutinee {scrut.value} is not of a datatype sort", body.line, body.col
            )
        ctor_names = {c.name for c in dt.constructors}
        return scrut.value, self._raw_arms(items, ctor_names, body)

    # -- assertions and goals --------------------------------------------------

    def _parse_quantified_equation(self, node: _SNode, what: str) -> Equation:
        items = node.value if not node.is_atom else None
        env: dict[str, Sort] = {}
        body = node
        if items and items[0].is_atom and items[0].value == "forall":
            for b in items[1].value:
                if b.is_atom or len(b.value) != 2:
                    raise ParseError("binder must be (name Sort)", b.line, b.col)
                env[b.value[0].value] = self.parse_sort(b.value[1])
            body = items[2]
        if body.is_atom or not body.value or body.value[0].value != "=":
            raise ParseError(f"non-equational {what} (only equalities are supported)", node.line, node.col)
        if len(body.value) != 3:
            raise ParseError("= expects exactly two sides", body.line, body.col)
        lhs = desugar(self.parse_term(body.value[1], env), self.theory)
        rhs = desugar(self.parse_term(body.value[2], env), self.theory)
        try:
            return Equation(lhs, rhs, tuple(env.items()))
        except SortError as e:
            raise ParseError(str(e), node.line, node.col) from None

    def _cmd_assert(self, items, node):
        if len(items) != 2:
            raise ParseError("assert expects one formula", node.line, node.col)
        formula = items[1]
        if (
            not formula.is_atom
            and formula.value
            and formula.value[0].is_atom
            and formula.value[0].value == "not"
        ):
            # (assert (not (forall ... (= a b)))) is a negated goal.
            eq = self._parse_quantified_equation(formula.value[1], "goal")
            eq.name = f"goal{len(self.theory.goals) + 1}"
            self.theory.goals.append(eq)
            return
        eq = self._parse_quantified_equation(formula, "assertion")
        self._eq_count += 1
        eq.name = f"ax{self._eq_count}"
        self.theory.eqs.append(eq)

    def _cmd_assert_not(self, items, node):
        if len(items) != 2:
            raise ParseError("assert-not expects one formula", node.line, node.col)
        eq = self._parse_quantified_equation(items[1], "goal")
        eq.name = f"goal{len(self.theory.goals) + 1}"
        self.theory.goals.append(eq)

    def _cmd_prove(self, items, node):
        if len(items) != 2:
            raise ParseError("prove expects one formula", node.line, node.col)
        eq = self._parse_quantified_equation(items[1], "goal")
        eq.name = f"goal{len(self.theory.goals) + 1}"
        self.theory.goals.append(eq)


def parse_theory(text: str, into: Theory | None = None) -> Theory:
    """Parse an SMT-LIB subset script into a Theory.

    With ``into`` given, declarations and assertions extend that theory
    (used for lemma seed files and compare mode). Parsing is all-or-nothing:
    on error the passed theory is left untouched.
    """
    if into is None:
        return _Parser().run(text)
    snapshot = _copy_theory(into)
    try:
        return _Parser(into).run(text)
    except LangError:
        into.sorts = snapshot.sorts
        into.datatypes = snapshot.datatypes
        into.funcs = snapshot.funcs
        into.eqs = snapshot.eqs
        into.goals = snapshot.goals
        into.internal_funcs = snapshot.internal_funcs
        into.templates = snapshot.templates
        raise


def _copy_theory(t: Theory) -> Theory:
    out = Theory.__new__(Theory)
    out.sorts = dict(t.sorts)
    out.datatypes = list(t.datatypes)
    out.funcs = dict(t.funcs)
    out.eqs = list(t.eqs)
    out.goals = list(t.goals)
    out.internal_funcs = dict(t.internal_funcs)
    out.templates = dict(t.templates)
    return out


# ---------------------------------------------------------------------------
# Serialization


def sort_sexpr(s: Sort) -> str:
    return str(s)


def _canonical_vars(eq: Equation) -> Equation:
    """Rename quantified variables to x1, x2, ... in first-occurrence order."""
    order = dict.fromkeys(pattern_vars_of(eq.lhs) + pattern_vars_of(eq.rhs))
    mapping: dict[Head, Term] = {}
    new_vars = []
    for i, pv in enumerate(order, start=1):
        nv = PatternVar(f"x{i}", pv.sort)
        mapping[pv] = leaf(nv)
        new_vars.append((nv.name, nv.sort))
    return Equation(
        substitute(eq.lhs, mapping), substitute(eq.rhs, mapping), tuple(new_vars), name=eq.name
    )


def serialize_equation(eq: Equation) -> str:
    eq = _canonical_vars(eq)
    binders = " ".join(f"({n} {sort_sexpr(s)})" for n, s in eq.vars)
    body = f"(= {term_text(eq.lhs)} {term_text(eq.rhs)})"
    if eq.vars:
        return f"(assert (forall ({binders}) {body}))"
    return f"(assert {body})"


def serialize_lemmas(lemmas: list[Equation]) -> str:
    """One assert per line; caller is responsible for ordering."""
    if not lemmas:
        return ""
    return "\n".join(serialize_equation(eq) for eq in lemmas) + "\n"


# ---------------------------------------------------------------------------
# Misc term utilities shared by later stages


def fresh_uninterpreted(prefix: str, counter: itertools.count, sort: Sort) -> Term:
    return leaf(Uninterpreted(f"{prefix}{next(counter)}", sort))


def equation_key(eq: Equation) -> str:
    """Canonical text of an equation, for dedup and deterministic sorting."""
    c = _canonical_vars(eq)
    return f"(= {term_text(c.lhs)} {term_text(c.rhs)})"
