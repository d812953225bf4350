"""Parser, sort checking, desugaring, and serialization."""

import pytest

from eqdisco.lang import (
    BOOL,
    Equation,
    ParseError,
    PatternVar,
    Placeholder,
    Sort,
    SortError,
    Term,
    app,
    equation_key,
    fn_sort,
    leaf,
    parse_theory,
    pattern_vars_of,
    serialize_equation,
    serialize_lemmas,
    substitute,
    term_size,
    term_text,
)

LISTS = """
(declare-sort Elem 0)
(declare-datatype Lst ((nil) (cons (head Elem) (tail Lst))))
(define-fun-rec app ((xs Lst) (ys Lst)) Lst
  (match xs ((nil ys) ((cons h t) (cons h (app t ys))))))
"""


def test_datatype_and_constructors():
    th = parse_theory(LISTS)
    lst = th.sorts["Lst"]
    dt = th.datatype_of(lst)
    assert [c.name for c in dt.constructors] == ["nil", "cons"]
    assert [c.name for c in dt.base_constructors()] == ["nil"]
    assert dt.is_recursive(th.funcs["cons"])
    assert not dt.is_recursive(th.funcs["nil"])


def test_define_fun_rec_splits_into_arm_equations():
    th = parse_theory(LISTS)
    names = [eq.name for eq in th.eqs]
    assert names == ["app.1", "app.2"]
    base, step = th.eqs
    assert term_text(base.lhs) == "(app nil ys)"
    assert term_text(base.rhs) == "ys"
    assert term_text(step.lhs) == "(app (cons h t) ys)"
    assert term_text(step.rhs) == "(cons h (app t ys))"


def test_nested_match_on_two_parameters():
    th = parse_theory(
        """
(declare-datatype Nat ((zero) (s (pred Nat))))
(define-fun-rec min2 ((a Nat) (b Nat)) Nat
  (match a
    ((zero zero)
     ((s x) (match b
       ((zero zero)
        ((s y) (s (min2 x y)))))))))
"""
    )
    assert [eq.name for eq in th.eqs] == ["min2.1", "min2.2", "min2.3"]
    assert term_text(th.eqs[2].lhs) == "(min2 (s x) (s y))"
    assert term_text(th.eqs[2].rhs) == "(s (min2 x y))"


def test_incomplete_match_is_rejected():
    with pytest.raises(ParseError, match="does not cover"):
        parse_theory(
            """
(declare-datatype Nat ((zero) (s (pred Nat))))
(define-fun-rec bad ((a Nat)) Nat (match a ((zero zero))))
"""
        )


def test_ite_desugars_to_bool_match():
    th = parse_theory(
        """
(declare-sort Elem 0)
(declare-datatype Lst ((nil) (cons (head Elem) (tail Lst))))
(define-fun-rec keep ((p (=> Elem Bool)) (xs Lst)) Lst
  (match xs
    ((nil nil)
     ((cons h t) (ite (p h) (cons h (keep p t)) (keep p t))))))
"""
    )
    step = th.eqs[1]
    assert step.rhs.head.name.startswith("match!Bool")
    cond = step.rhs.args[0]
    assert cond.head.name.startswith("apply!")
    sel = {eq.name: eq for eq in th.match_select_equations()}
    true_eq = sel[step.rhs.head.name + ".true"]
    assert term_text(true_eq.rhs) == "a0"


def test_higher_order_argument_uses_apply_symbol():
    th = parse_theory(
        """
(declare-datatype Nat ((zero) (s (pred Nat))))
(declare-const f (=> Nat Nat))
(assert (forall ((x Nat)) (= (f (f x)) (f x))))
"""
    )
    eq = th.eqs[0]
    assert eq.lhs.head.name.startswith("apply!")
    assert eq.lhs.args[0].head.name == "f"


def test_parametric_datatype_single_instantiation():
    th = parse_theory(
        """
(declare-sort Elem 0)
(declare-datatypes ((Pair 2)) ((par (a b) ((mk (fst a) (snd b))))))
(declare-fun swap ((Pair Elem Elem)) (Pair Elem Elem))
"""
    )
    pair = Sort("Pair", (th.sorts["Elem"], th.sorts["Elem"]))
    assert th.datatype_of(pair) is not None
    with pytest.raises(ParseError, match="second instantiation"):
        parse_theory(
            """
(declare-sort Elem 0)
(declare-datatype Nat ((zero) (s (pred Nat))))
(declare-datatypes ((Pair 2)) ((par (a b) ((mk (fst a) (snd b))))))
(declare-fun one ((Pair Elem Elem)) Elem)
(declare-fun two ((Pair Nat Nat)) Nat)
"""
        )


def test_goal_forms():
    base = LISTS + "(prove (forall ((x Lst)) (= (app x nil) x)))"
    th = parse_theory(base)
    assert len(th.goals) == 1 and th.goals[0].name == "goal1"
    th2 = parse_theory(
        LISTS + "(assert (not (forall ((x Lst)) (= (app x nil) x))))"
    )
    assert len(th2.goals) == 1
    th3 = parse_theory(
        LISTS + "(assert-not (forall ((x Lst)) (= (app x nil) x)))"
    )
    assert len(th3.goals) == 1


def test_non_equational_assertion_is_rejected():
    with pytest.raises(ParseError, match="non-equational"):
        parse_theory(LISTS + "(assert (forall ((x Lst)) (distinct x nil)))")


def test_unknown_symbol_and_unbalanced_parens():
    with pytest.raises(ParseError, match="unknown symbol"):
        parse_theory("(assert (= (foo) (foo)))")
    with pytest.raises(ParseError, match="unbalanced"):
        parse_theory("(declare-sort Elem 0")


def test_parse_error_carries_position():
    try:
        parse_theory("\n\n(declare-fun f (Unknown) Unknown)")
    except ParseError as e:
        assert e.line == 3
    else:
        pytest.fail("expected ParseError")


def test_sort_errors():
    th = parse_theory(LISTS)
    nil = th.funcs["nil"]
    cons = th.funcs["cons"]
    with pytest.raises(SortError):
        app(cons, app(nil), app(nil))  # head arg must be Elem
    with pytest.raises(SortError):
        Equation(app(nil), leaf(PatternVar("e", th.sorts["Elem"])), (("e", th.sorts["Elem"]),))
    with pytest.raises(SortError, match="undeclared"):
        Equation(app(nil), leaf(PatternVar("l", th.sorts["Lst"])), ())


def test_term_utilities():
    th = parse_theory(LISTS)
    x = PatternVar("x", th.sorts["Lst"])
    t = app(th.funcs["app"], leaf(x), app(th.funcs["nil"]))
    assert term_size(t) == 3
    assert pattern_vars_of(t) == [x]
    swapped = substitute(t, {x: app(th.funcs["nil"])})
    assert term_text(swapped) == "(app nil nil)"


def test_placeholder_names_are_sort_tagged():
    ph = Placeholder(1, Sort("Lst"))
    assert ph.name == "ph1_Lst"
    fn_ph = Placeholder(2, fn_sort((Sort("Elem"),), BOOL))
    assert fn_ph.name == "ph2_fn_Elem_Bool"


def test_serialization_canonicalizes_variables():
    th = parse_theory(LISTS)
    lst = th.sorts["Lst"]
    a, b = PatternVar("zz", lst), PatternVar("aa", lst)
    eq = Equation(
        app(th.funcs["app"], leaf(a), leaf(b)),
        app(th.funcs["app"], leaf(b), leaf(a)),
        (("zz", lst), ("aa", lst)),
    )
    text = serialize_equation(eq)
    assert text == "(assert (forall ((x1 Lst) (x2 Lst)) (= (app x1 x2) (app x2 x1))))"
    assert serialize_lemmas([eq]) == text + "\n"
    assert equation_key(eq) == "(= (app x1 x2) (app x2 x1))"


def test_serialized_lemma_file_reparses(tmp_path):
    th = parse_theory(LISTS)
    lst = th.sorts["Lst"]
    x = PatternVar("x", lst)
    eq = Equation(
        app(th.funcs["app"], leaf(x), app(th.funcs["nil"])),
        leaf(x),
        (("x", lst),),
    )
    text = serialize_lemmas([eq])
    th2 = parse_theory(LISTS)
    parse_theory(text, into=th2)
    assert [e.name for e in th2.eqs[-1:]] == ["ax1"]
    assert term_text(th2.eqs[-1].lhs) == "(app x1 nil)"


def test_failed_extension_restores_theory():
    th = parse_theory(LISTS)
    n_eqs, n_funcs = len(th.eqs), len(th.funcs)
    with pytest.raises(ParseError):
        parse_theory("(assert (= nil nil))\n(bogus-command)", into=th)
    assert len(th.eqs) == n_eqs and len(th.funcs) == n_funcs


def test_function_sort_rendering():
    s = fn_sort((Sort("Elem"),), BOOL)
    assert str(s) == "(=> Elem Bool)"
    assert Term.__hash__ is not None  # terms are hashable (hash-consing keys)
