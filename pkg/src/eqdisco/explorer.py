"""Iterative-deepening equation discovery.

Each depth level grows the candidate-term graph, then alternates inference
(symbolic examples group observably-equal classes), screening (drop what
current rules already rewrite closed), and proving (structural induction in
smallest-first order). Every proved lemma immediately extends the rule set
and merges its two classes in the candidate graph, failed conjectures wait
in a retry queue, and the level only deepens when a full round admits
nothing new.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from .lang import Equation, Theory, serialize_equation, term_text
from .prover import (
    Lemma,
    check_no_induction,
    conjecture_of_equation,
    generalize,
    prove_by_induction,
)
from .rewrite import (
    DEFAULT_DEPTH,
    DEFAULT_NODE_CAP,
    DEFAULT_SPLIT_DEPTH,
    RewriteRule,
    RuleAdmissionError,
    SaturationAbort,
    Saturator,
    compile_equation,
    order_rules,
    run_rewrites,
)
from .soe import (
    Conjecture,
    co_residence_cells,
    conjecture_key,
    conjecture_order_key,
    infer_conjectures,
    screen,
)
from .sygue import EnumBudget, EnumLimit, EnumState, grow, init_enum

DEFAULT_TERM_DEPTH = 2
DEFAULT_EXAMPLE_DEPTH = 2
DEFAULT_PH_COUNT = 2
# Every admission restarts inference, so rounds per level are finite in
# practice; the guard only exists to turn a surprise into a truncation.
MAX_ROUNDS_PER_LEVEL = 50


class ExploreTimeout(Exception):
    """Raised internally when the wall-clock budget runs out."""


class _ExploreAbort(Exception):
    """Raised by the admission hook to end exploration early (goals done)."""


@dataclass
class ExplorerConfig:
    k: int = DEFAULT_TERM_DEPTH  # candidate term depth
    d: int = DEFAULT_DEPTH  # rewrite iterations per saturation
    c: int = DEFAULT_EXAMPLE_DEPTH  # symbolic example depth
    split_depth: int = DEFAULT_SPLIT_DEPTH
    ph_count: object = DEFAULT_PH_COUNT  # int, or {sort: int}
    timeout: float | None = None  # wall-clock seconds
    case_split_enabled: bool = True
    node_cap: int = DEFAULT_NODE_CAP
    trace: object = None  # callable taking one log line

    def __post_init__(self):
        for name in ("k", "d", "c", "split_depth", "node_cap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class Session:
    """All mutable state of one exploration run."""

    theory: Theory
    config: ExplorerConfig
    enum: EnumState
    rules: list[RewriteRule]
    lemmas: list[Lemma] = field(default_factory=list)
    retry: list[Conjecture] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def empty_stats() -> dict:
    return {
        "phase_times": {
            "generation": 0.0,
            "inference": 0.0,
            "screening": 0.0,
            "proving": 0.0,
        },
        "lemmas": [],
        "conjectures": {
            "emitted": 0,
            "screened": 0,
            "proved": 0,
            "failed": 0,
            "retried": 0,
        },
        "truncated": False,
    }


def datatype_map(theory: Theory) -> dict:
    return {dt.sort: tuple(dt.constructors) for dt in theory.datatypes}


def base_rules(theory: Theory) -> list[RewriteRule]:
    """Definition equations plus match-selection rules, oriented."""
    rules: list[RewriteRule] = []
    for eq in theory.eqs + theory.match_select_equations():
        try:
            rules.extend(compile_equation(eq, origin=eq.origin))
        except RuleAdmissionError:
            if eq.origin == "definition":
                raise
            # Pre-loaded lemmas that cannot be oriented are simply not
            # usable as rules; they were true statements, not definitions,
            # so dropping them loses nothing but a shortcut.
    return order_rules(rules)


class _Clock:
    def __init__(self, timeout: float | None):
        self.deadline = None if timeout is None else time.monotonic() + timeout

    def check(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise ExploreTimeout


class Explorer:
    def __init__(self, theory: Theory, config: ExplorerConfig, on_admit=None):
        self.theory = theory
        self.cfg = config
        self.session = Session(
            theory=theory,
            config=config,
            enum=init_enum(theory, config.ph_count, config.k),
            rules=base_rules(theory),
            stats=empty_stats(),
        )
        self.clock = _Clock(config.timeout)
        self.on_admit = on_admit
        self.trace = config.trace
        self.failed_keys: dict[str, None] = {}
        self.admitted_keys: dict[str, None] = {}

    # -- small helpers --------------------------------------------------------

    @property
    def stats(self) -> dict:
        return self.session.stats

    @property
    def lemmas(self) -> list[Lemma]:
        return self.session.lemmas

    def _tr(self, line: str):
        if self.trace is not None:
            self.trace(line)

    @contextmanager
    def _phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stats["phase_times"][name] += time.perf_counter() - t0

    def _count(self, name: str, n: int = 1):
        self.stats["conjectures"][name] += n

    def _saturator(self, mode: str) -> Saturator:
        # node_cap here is the ceiling; inference (mode "match") additionally
        # scales each per-example copy's budget down to a multiple of the
        # condensed base it starts from.
        return Saturator(
            self.session.rules,
            datatype_map(self.theory),
            d=self.cfg.d,
            split_depth=self.cfg.split_depth,
            node_cap=self.cfg.node_cap,
            case_splits=self.cfg.case_split_enabled,
            split_mode=mode,
        )

    def _saturate_master(self):
        st = self.session.enum
        try:
            run_rewrites(st.egraph, self.session.rules, self.cfg.d, self.cfg.node_cap)
        except SaturationAbort:
            self._tr("master saturation aborted at node cap")
        st.refresh()

    # -- the level / round / proof loops ---------------------------------------

    def run(self) -> tuple[list[Lemma], dict]:
        try:
            self._run_levels()
        except ExploreTimeout:
            self.stats["truncated"] = True
        except _ExploreAbort:
            pass
        self.stats["lemmas"] = [
            {
                "name": lemma.equation.name,
                "equation": serialize_equation(lemma.equation),
                "provenance": lemma.provenance,
            }
            for lemma in self.session.lemmas
        ]
        return self.session.lemmas, self.stats

    def _run_levels(self):
        st = self.session.enum
        out_of_budget = False
        while True:
            self.clock.check()
            with self._phase("generation"):
                try:
                    grow(st, self.cfg.node_cap)
                except EnumLimit:
                    break
                except EnumBudget:
                    self._tr("enumeration stopped at node cap")
                    out_of_budget = True
            self._tr(f"level {st.level}: {len(st.enumerated)} candidate classes")
            self._saturate_master()
            leftovers = self._run_rounds()
            with self._phase("generation"):
                pruned = st.prune_pools(co_residence_cells(leftovers, st.egraph))
            if pruned:
                self._tr(f"level {st.level}: pruned {pruned} growth candidates")
            if out_of_budget:
                break

    def _run_rounds(self) -> list[Conjecture]:
        """Infer/screen/prove until a whole round admits nothing."""
        st = self.session.enum
        kept: list[Conjecture] = []
        for _ in range(MAX_ROUNDS_PER_LEVEL):
            self.clock.check()
            with self._phase("inference"):
                conjs = infer_conjectures(
                    st, self.theory, self._saturator("match"), self.cfg.c, self.trace
                )
            self._count("emitted", len(conjs))
            with self._phase("screening"):
                kept = screen(
                    conjs,
                    st.egraph,
                    self.session.rules,
                    self.cfg.d,
                    self.cfg.node_cap,
                    self.trace,
                )
            self._count("screened", len(conjs) - len(kept))
            st.refresh()
            if not self._prove_batch(kept):
                return [c for c in kept if c.status == "failed"]
        self._tr("round limit reached at this level")
        return [c for c in kept if c.status == "failed"]

    def _prove_batch(self, batch: list[Conjecture]) -> int:
        admitted = 0
        pending = sorted(batch, key=conjecture_order_key)
        psat = self._saturator("full")
        while pending:
            self.clock.check()
            c = pending.pop(0)
            key = conjecture_key(c)
            if key in self.admitted_keys:
                c.status = "redundant"
                self._count("screened")
                continue
            if key in self.failed_keys:
                c.status = "failed"
                continue  # already attempted at this knowledge level
            with self._phase("screening"):
                redundant = check_no_induction(c, psat)
            if redundant:
                c.status = "redundant"
                self._count("screened")
                self._tr(f"redundant {term_text(c.lhs)} = {term_text(c.rhs)}")
                continue
            with self._phase("proving"):
                lemma = self._try_prove(c, psat)
            if lemma is None:
                c.status = "failed"
                self._count("failed")
                self.failed_keys[key] = None
                self.session.retry.append(c)
                continue
            self._admit(c, lemma)
            admitted += 1
            psat = self._saturator("full")
            pending = self._requeue_retries(pending, psat)
        return admitted

    def _try_prove(self, c: Conjecture, psat: Saturator) -> Lemma | None:
        for variant in generalize(c):
            lemma = prove_by_induction(variant, self.theory, psat, trace=self.trace)
            if lemma is not None:
                return lemma
        return None

    def _admit(self, c: Conjecture, lemma: Lemma):
        name = f"lemma{len(self.session.lemmas) + 1}"
        lemma.equation.name = name
        try:
            lemma.rules = compile_equation(lemma.equation, origin="lemma")
        except RuleAdmissionError:
            lemma.rules = []  # true but unorientable; keep it as output only
        self.session.rules = order_rules(self.session.rules + lemma.rules)
        self.session.lemmas.append(lemma)
        self.admitted_keys[
            conjecture_key(conjecture_of_equation(lemma.equation))
        ] = None
        c.status = "proved"
        self._count("proved")
        self._tr(f"admit {name} {lemma.provenance['conjecture']}")
        g = self.session.enum.egraph
        if c.lhs_class >= 0 and c.rhs_class >= 0:
            a, b = g.find(c.lhs_class), g.find(c.rhs_class)
            if a != b:
                g.merge(a, b)
                g.rebuild()
        self._saturate_master()
        if self.on_admit is not None:
            self.on_admit()

    def _requeue_retries(
        self, pending: list[Conjecture], psat: Saturator
    ) -> list[Conjecture]:
        """After an admission: drop now-redundant failures, requeue the rest."""
        survivors: list[Conjecture] = []
        with self._phase("screening"):
            for rc in self.session.retry:
                rkey = conjecture_key(rc)
                if rkey in self.admitted_keys or check_no_induction(rc, psat):
                    rc.status = "redundant"
                    self._count("screened")
                    continue
                survivors.append(rc)
        self.session.retry = []
        for rc in survivors:
            rc.status = "pending"
            self._count("retried")
            self.failed_keys.pop(conjecture_key(rc), None)
            self._tr(f"retry {term_text(rc.lhs)} = {term_text(rc.rhs)}")
        return sorted(pending + survivors, key=conjecture_order_key)


def explore(
    theory: Theory, config: ExplorerConfig | None = None
) -> tuple[list[Lemma], dict]:
    """Discover and prove equational lemmas over the theory's vocabulary."""
    return Explorer(theory, config or ExplorerConfig()).run()


def prove_goals(
    theory: Theory, config: ExplorerConfig | None = None
) -> tuple[list[dict], list[Lemma], dict]:
    """Prove the theory's goals, exploring for helper lemmas as needed.

    Returns (per-goal results, admitted lemmas, stats). Goals are attempted
    before exploration and again after every lemma admission; exploration
    stops the moment every goal is proved.
    """
    config = config or ExplorerConfig()
    explorer = Explorer(theory, config)
    goals = [(eq, conjecture_of_equation(eq)) for eq in theory.goals]
    results = [
        {"goal": eq.name, "equation": serialize_equation(eq), "proved": False, "time": 0.0}
        for eq, _ in goals
    ]
    attempted: dict[int, None] = {}

    def attempt_goals():
        open_left = 0
        for i, (eq, conj) in enumerate(goals):
            if results[i]["proved"]:
                continue
            explorer.clock.check()
            if i in attempted:
                explorer._count("retried")
            attempted[i] = None
            t0 = time.perf_counter()
            with explorer._phase("proving"):
                ok = check_no_induction(conj, explorer._saturator("full"))
                if not ok:
                    ok = (
                        prove_by_induction(
                            conj, theory, explorer._saturator("full"), trace=config.trace
                        )
                        is not None
                    )
            results[i]["time"] += time.perf_counter() - t0
            if ok:
                results[i]["proved"] = True
                if config.trace is not None:
                    config.trace(f"goal {eq.name} proved")
            else:
                open_left += 1
        if not open_left:
            raise _ExploreAbort

    explorer.on_admit = attempt_goals
    try:
        attempt_goals()
        explorer.run()
    except _ExploreAbort:
        explorer.stats["lemmas"] = [
            {
                "name": lemma.equation.name,
                "equation": serialize_equation(lemma.equation),
                "provenance": lemma.provenance,
            }
            for lemma in explorer.lemmas
        ]
    except ExploreTimeout:
        explorer.stats["truncated"] = True
    return results, explorer.lemmas, explorer.stats


def subsumption_ratio(
    t_a: list[Equation],
    t_b: list[Equation],
    base: Theory,
    config: ExplorerConfig | None = None,
) -> float:
    """Fraction of t_a provable, without induction, from base plus t_b."""
    config = config or ExplorerConfig()
    if not t_a:
        return 1.0
    rules = base_rules(base)
    for i, eq in enumerate(t_b, start=1):
        named = Equation(eq.lhs, eq.rhs, eq.vars, name=f"given{i}")
        try:
            rules.extend(compile_equation(named, origin="lemma"))
        except RuleAdmissionError:
            pass  # unorientable statements contribute nothing
    sat = Saturator(
        rules,
        datatype_map(base),
        d=config.d,
        split_depth=config.split_depth,
        node_cap=config.node_cap,
        case_splits=config.case_split_enabled,
        split_mode="full",
    )
    proved = sum(
        1 for eq in t_a if check_no_induction(conjecture_of_equation(eq), sat)
    )
    return proved / len(t_a)
