"""Hash-consed e-graph: union-find over e-classes with congruence rebuilding.

E-nodes are (head, child-class tuple) pairs grouped into e-classes. Merging is
cheap and deferred: congruence repair runs in `rebuild`, typically once per
rewrite iteration. Every node carries a birth tick used for incremental
e-matching; ticks are bumped when a node's class identity changes (its class
loses a merge, or the node is re-canonicalized during repair), which makes the
union of incremental match results across ticks equal to a full match.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lang import (
    FuncDecl,
    Head,
    PatternVar,
    Placeholder,
    Sort,
    Term,
    Uninterpreted,
    term_size,
    term_text,
)

EClassId = int
NodeKey = tuple  # (head, tuple[EClassId, ...])


class EGraphError(Exception):
    pass


class SortMismatch(EGraphError):
    pass


class ExtractionError(EGraphError):
    """No finite representative exists for the class."""


@dataclass(frozen=True)
class ENode:
    """Read-only view of a stored e-node."""

    op: Head
    children: tuple[EClassId, ...]
    birth: int


def default_term_key(t: Term) -> tuple:
    """Extraction order: smallest, then most free leaves, then text."""
    fv = 0
    seen: dict[Head, None] = {}
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x.head, (Placeholder, Uninterpreted, PatternVar)):
            if x.head not in seen:
                seen[x.head] = None
                fv += 1
        stack.extend(x.args)
    return (term_size(t), -fv, term_text(t))


class EGraph:
    def __init__(self):
        self._uf_parent: list[int] = []
        self._uf_size: list[int] = []
        # (head, children) -> class id holding that node (may be stale until rebuild)
        self.hashcons: dict[NodeKey, EClassId] = {}
        # canonical class -> {node key: birth tick}
        self.class_nodes: dict[EClassId, dict[NodeKey, int]] = {}
        self.class_sort: dict[EClassId, Sort] = {}
        # child class -> [(parent node key, class containing that node)]
        self.class_parents: dict[EClassId, list[tuple[NodeKey, EClassId]]] = {}
        self.class_maxbirth: dict[EClassId, int] = {}
        # head -> insertion-ordered set of node keys currently live
        self.by_op: dict[Head, dict[NodeKey, None]] = {}
        # sort -> creation-ordered class ids (stale entries tolerated)
        self.by_sort: dict[Sort, list[EClassId]] = {}
        self.dirty: list[EClassId] = []
        self.tick: int = 0
        # per-rule incremental e-match watermarks, carried with the graph so
        # clones continue incrementally
        self.rule_ticks: dict[str, int] = {}
        self._extract_cache: tuple[int, dict[EClassId, Term]] | None = None
        # (pattern id, class) -> (match table, classes read, pinned pattern).
        # Tables survive across ematch calls; mutating a class evicts every
        # table that read it (directly or through a consumed child table).
        self._match_tables: dict[tuple[int, EClassId], tuple] = {}
        self._table_index: dict[EClassId, set] = {}

    # -- union-find -----------------------------------------------------------

    def find(self, cid: EClassId) -> EClassId:
        parent = self._uf_parent
        root = cid
        while parent[root] != root:
            root = parent[root]
        while parent[cid] != root:
            parent[cid], cid = root, parent[cid]
        return root

    def equiv(self, a: EClassId, b: EClassId) -> bool:
        return self.find(a) == self.find(b)

    # -- introspection ---------------------------------------------------------

    def node_count(self) -> int:
        return len(self.hashcons)

    def class_ids(self) -> list[EClassId]:
        return sorted(self.class_nodes)

    def sort_of(self, cid: EClassId) -> Sort:
        return self.class_sort[self.find(cid)]

    def nodes_of(self, cid: EClassId) -> list[ENode]:
        cid = self.find(cid)
        out = []
        for (head, children), birth in self.class_nodes[cid].items():
            out.append(ENode(head, tuple(self.find(c) for c in children), birth))
        return out

    def has_constructor_node(self, cid: EClassId) -> bool:
        for (head, _), _ in self.class_nodes[self.find(cid)].items():
            if isinstance(head, FuncDecl) and head.is_constructor:
                return True
        return False

    # -- insertion -------------------------------------------------------------

    def _new_class(self, sort: Sort) -> EClassId:
        cid = len(self._uf_parent)
        self._uf_parent.append(cid)
        self._uf_size.append(1)
        self.class_nodes[cid] = {}
        self.class_sort[cid] = sort
        self.class_parents[cid] = []
        self.class_maxbirth[cid] = 0
        self.by_sort.setdefault(sort, []).append(cid)
        return cid

    def add_node(self, head: Head, children: tuple[EClassId, ...]) -> EClassId:
        """Intern one e-node over canonical children; returns its class."""
        if isinstance(head, PatternVar):
            raise EGraphError("cannot intern a pattern variable")
        children = tuple(self.find(c) for c in children)
        key = (head, children)
        hit = self.hashcons.get(key)
        if hit is not None:
            return self.find(hit)
        sort = head.ret_sort if isinstance(head, FuncDecl) else head.sort
        cid = self._new_class(sort)
        self.tick += 1
        self.class_nodes[cid][key] = self.tick
        self.class_maxbirth[cid] = self.tick
        self.hashcons[key] = cid
        self.by_op.setdefault(head, {})[key] = None
        seen_children: dict[EClassId, None] = {}
        for ch in children:
            if ch not in seen_children:
                seen_children[ch] = None
                self.class_parents[ch].append((key, cid))
        self._extract_cache = None
        return cid

    def add(self, t: Term) -> EClassId:
        return self.add_node(t.head, tuple(self.add(a) for a in t.args))

    # -- merging and rebuilding --------------------------------------------------

    def _invalidate_tables(self, cid: EClassId):
        keys = self._table_index.pop(cid, None)
        if keys:
            tables = self._match_tables
            for key in keys:
                tables.pop(key, None)

    def merge(self, a: EClassId, b: EClassId) -> EClassId:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        sa, sb = self.class_sort[a], self.class_sort[b]
        if sa != sb:
            raise SortMismatch(f"cannot merge classes of sorts {sa} and {sb}")
        if self._match_tables:
            self._invalidate_tables(a)
            self._invalidate_tables(b)
        if self._uf_size[a] < self._uf_size[b]:
            a, b = b, a  # a is the winner
        self._uf_parent[b] = a
        self._uf_size[a] += self._uf_size[b]
        # Absorbed nodes change class identity: bump their births so that
        # incremental matching revisits them.
        self.tick += 1
        tick = self.tick
        win_nodes = self.class_nodes[a]
        for key in self.class_nodes.pop(b):
            win_nodes[key] = tick
        self.class_maxbirth[a] = tick
        del self.class_maxbirth[b]
        del self.class_sort[b]
        self.class_parents[a].extend(self.class_parents.pop(b))
        self.dirty.append(a)
        self._extract_cache = None
        return a

    def rebuild(self) -> int:
        """Restore congruence; returns the number of class merges performed."""
        merges = 0
        while self.dirty:
            todo: list[EClassId] = []
            seen: dict[EClassId, None] = {}
            for cid in self.dirty:
                root = self.find(cid)
                if root not in seen:
                    seen[root] = None
                    todo.append(root)
            self.dirty = []
            for cid in todo:
                merges += self._repair(self.find(cid))
        return merges

    def _repair(self, cid: EClassId) -> int:
        """Re-canonicalize and deduplicate the parents of a merged class."""
        merges = 0
        old_parents = self.class_parents.get(cid, [])
        self.class_parents[cid] = []
        fresh: dict[NodeKey, EClassId] = {}
        for key, owner in old_parents:
            owner = self.find(owner)
            head, children = key
            ckey = (head, tuple(self.find(c) for c in children))
            if ckey != key:
                # The node moved in hashcons space: re-key and bump its birth.
                self.hashcons.pop(key, None)
                ops = self.by_op.get(head)
                if ops is not None:
                    ops.pop(key, None)
                self.class_nodes[owner].pop(key, None)
                self._invalidate_tables(owner)
            known = fresh.get(ckey)
            if known is None:
                existing = self.hashcons.get(ckey)
                if existing is not None:
                    known = self.find(existing)
            if known is not None and known != owner:
                self.merge(known, owner)
                merges += 1
                owner = self.find(owner)
            if ckey not in self.class_nodes[owner]:
                self.tick += 1
                self.class_nodes[owner][ckey] = self.tick
                self.class_maxbirth[owner] = self.tick
                self._invalidate_tables(owner)
            self.hashcons[ckey] = owner
            self.by_op.setdefault(head, {})[ckey] = None
            fresh[ckey] = owner
        target = self.find(cid)
        self.class_parents[target].extend(fresh.items())
        self._extract_cache = None
        return merges

    # -- e-matching ---------------------------------------------------------------

    def ematch(
        self, pattern: Term, since: int = 0, cached: bool = False
    ) -> list[tuple[dict[PatternVar, EClassId], EClassId]]:
        """All matches of the pattern that use ≥1 node newer than `since`.

        since=0 returns the full match set. Substitutions map each PatternVar
        to a canonical class id; the second element is the matched root class.

        cached=True keeps subpattern match tables on the graph between calls
        (evicted when a class they read changes), which pays off for patterns
        matched repeatedly — rule premises. Only pass it for patterns that
        outlive the graph: tables are keyed by pattern object identity.
        """
        out: list[tuple[dict[PatternVar, EClassId], EClassId]] = []
        seen: dict[tuple, None] = {}

        head = pattern.head
        if isinstance(head, PatternVar):
            for cid in self._sort_classes(head.sort):
                if self.class_maxbirth[cid] > since:
                    out.append(({head: cid}, cid))
            return out

        keys = self.by_op.get(head)
        if not keys:
            return []
        store = self._match_tables if cached else {}
        args = pattern.args
        for key in list(keys):
            owner = self.hashcons.get(key)
            if owner is None:
                continue
            root = self.find(owner)
            birth = self.class_nodes[root].get(key)
            if birth is None:
                continue
            if birth <= since:
                # No combination under an old root can use a new node unless
                # some argument subtree admits one; the table maxima bound
                # that, letting untouched regions skip the join outright.
                newest_possible = birth
                for ap, ch in zip(args, key[1]):
                    if isinstance(ap.head, PatternVar):
                        continue
                    _t, _d, m = self._local_matches(ap, self.find(ch), store, cached)
                    if m > newest_possible:
                        newest_possible = m
                if newest_possible <= since:
                    continue
            combos: dict[tuple, int] = {}
            self._join_args(args, key[1], {}, birth, store, cached, combos, None)
            for items, newest in combos.items():
                if newest <= since:
                    continue
                sig = (root, tuple(sorted((v.name, c) for v, c in items)))
                if sig not in seen:
                    seen[sig] = None
                    out.append((dict(items), root))
        return out

    def _sort_classes(self, sort: Sort) -> list[EClassId]:
        raw = self.by_sort.get(sort, [])
        out: list[EClassId] = []
        seen: dict[EClassId, None] = {}
        for cid in raw:
            root = self.find(cid)
            if root not in seen and root in self.class_nodes:
                seen[root] = None
                out.append(root)
        return out

    def _join_args(self, pats, children, subst, newest, store, persist, out, deps):
        """Accumulate consistent sibling matches into `out`, keeping per
        substitution the max over derivations of the newest node used."""
        if not pats:
            items = tuple(sorted(subst.items(), key=lambda kv: kv[0].name))
            prev = out.get(items)
            if prev is None or prev < newest:
                out[items] = newest
            return
        pat0 = pats[0]
        cid0 = self.find(children[0])
        head0 = pat0.head
        if isinstance(head0, PatternVar):
            bound = subst.get(head0)
            if bound is None:
                s2 = dict(subst)
                s2[head0] = cid0
                self._join_args(pats[1:], children[1:], s2, newest, store, persist, out, deps)
            elif self.find(bound) == cid0:
                self._join_args(pats[1:], children[1:], subst, newest, store, persist, out, deps)
            return
        table, tdeps, _maxnew = self._local_matches(pat0, cid0, store, persist)
        if deps is not None:
            deps.update(tdeps)
        rest_pats = pats[1:]
        rest_children = children[1:]
        for items, newest0 in table.items():
            s2 = dict(subst)
            ok = True
            for v, c in items:
                c = self.find(c)
                bound = s2.get(v)
                if bound is None:
                    s2[v] = c
                elif bound != c:
                    ok = False
                    break
            if ok:
                self._join_args(
                    rest_pats,
                    rest_children,
                    s2,
                    newest0 if newest0 > newest else newest,
                    store,
                    persist,
                    out,
                    deps,
                )

    def _local_matches(self, pat: Term, cid: EClassId, store, persist):
        """All matches of a concrete-headed pattern against one class, as a
        ({subst-items-tuple: newest-node-birth}, classes-read, newest-any)
        triple. Bindings in stored tables may go stale after unions;
        consumers re-canonicalize them, so a table stays valid as long as
        the classes it read keep their node sets."""
        key = (id(pat), cid)
        hit = store.get(key)
        if hit is not None:
            return hit[0], hit[1], hit[3]
        res: dict[tuple, int] = {}
        deps: set[EClassId] = {cid}
        head = pat.head
        nodes = self.class_nodes.get(cid)
        if nodes:
            if pat.args:
                want = len(pat.args)
                for nkey, birth in nodes.items():
                    if nkey[0] == head and len(nkey[1]) == want:
                        self._join_args(pat.args, nkey[1], {}, birth, store, persist, res, deps)
            else:
                birth = nodes.get((head, ()))
                if birth is not None:
                    res[()] = birth
        newest = max(res.values(), default=0)
        store[key] = (res, deps, pat, newest)  # pat pinned so its id stays unique
        if persist:
            index = self._table_index
            for dep in deps:
                bucket = index.get(dep)
                if bucket is None:
                    index[dep] = {key}
                else:
                    bucket.add(key)
        return res, deps, newest

    # -- extraction ----------------------------------------------------------------

    def extract_all_min(self, key=default_term_key) -> dict[EClassId, Term]:
        """Minimal representative per class under `key` (Bellman fixpoint)."""
        if key is default_term_key and self._extract_cache is not None:
            cached_tick, table = self._extract_cache
            if cached_tick == self.tick:
                return table
        best: dict[EClassId, tuple] = {}
        terms: dict[EClassId, Term] = {}
        ids = self.class_ids()
        changed = True
        while changed:
            changed = False
            for cid in ids:
                for (head, children), _ in self.class_nodes[cid].items():
                    args = []
                    ok = True
                    for ch in children:
                        t = terms.get(self.find(ch))
                        if t is None:
                            ok = False
                            break
                        args.append(t)
                    if not ok:
                        continue
                    cand = Term(head, tuple(args))
                    ck = key(cand)
                    cur = best.get(cid)
                    if cur is None or ck < cur:
                        best[cid] = ck
                        terms[cid] = cand
                        changed = True
        if key is default_term_key:
            self._extract_cache = (self.tick, terms)
        return terms

    def extract_min(self, cid: EClassId, key=default_term_key) -> Term:
        table = self.extract_all_min(key)
        term = table.get(self.find(cid))
        if term is None:
            raise ExtractionError(f"class {self.find(cid)} has no finite representative")
        return term

    # -- copying and debugging ---------------------------------------------------------

    def clone(self) -> "EGraph":
        g = EGraph.__new__(EGraph)
        g._uf_parent = self._uf_parent[:]
        g._uf_size = self._uf_size[:]
        g.hashcons = dict(self.hashcons)
        g.class_nodes = {cid: dict(nodes) for cid, nodes in self.class_nodes.items()}
        g.class_sort = dict(self.class_sort)
        g.class_parents = {cid: list(ps) for cid, ps in self.class_parents.items()}
        g.class_maxbirth = dict(self.class_maxbirth)
        g.by_op = {op: dict(keys) for op, keys in self.by_op.items()}
        g.by_sort = {s: ids[:] for s, ids in self.by_sort.items()}
        g.dirty = self.dirty[:]
        g.tick = self.tick
        g.rule_ticks = dict(self.rule_ticks)
        g._extract_cache = self._extract_cache
        # Class ids survive cloning, so cached match tables stay valid in the
        # copy until it diverges. Entries are immutable once stored; only the
        # dicts and per-class index sets need copying.
        g._match_tables = dict(self._match_tables)
        g._table_index = {cid: set(keys) for cid, keys in self._table_index.items()}
        return g

    def dump(self) -> str:
        """Deterministic text dump: one class per line, sorted node lists."""
        lines = []
        for cid in self.class_ids():
            rendered = []
            for (head, children), _ in self.class_nodes[cid].items():
                name = head.name
                if children:
                    inner = " ".join(f"c{self.find(c)}" for c in children)
                    rendered.append(f"({name} {inner})")
                else:
                    rendered.append(name)
            rendered.sort()
            lines.append(f"c{cid} [{self.class_sort[cid]}]: " + " ".join(rendered))
        return "\n".join(lines) + ("\n" if lines else "")

    def dot(self) -> str:
        """GraphViz rendering of classes and nodes (documentation aid)."""
        lines = ["digraph egraph {", "  compound=true;"]
        for cid in self.class_ids():
            lines.append(f"  subgraph cluster_{cid} {{ label=\"c{cid}\";")
            for i, (key, _) in enumerate(self.class_nodes[cid].items()):
                lines.append(f"    n{cid}_{i} [label=\"{key[0].name}\"];")
            lines.append("  }")
        for cid in self.class_ids():
            for i, ((_, children), _) in enumerate(self.class_nodes[cid].items()):
                for ch in children:
                    lines.append(f"  n{cid}_{i} -> n{self.find(ch)}_0;")
        lines.append("}")
        return "\n".join(lines) + "\n"
