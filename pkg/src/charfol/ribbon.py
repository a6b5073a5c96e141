"""Planar-embedded graphs with cyclic edge orders and arc rewriting.

A ribbon graph stores, for every vertex, the counterclockwise cyclic order
of its incident flags.  A flag is either one end of an edge or the
attachment of an oriented external arc.  "Immediately to the right" always
means the first flag clockwise, i.e. the previous entry of the
counterclockwise list.

An arc A with origin o(A) and destination d(A) rewrites the graph: the
edge E immediately to the right of A at o(A) loses its end at o(A) and is
replaced by an edge from its other endpoint to d(A), attached immediately
clockwise of the destination slot.  The module ends with an exhaustive
verifier of the tree rewriting equivalence on all small plane trees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

EDGE = "e"
ARC = "a"


class ArcApplicationError(RuntimeError):
    """The arc has no edge on its right at the origin."""


class RibbonStructureError(RuntimeError):
    """The half-edge data does not define a valid ribbon graph."""


class RibbonGraph:
    """Vertices with counterclockwise flag orders and an edge involution.

    ``orders[v]`` is the ccw list of flags at vertex v; an edge flag is
    ``("e", h)`` with ``partner[h]`` the opposite half-edge, an arc flag is
    ``("a", name, end)`` with end ``"o"`` or ``"d"``.
    """

    def __init__(self, orders, partner):
        self.orders = [list(o) for o in orders]
        self.partner = dict(partner)
        self._vertex_of = {}
        for v, flags in enumerate(self.orders):
            for f in flags:
                if f[0] == EDGE:
                    self._vertex_of[f[1]] = v

    # -- basic structure -------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.orders)

    @property
    def n_edges(self):
        return len(self.partner) // 2

    def copy(self):
        return RibbonGraph([list(o) for o in self.orders], self.partner)

    def vertex_of(self, h):
        return self._vertex_of[h]

    def edges(self):
        out = []
        for h, k in self.partner.items():
            if h < k:
                out.append((self.vertex_of(h), self.vertex_of(k), h, k))
        return out

    def arcs(self):
        found = {}
        for v, flags in enumerate(self.orders):
            for f in flags:
                if f[0] == ARC:
                    found.setdefault(f[1], {})[f[2]] = v
        return found

    def arc_vertices(self, name):
        info = self.arcs()[name]
        return info["o"], info["d"]

    def validate(self):
        seen = set()
        for v, flags in enumerate(self.orders):
            for f in flags:
                if f in seen and f[0] == EDGE:
                    raise RibbonStructureError(f"duplicate flag {f}")
                seen.add(f)
        for h, k in self.partner.items():
            if self.partner.get(k) != h or h == k:
                raise RibbonStructureError("edge involution is broken")
            if h not in self._vertex_of or k not in self._vertex_of:
                raise RibbonStructureError(f"dangling half-edge {h}")
        # Euler formula per connected component (sphere embeddings)
        comps = self.component_count()
        if self.n_vertices - self.n_edges + self.face_count() != 2 * comps:
            raise RibbonStructureError("ribbon structure is not planar")
        return True

    def component_count(self):
        parent = list(range(self.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (a, b, _h, _k) in self.edges():
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        return len({find(v) for v in range(self.n_vertices)})

    def _edge_flags(self, v):
        return [f for f in self.orders[v] if f[0] == EDGE]

    def next_edge_flag(self, v, index, clockwise=True, skip_arcs=True):
        """First flag from position ``index`` (exclusive) going clockwise
        (or ccw); returns (flag, blocked) where blocked means another arc
        flag was met first."""
        flags = self.orders[v]
        n = len(flags)
        step = -1 if clockwise else 1
        blocked = False
        for k in range(1, n):
            f = flags[(index + step * k) % n]
            if f[0] == EDGE:
                return f, blocked
            blocked = True
            if not skip_arcs:
                return None, True
        return None, blocked

    def face_count(self):
        """Faces of the rotation system (arc flags are transparent)."""
        nxt = {}
        for v, flags in enumerate(self.orders):
            eflags = [f[1] for f in flags if f[0] == EDGE]
            for i, h in enumerate(eflags):
                # next half-edge along the face on the left of h
                nxt[self.partner[h]] = eflags[(i + 1) % len(eflags)] if eflags else None
        count = 0
        seen = set()
        for h in self.partner:
            if h in seen:
                continue
            count += 1
            cur = h
            while cur not in seen:
                seen.add(cur)
                cur = nxt[cur]
        # isolated vertices are single faces glued into the count per Euler
        count += sum(1 for v in range(self.n_vertices) if not self._edge_flags(v))
        return count if self.partner or count else 1

    def is_tree(self):
        """Connected with one fewer edge than vertices."""
        return self.component_count() == 1 and self.n_edges == self.n_vertices - 1

    # -- rewriting ---------------------------------------------------------

    def apply_arc(self, name, chirality="right"):
        """The graph after the bifurcation described by the named arc."""
        g = self.copy()
        arcs = g.arcs()
        if name not in arcs or set(arcs[name]) != {"o", "d"}:
            raise ArcApplicationError(f"arc {name!r} is not attached at both ends")
        vo, vd = arcs[name]["o"], arcs[name]["d"]
        o_flag = (ARC, name, "o")
        d_flag = (ARC, name, "d")
        io = g.orders[vo].index(o_flag)
        clockwise = chirality == "right"
        sel, _ = g.next_edge_flag(vo, io, clockwise=clockwise, skip_arcs=True)
        if sel is None:
            raise ArcApplicationError(
                f"no edge at the origin of {name!r} to move")
        h1 = sel[1]
        h2 = g.partner[h1]
        n1 = max(g.partner) + 1
        n2 = n1 + 1
        v2 = g.vertex_of(h2)
        # the moved edge keeps its far endpoint in place...
        i2 = g.orders[v2].index((EDGE, h2))
        g.orders[v2][i2] = (EDGE, n1)
        # ...loses its end at the origin...
        g.orders[vo].remove((EDGE, h1))
        # ...and lands immediately clockwise (ccw for the reversed variant)
        # of the destination slot
        idest = g.orders[vd].index(d_flag)
        g.orders[vd].insert(idest if clockwise else idest + 1, (EDGE, n2))
        g.orders[vo].remove(o_flag)
        g.orders[vd].remove(d_flag)
        del g.partner[h1], g.partner[h2]
        g.partner[n1] = n2
        g.partner[n2] = n1
        return RibbonGraph(g.orders, g.partner)

    # -- tree segments -----------------------------------------------------

    def tree_path(self, a, b):
        """Vertex path and edge flags from a to b (the graph must be a tree).

        Returns (vertices, half_edges) where half_edges[i] is the half-edge
        at vertices[i] pointing toward vertices[i+1].
        """
        adj = {v: [] for v in range(self.n_vertices)}
        for (x, y, h, k) in self.edges():
            adj[x].append((y, h))
            adj[y].append((x, k))
        prev = {a: (None, None)}
        stack = [a]
        while stack:
            v = stack.pop()
            if v == b:
                break
            for (w, h) in adj[v]:
                if w not in prev:
                    prev[w] = (v, h)
                    stack.append(w)
        if b not in prev:
            raise ValueError("vertices are not connected")
        verts = [b]
        halves = []
        while verts[-1] != a:
            v, h = prev[verts[-1]]
            verts.append(v)
            halves.append(h)
        return verts[::-1], halves[::-1]

    # -- serialization -----------------------------------------------------

    def to_text(self):
        lines = []
        for v, flags in enumerate(self.orders):
            toks = []
            for f in flags:
                if f[0] == EDGE:
                    h = f[1]
                    k = self.partner[h]
                    toks.append(f"e{min(h, k) // 2 if False else min(h, k)}.{0 if h < k else 1}")
                else:
                    toks.append(f"{f[1]}{f[2]}")
            lines.append(f"v{v}: " + " ".join(toks))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        """Parse the fixture format: one ``v<k>: tok tok ...`` line per
        vertex; an edge token is any label appearing exactly twice, an arc
        token is a label suffixed with ``o`` or ``d``."""
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            _, _, rest = line.partition(":")
            rows.append(rest.split())
        counts = {}
        for toks in rows:
            for t in toks:
                counts[t] = counts.get(t, 0) + 1
        orders = []
        partner = {}
        first_half = {}
        next_h = 0
        for toks in rows:
            flags = []
            for t in toks:
                if counts[t] == 2:
                    if t in first_half:
                        h = next_h
                        next_h += 1
                        partner[first_half[t]] = h
                        partner[h] = first_half[t]
                    else:
                        first_half[t] = next_h
                        h = next_h
                        next_h += 1
                    flags.append((EDGE, h))
                elif counts[t] == 1 and t[-1] in "od":
                    flags.append((ARC, t[:-1], t[-1]))
                else:
                    raise ValueError(f"token {t!r} is neither an edge pair nor an arc end")
            orders.append(flags)
        return cls(orders, partner)

    # -- canonical form ----------------------------------------------------

    def canonical(self):
        """Canonical bracket encoding up to ribbon isomorphism (trees and
        forests; arcs are ignored)."""
        adj = {v: [f[1] for f in self._edge_flags(v)] for v in range(self.n_vertices)}

        def encode(v, h_in, visited):
            flags = adj[v]
            if h_in is None:
                start = 0
                items = flags
            else:
                start = flags.index(h_in)
                items = flags[start + 1:] + flags[:start]
            out = []
            for h in items:
                w = self.vertex_of(self.partner[h])
                out.append("(" + encode(w, self.partner[h], visited) + ")")
            visited.add(v)
            return "".join(out)

        best = None
        for v in range(self.n_vertices):
            flags = adj[v]
            rotations = range(len(flags)) if flags else [0]
            for r in rotations:
                rot = flags[r:] + flags[:r]
                out = []
                for h in rot:
                    w = self.vertex_of(self.partner[h])
                    out.append("(" + encode(w, self.partner[h], set()) + ")")
                s = "".join(out)
                if best is None or s < best:
                    best = s
        return best or ""


def is_tree(g: RibbonGraph) -> bool:
    return g.is_tree()


def apply_arc(g: RibbonGraph, name: str, chirality: str = "right") -> RibbonGraph:
    return g.apply_arc(name, chirality)


# ----------------------------------------------------------------------
# the two conditions of the rewriting equivalence
# ----------------------------------------------------------------------

def condition_rewriting(g: RibbonGraph, a1="A1", a2="A2", chirality1="right"):
    """A1(G) is not a tree but A2(A1(G)) is."""
    try:
        g1 = g.apply_arc(a1, chirality1)
    except ArcApplicationError:
        return False
    if g1.is_tree():
        return False
    try:
        g2 = g1.apply_arc(a2)
    except ArcApplicationError:
        return False
    return g2.is_tree()


def condition_segment(g: RibbonGraph, a1="A1", a2="A2",
                      second_direction="toward-d1", skip_arcs=True):
    """The combinatorial segment condition on the tree itself.

    The oriented segment from d(A2) to d(A1) must meet, in order,
    d(A2) <= o(A1) < o(A2) <= d(A1), and be immediately to the right of
    both arcs at their origins.  ``second_direction`` selects whether the
    right-of test at o(A2) uses the segment edge toward d(A1) or toward
    d(A2); ``skip_arcs`` makes other arc flags transparent in the right-of
    test.
    """
    o1, d1 = g.arc_vertices(a1)
    o2, d2 = g.arc_vertices(a2)
    try:
        verts, halves = g.tree_path(d2, d1)
    except ValueError:
        return False
    pos = {v: i for i, v in enumerate(verts)}
    if o1 not in pos or o2 not in pos:
        return False
    p1, p2 = pos[o1], pos[o2]
    if not (p1 < p2):
        return False
    # p1 may be 0 (o(A1) = d(A2)); p2 may be the last (o(A2) = d(A1))
    if p2 >= len(verts):
        return False

    def right_of(arc_name, v, wanted_half):
        flag = (ARC, arc_name, "o")
        idx = g.orders[v].index(flag)
        sel, blocked = g.next_edge_flag(v, idx, clockwise=True,
                                        skip_arcs=skip_arcs)
        if sel is None or (blocked and not skip_arcs):
            return False
        return sel[1] == wanted_half

    if not right_of(a1, o1, halves[p1]):
        return False
    if second_direction == "toward-d1":
        if p2 >= len(halves):
            return False
        return right_of(a2, o2, halves[p2])
    # toward d(A2): the half-edge at o(A2) pointing back along the segment
    back_half = g.partner[halves[p2 - 1]]
    return right_of(a2, o2, back_half)


# ----------------------------------------------------------------------
# enumeration of plane trees with arc pairs
# ----------------------------------------------------------------------

def _insertions(flags):
    """Distinct cyclic insertion positions of a new flag."""
    return range(max(len(flags), 1))


def plane_trees(max_vertices):
    """All plane trees with up to ``max_vertices`` vertices, one per ribbon
    isomorphism class, grown by leaf attachment."""
    seed = RibbonGraph([[]], {})
    levels = [[seed]]
    seen = {seed.canonical()}
    out = [seed]
    for n in range(2, max_vertices + 1):
        level = []
        for g in levels[-1]:
            for v in range(g.n_vertices):
                for pos in _insertions(g.orders[v]):
                    h1 = (2 * n) * 10 + 1
                    h2 = h1 + 1
                    orders = [list(o) for o in g.orders]
                    orders[v].insert(pos, (EDGE, h1))
                    orders.append([(EDGE, h2)])
                    partner = dict(g.partner)
                    partner[h1] = h2
                    partner[h2] = h1
                    cand = RibbonGraph(orders, partner)
                    key = cand.canonical()
                    if key not in seen:
                        seen.add(key)
                        level.append(cand)
        levels.append(level)
        out.extend(level)
    return out


def rooted_plane_trees(n_edges):
    """All rooted plane trees with the given number of edges, as nested
    tuples of subtrees (Catalan many)."""
    if n_edges == 0:
        return [()]
    out = []
    for k in range(1, n_edges + 1):  # size of the first subtree
        for first in rooted_plane_trees(k - 1):
            for rest in rooted_plane_trees(n_edges - k):
                out.append(((first,) + rest) if False else ((first,) + tuple(rest)))
    return out


def rooted_to_ribbon(tree):
    """Embed a rooted plane tree tuple as a RibbonGraph."""
    orders = [[]]
    partner = {}
    counter = itertools.count()

    def attach(parent, sub, entry=None):
        h1, h2 = next(counter), next(counter)
        partner[h1] = h2
        partner[h2] = h1
        orders[parent].append((EDGE, h1))
        orders.append([(EDGE, h2)])
        vid = len(orders) - 1
        for child in sub:
            attach(vid, child)
        return vid

    for child in tree:
        attach(0, child)
    return RibbonGraph(orders, partner)


def arc_attachments(g: RibbonGraph, name):
    """All graphs with the named arc attached (origin needs an edge)."""
    for vo in range(g.n_vertices):
        if not any(f[0] == EDGE for f in g.orders[vo]):
            continue
        for po in _insertions(g.orders[vo]):
            g1 = g.copy()
            g1.orders[vo].insert(po, (ARC, name, "o"))
            for vd in range(g1.n_vertices):
                for pd in _insertions(g1.orders[vd]):
                    g2 = g1.copy()
                    g2.orders[vd].insert(pd, (ARC, name, "d"))
                    yield RibbonGraph(g2.orders, g2.partner)


def enumerate_instances(max_vertices):
    """Stream (tree with A1 and A2 attached) over all plane trees with at
    most ``max_vertices`` vertices and all arc pairs."""
    for tree in plane_trees(max_vertices):
        if tree.n_edges == 0:
            continue  # arcs need an edge at the origin
        for g1 in arc_attachments(tree, "A1"):
            yield from arc_attachments(g1, "A2")


def verify_tree_proposition(max_vertices, second_direction="toward-d1",
                            skip_arcs=True, collect_limit=5):
    """Exhaustively test cond1 <=> cond2 and the symmetry corollary.

    Returns a dict with instance counts, counterexample lists (capped at
    ``collect_limit`` serialized instances each) and the reversed-variant
    evidence: instances where the reversed-A1 rewriting satisfies cond1 but
    the corollary fails.
    """
    n_instances = 0
    mismatches = []
    corollary_failures = []
    reversed_breaks = 0
    reversed_example = None
    for g in enumerate_instances(max_vertices):
        n_instances += 1
        c1 = condition_rewriting(g)
        c2 = condition_segment(g, second_direction=second_direction,
                               skip_arcs=skip_arcs)
        if c1 != c2:
            if len(mismatches) < collect_limit:
                mismatches.append({"instance": g.to_text(), "cond1": c1,
                                   "cond2": c2})
            elif len(mismatches) == collect_limit:
                mismatches.append({"instance": "... more omitted"})
        if c1:
            # symmetry: the other region is overtwisted too
            try:
                if g.apply_arc("A2").is_tree():
                    if len(corollary_failures) < collect_limit:
                        corollary_failures.append({"instance": g.to_text()})
            except ArcApplicationError:
                pass
        # reversed-A1 variant: the asymmetry the contact condition excludes
        if condition_rewriting(g, chirality1="left"):
            try:
                if g.apply_arc("A2").is_tree():
                    reversed_breaks += 1
                    if reversed_example is None:
                        reversed_example = g.to_text()
            except ArcApplicationError:
                pass
    return {
        "max_vertices": max_vertices,
        "n_trees": len(plane_trees(max_vertices)),
        "n_instances": n_instances,
        "second_direction": second_direction,
        "skip_arcs": skip_arcs,
        "counterexamples": [m for m in mismatches],
        "corollary_counterexamples": corollary_failures,
        "reversed_variant_breaks": reversed_breaks,
        "reversed_variant_example": reversed_example,
    }


# ----------------------------------------------------------------------
# bridge from foliation analyses
# ----------------------------------------------------------------------

def gamma_plus_of(analysis) -> RibbonGraph:
    """The oriented graph with one vertex per positive node and one edge
    per positive saddle (joining the ends of its stable separatrices), with
    cyclic orders from the departure angles on the surface."""
    from .convexity import giroux_graph, _departure_angle

    graph = giroux_graph(analysis)
    nodes = graph.plus.node_indices
    node_id = {n: i for i, n in enumerate(nodes)}
    raw = {n: [] for n in nodes}
    h = 0
    partner = {}
    for si, seps in graph.plus.edges:
        ends = []
        for sep in seps:
            kind, ref = sep.limit
            if ref not in node_id:
                raise RibbonStructureError(
                    f"stable separatrix of saddle {si} does not reach a "
                    "positive node")
            ang = _departure_angle(analysis, sep.path, ref)
            ends.append((ref, ang, h))
            h += 1
        partner[ends[0][2]] = ends[1][2]
        partner[ends[1][2]] = ends[0][2]
        for ref, ang, hh in ends:
            raw[ref].append((ang, (EDGE, hh)))
    orders = []
    for n in nodes:
        orders.append([f for _, f in sorted(raw[n], key=lambda t: t[0])])
    return RibbonGraph(orders, partner)
