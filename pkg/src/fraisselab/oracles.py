"""Class oracles, bounded axiom checkers, amalgam search and type transport.

An oracle packages a membership predicate with a structured one-point
extension generator for one amalgamation class.  Registry keys:

    k1, k2, graphs, linear-orders, rational-metric[:den[:diam]],
    unary-marked, rs-example, mh:<wreath-spec-json>
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .structures import (
    FinStructure,
    PartialMap,
    RqfType,
    Signature,
    StructureError,
    canonical_form,
    enumerate_rqf_types,
    find_embeddings,
    generic_one_point_extensions,
    induced_substructure,
)

__all__ = [
    "ClassOracle",
    "K1Oracle",
    "K2Oracle",
    "GraphsOracle",
    "LinearOrdersOracle",
    "RationalMetricOracle",
    "UnaryMarkedOracle",
    "RSExampleOracle",
    "get_oracle",
    "AmalgamationProblem",
    "Amalgam",
    "amalgamate",
    "PropertyVerdict",
    "check_property",
    "members_up_to",
    "transport_type",
    "graph_structure",
    "order_structure",
    "metric_structure",
    "cliques_structure",
    "GRAPH_SIGNATURE",
    "ORDER_SIGNATURE",
]


GRAPH_SIGNATURE = Signature.make(("R", 2))
ORDER_SIGNATURE = Signature.make(("<", 2))


# ---------------------------------------------------------------------------
# convenience constructors


def graph_structure(n: int, edges) -> FinStructure:
    pairs = []
    for a, b in edges:
        if a == b:
            raise StructureError("graphs are loopless")
        pairs += [(a, b), (b, a)]
    return FinStructure(GRAPH_SIGNATURE, n, {"R": pairs})


def order_structure(n: int) -> FinStructure:
    """The linear order 0 < 1 < ... < n-1."""
    return FinStructure(
        ORDER_SIGNATURE, n, {"<": [(i, j) for i in range(n) for j in range(n) if i < j]}
    )


def cliques_structure(sizes) -> FinStructure:
    """Disjoint cliques with the given block sizes."""
    n = sum(sizes)
    edges = []
    start = 0
    for s in sizes:
        block = range(start, start + s)
        edges += [(a, b) for a in block for b in block if a != b]
        start += s
    return FinStructure(GRAPH_SIGNATURE, n, {"R": edges})


def _distance_symbol(q: Fraction) -> str:
    return f"d:{q}"


def metric_signature(values) -> Signature:
    return Signature(tuple((_distance_symbol(q), 2) for q in sorted(values)))


def metric_structure(matrix, signature: Signature | None = None) -> FinStructure:
    """Build a structure from a symmetric matrix of Fractions (0 diagonal)."""
    n = len(matrix)
    values = sorted({Fraction(matrix[i][j]) for i in range(n) for j in range(n) if i != j})
    sig = signature or metric_signature(values)
    interp: dict[str, list] = {name: [] for name in sig.names}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            name = _distance_symbol(Fraction(matrix[i][j]))
            if name not in interp:
                raise StructureError(f"distance {matrix[i][j]} outside signature")
            interp[name].append((i, j))
    return FinStructure(sig, n, interp)


# ---------------------------------------------------------------------------
# oracle base


class ClassOracle:
    """A named amalgamation-class candidate.

    Subclasses provide `member` and usually a structured
    `one_point_extensions`; everything else is generic.  Oracles are
    immutable after construction.
    """

    name: str = "abstract"
    claims_sap: bool = True
    claims_splits: bool | None = None

    @property
    def signature(self) -> Signature:
        raise NotImplementedError

    def cache_key(self) -> str:
        return self.name

    def member(self, S: FinStructure) -> bool:
        raise NotImplementedError

    def empty(self) -> FinStructure:
        return FinStructure(self.signature, 0)

    def one_point_extensions(self, S, prescribed=None, free=None) -> list[FinStructure]:
        """Members extending S by one point; prescription pins the
        relations to non-free elements."""
        out = [
            ext
            for ext in generic_one_point_extensions(S, prescribed, free)
            if self.member(ext)
        ]
        out.sort(key=lambda e: e._interp_key())
        return out

    def extend(self, S, anchor, nontrivial_only: bool = True) -> list[RqfType]:
        return enumerate_rqf_types(S, anchor, self, nontrivial_only=nontrivial_only)

    def free_amalgam(self, A, B, C, f, g) -> FinStructure | None:
        """Optional constructive amalgam over the standard labeling
        (B keeps its labels, unglued C-part appended in C order)."""
        return None

    def describe(self) -> dict:
        return {
            "name": self.name,
            "claims_sap": self.claims_sap,
            "claims_splits": self.claims_splits,
        }


# ---------------------------------------------------------------------------
# K1: the empty-language class


class K1Oracle(ClassOracle):
    name = "k1"
    claims_sap = True
    claims_splits = False

    @property
    def signature(self):
        return Signature(())

    def member(self, S):
        return True

    def one_point_extensions(self, S, prescribed=None, free=None):
        return [S.with_point({})]

    def free_amalgam(self, A, B, C, f, g):
        return FinStructure(self.signature, B.n + C.n - A.n)


# ---------------------------------------------------------------------------
# graphs and unions of cliques


def _edge_in(prescribed: dict, a: int, star: int) -> bool:
    ts = prescribed.get("R", set())
    return (a, star) in ts or (star, a) in ts


class GraphsOracle(ClassOracle):
    name = "graphs"
    claims_sap = True
    claims_splits = True

    @property
    def signature(self):
        return GRAPH_SIGNATURE

    def member(self, S):
        R = S.interp["R"]
        return all(a != b and (b, a) in R for (a, b) in R)

    def one_point_extensions(self, S, prescribed=None, free=None):
        star = S.n
        if free is None:
            free = list(range(S.n))
        free = sorted(free)
        fixed = [x for x in range(S.n) if x not in set(free)]
        base = set()
        if prescribed:
            for a in fixed:
                if _edge_in(prescribed, a, star):
                    base.update({(a, star), (star, a)})
        out = []
        for k in range(len(free) + 1):
            for adj in itertools.combinations(free, k):
                ts = set(base)
                for a in adj:
                    ts.update({(a, star), (star, a)})
                out.append(S.with_point({"R": ts}))
        out.sort(key=lambda e: e._interp_key())
        return out

    def free_amalgam(self, A, B, C, f, g):
        # disjoint over the base, no cross edges
        return _free_union(self.signature, A, B, C, f, g)

    def first_extension(self, S, prescribed, free):
        # least pattern: prescribed edges only, nothing to free elements
        star = S.n
        ts = set()
        for t in (prescribed or {}).get("R", set()):
            a = t[0] if t[1] == star else t[1]
            ts.update({(a, star), (star, a)})
        ext = S.with_point({"R": ts})
        return ext if self.member(ext) else None


class K2Oracle(ClassOracle):
    """Disjoint unions of cliques: edge relation is an equivalence's
    comparability."""

    name = "k2"
    claims_sap = True
    claims_splits = False

    @property
    def signature(self):
        return GRAPH_SIGNATURE

    def member(self, S):
        R = S.interp["R"]
        for (a, b) in R:
            if a == b or (b, a) not in R:
                return False
        for (a, b) in R:
            for c in range(S.n):
                if c != a and c != b and (b, c) in R and (a, c) not in R:
                    return False
        return True

    def blocks(self, S) -> list[list[int]]:
        seen = set()
        blocks = []
        for x in range(S.n):
            if x in seen:
                continue
            blk = [x] + [y for y in range(S.n) if (x, y) in S.interp["R"]]
            blk = sorted(set(blk))
            seen.update(blk)
            blocks.append(blk)
        return blocks

    def one_point_extensions(self, S, prescribed=None, free=None):
        star = S.n
        if free is None:
            free = list(range(S.n))
        free_set = set(free)
        fixed = [x for x in range(S.n) if x not in free_set]
        out = []
        for choice in [None] + self.blocks(S):
            members = set(choice or [])
            ok = True
            if prescribed is not None:
                for a in fixed:
                    if _edge_in(prescribed, a, star) != (a in members):
                        ok = False
                        break
            if not ok:
                continue
            ts = set()
            for a in members:
                ts.update({(a, star), (star, a)})
            out.append(S.with_point({"R": ts}))
        out.sort(key=lambda e: e._interp_key())
        return out

    def free_amalgam(self, A, B, C, f, g):
        # glue blocks that share a base point; cross edges exactly within
        # merged blocks, so both sides stay induced
        nB, nC, nA = B.n, C.n, A.n
        c_new = [c for c in range(nC) if c not in set(g.pairs.values())]
        label_of_c = {}
        for a in range(nA):
            label_of_c[g.pairs[a]] = f.pairs[a]
        for idx, c in enumerate(c_new):
            label_of_c[c] = nB + idx
        n = nB + len(c_new)
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def join(x, y):
            parent[find(x)] = find(y)

        for (a, b) in B.interp["R"]:
            join(a, b)
        for (a, b) in C.interp["R"]:
            join(label_of_c[a], label_of_c[b])
        edges = [
            (x, y) for x in range(n) for y in range(n) if x != y and find(x) == find(y)
        ]
        return FinStructure(self.signature, n, {"R": edges})


def _free_union(sig, A, B, C, f, g) -> FinStructure:
    """Disjoint union of B and C over the base, no cross tuples."""
    c_new = [c for c in range(C.n) if c not in set(g.pairs.values())]
    label_of_c = {}
    for a in range(A.n):
        label_of_c[g.pairs[a]] = f.pairs[a]
    for idx, c in enumerate(c_new):
        label_of_c[c] = B.n + idx
    n = B.n + len(c_new)
    interp = {name: set(ts) for name, ts in B.interp.items()}
    for name, ts in C.interp.items():
        for t in ts:
            interp.setdefault(name, set()).add(tuple(label_of_c[e] for e in t))
    return FinStructure(sig, n, interp)


# ---------------------------------------------------------------------------
# linear orders


class LinearOrdersOracle(ClassOracle):
    name = "linear-orders"
    claims_sap = True
    claims_splits = True

    @property
    def signature(self):
        return ORDER_SIGNATURE

    def member(self, S):
        lt = S.interp["<"]
        for a in range(S.n):
            if (a, a) in lt:
                return False
            for b in range(S.n):
                if a != b and ((a, b) in lt) == ((b, a) in lt):
                    return False
        for (a, b) in lt:
            for c in range(S.n):
                if (b, c) in lt and (a, c) not in lt:
                    return False
        return True

    def ranking(self, S) -> list[int]:
        """Elements in increasing order."""
        lt = S.interp["<"]
        return sorted(range(S.n), key=lambda x: sum(1 for y in range(S.n) if (y, x) in lt))

    def one_point_extensions(self, S, prescribed=None, free=None):
        star = S.n
        if free is None:
            free = list(range(S.n))
        free_set = set(free)
        fixed = [x for x in range(S.n) if x not in free_set]
        ranked = self.ranking(S)
        out = []
        for slot in range(S.n + 1):
            above = set(ranked[slot:])  # elements greater than the new point
            ok = True
            if prescribed is not None:
                ts = prescribed.get("<", set())
                for a in fixed:
                    if ((star, a) in ts) != (a in above):
                        ok = False
                        break
                    if ((a, star) in ts) != (a not in above):
                        ok = False
                        break
            if not ok:
                continue
            new = {(star, a) for a in above} | {(a, star) for a in range(S.n) if a not in above}
            out.append(S.with_point({"<": new}))
        out.sort(key=lambda e: e._interp_key())
        return out


# ---------------------------------------------------------------------------
# rational metric spaces with a bounded distance grid


class RationalMetricOracle(ClassOracle):
    """Finite metric spaces with distances from a fixed rational grid.

    Grid: all p/q in lowest terms with q <= den_bound and 0 < p/q <=
    diam_bound.  Triangle inequality checked exactly on integer-scaled
    values.
    """

    claims_sap = True
    claims_splits = True

    def __init__(self, den_bound: int = 2, diam_bound=Fraction(2)):
        if den_bound < 1:
            raise StructureError("denominator bound must be >= 1")
        self.den_bound = den_bound
        self.diam_bound = Fraction(diam_bound)
        self._imatrix_cache: dict[FinStructure, list[list[int]] | None] = {}
        values = set()
        for q in range(1, den_bound + 1):
            p = 1
            while Fraction(p, q) <= self.diam_bound:
                values.add(Fraction(p, q))
                p += 1
        self.values: tuple[Fraction, ...] = tuple(sorted(values))
        if not self.values:
            raise StructureError("empty distance grid")
        self._sig = metric_signature(self.values)
        # integer-scaled copies for fast triangle checks
        import math

        self._scale = math.lcm(*[v.denominator for v in self.values])
        self._ivalues = tuple(int(v * self._scale) for v in self.values)
        self._bit_value = {1 << i: v for i, v in enumerate(self.values)}
        self.name = f"rational-metric:{den_bound}:{self.diam_bound}"

    @property
    def signature(self):
        return self._sig

    def cache_key(self):
        return self.name

    def value_of_mask(self, mask: int) -> Fraction | None:
        return self._bit_value.get(mask)

    def matrix(self, S) -> list[list[Fraction]] | None:
        """Distance matrix, or None when the structure is not well-formed
        (exactly one symmetric distance per pair)."""
        n = S.n
        m = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            if S.pair_mask(i, i):
                return None
            for j in range(i + 1, n):
                mask = S.pair_mask(i, j)
                if mask != S.pair_mask(j, i):
                    return None
                v = self._bit_value.get(mask)
                if v is None:
                    return None
                m[i][j] = m[j][i] = v
        return m

    def member(self, S):
        if S.signature != self._sig:
            return False
        m = self.matrix(S)
        if m is None:
            return False
        n = S.n
        sc = self._scale
        im = [[int(v * sc) for v in row] for row in m]
        for i in range(n):
            for j in range(i + 1, n):
                dij = im[i][j]
                for k in range(j + 1, n):
                    a, b, c = dij, im[i][k], im[j][k]
                    if a > b + c or b > a + c or c > a + b:
                        return False
        return True

    def first_extension(self, S, prescribed, free):
        exts = self.one_point_extensions(S, prescribed, free, first_only=True)
        return exts[0] if exts else None

    def one_point_extensions(self, S, prescribed=None, free=None, first_only=False):
        star = S.n
        if free is None:
            free = list(range(S.n))
        free_set = set(free)
        m = self.matrix(S)
        if m is None:
            raise StructureError("not a well-formed metric structure")
        sc = self._scale
        im = [[int(v * sc) for v in row] for row in m]
        forced: dict[int, int] = {}
        if prescribed is not None:
            for name, ts in prescribed.items():
                if not name.startswith("d:"):
                    continue
                v = Fraction(name[2:])
                for t in ts:
                    other = t[0] if t[1] == star else t[1]
                    prev = forced.get(other)
                    iv = int(v * sc)
                    if prev is not None and prev != iv:
                        return []
                    forced[other] = iv
        order = sorted(range(S.n))
        assigned: dict[int, int] = {}
        out: list[FinStructure] = []

        def choices(x: int):
            if x in forced:
                vals = [forced[x]]
            elif x in free_set:
                vals = list(self._ivalues)
            else:
                return None  # fixed but unprescribed: no distance tuple -> ill-formed
            good = []
            for v in vals:
                ok = True
                for y, w in assigned.items():
                    d = im[x][y]
                    if v > w + d or w > v + d or d > v + w:
                        ok = False
                        break
                if ok:
                    good.append(v)
            return good

        def rec(i: int) -> bool:
            if i == len(order):
                ts: dict[str, set] = {}
                for x, v in assigned.items():
                    name = _distance_symbol(Fraction(v, sc))
                    ts.setdefault(name, set()).update({(x, star), (star, x)})
                out.append(S.with_point(ts))
                return first_only
            x = order[i]
            opts = choices(x)
            if opts is None:
                return False
            for v in opts:
                assigned[x] = v
                done = rec(i + 1)
                del assigned[x]
                if done:
                    return True
            return False

        rec(0)
        if not first_only:
            out.sort(key=lambda e: e._interp_key())
        return out

    def int_matrix(self, S) -> list[list[int]] | None:
        """Scaled integer distance matrix, cached per structure."""
        cached = self._imatrix_cache.get(S)
        if cached is not None:
            return cached
        m = self.matrix(S)
        im = None
        if m is not None:
            sc = self._scale
            im = [[int(v * sc) for v in row] for row in m]
        self._imatrix_cache[S] = im
        return im

    def amalgam_exists(self, problem: "AmalgamationProblem") -> bool | None:
        """Matrix-level existence decision: the capped path completion is
        an amalgam iff its cross values stay on the grid."""
        imB = self.int_matrix(problem.B)
        imC = self.int_matrix(problem.C)
        if imB is None or imC is None:
            return None
        f, g = problem.f.pairs, problem.g.pairs
        base = [(f[a], g[a]) for a in range(problem.A.n)]
        c_new = [c for c in range(problem.C.n) if c not in {b for _, b in base}]
        b_new = [b for b in range(problem.B.n) if b not in {a for a, _ in base}]
        M = int(self.diam_bound * self._scale)
        grid = set(self._ivalues)
        # cross distances b -> c via capped path completion through the base
        cross: dict[tuple[int, int], int] = {}
        for b in b_new:
            for c in c_new:
                if base:
                    d = min(imB[b][fb] + imC[gb][c] for fb, gb in base)
                    d = min(d, M)
                else:
                    d = M
                if d not in grid:
                    return False
                cross[(b, c)] = d
        # the capped path metric satisfies all triangles by construction;
        # re-verify the mixed ones anyway (cheap, and keeps the verdict
        # independent of the construction argument)
        for b in b_new:
            for c1 in c_new:
                d1 = cross[(b, c1)]
                for c2 in c_new:
                    if c2 <= c1:
                        continue
                    d2, d12 = cross[(b, c2)], imC[c1][c2]
                    if d1 > d2 + d12 or d2 > d1 + d12 or d12 > d1 + d2:
                        return False
        for c in c_new:
            for b1 in b_new:
                d1 = cross[(b1, c)]
                for b2 in b_new:
                    if b2 <= b1:
                        continue
                    d2, d12 = cross[(b2, c)], imB[b1][b2]
                    if d1 > d2 + d12 or d2 > d1 + d12 or d12 > d1 + d2:
                        return False
        for b in b_new:
            for c in c_new:
                d = cross[(b, c)]
                for fb, gb in base:
                    if abs(imB[b][fb] - imC[gb][c]) > d or d > imB[b][fb] + imC[gb][c]:
                        return False
        return True

    def free_amalgam(self, A, B, C, f, g):
        mB = self.matrix(B)
        mC = self.matrix(C)
        if mB is None or mC is None:
            return None
        c_new = [c for c in range(C.n) if c not in set(g.pairs.values())]
        label_of_c = {}
        for a in range(A.n):
            label_of_c[g.pairs[a]] = f.pairs[a]
        for idx, c in enumerate(c_new):
            label_of_c[c] = B.n + idx
        n = B.n + len(c_new)
        M = self.diam_bound
        full = [[Fraction(0)] * n for _ in range(n)]
        for i in range(B.n):
            for j in range(B.n):
                full[i][j] = mB[i][j]
        for ci in range(C.n):
            for cj in range(C.n):
                full[label_of_c[ci]][label_of_c[cj]] = mC[ci][cj]
        base = [g.pairs[a] for a in range(A.n)]
        for b in range(B.n):
            if b in set(f.pairs.values()):
                continue
            for c in c_new:
                # capped path completion through the base
                if base:
                    d = min(mB[b][f.pairs[a]] + mC[g.pairs[a]][c] for a in range(A.n))
                    d = min(d, M)
                else:
                    d = M
                full[b][label_of_c[c]] = full[label_of_c[c]][b] = d
        try:
            return metric_structure(full, self._sig)
        except StructureError:
            return None


# ---------------------------------------------------------------------------
# the unary-marked control class (at most one marked point)


class UnaryMarkedOracle(ClassOracle):
    name = "unary-marked"
    claims_sap = False
    claims_splits = None

    @property
    def signature(self):
        return Signature.make(("u", 1))

    def member(self, S):
        return len(S.interp["u"]) <= 1

    def one_point_extensions(self, S, prescribed=None, free=None):
        star = S.n
        out = [S.with_point({})]
        want_mark = None
        if prescribed is not None:
            want_mark = (star,) in prescribed.get("u", set())
        if want_mark is not False and not S.interp["u"]:
            out.append(S.with_point({"u": {(star,)}}))
        if want_mark is True:
            out = [e for e in out if e.holds("u", (star,))]
        if want_mark is False:
            out = [e for e in out if not e.holds("u", (star,))]
        out.sort(key=lambda e: e._interp_key())
        return out


# ---------------------------------------------------------------------------
# the two-relation block example (blocks + block-level graph)


class RSExampleOracle(ClassOracle):
    """Blocks marked by an equivalence S; R holds between (never inside)
    blocks and is constant across block pairs."""

    name = "rs-example"
    claims_sap = True
    claims_splits = False

    @property
    def signature(self):
        return Signature.make(("R", 2), ("S", 2))

    def member(self, S):
        Srel = S.interp["S"]
        Rrel = S.interp["R"]
        n = S.n
        for a in range(n):
            if (a, a) not in Srel:
                return False
        for (a, b) in Srel:
            if (b, a) not in Srel:
                return False
            for c in range(n):
                if (b, c) in Srel and (a, c) not in Srel:
                    return False
        for (a, b) in Rrel:
            if a == b or (b, a) not in Rrel:
                return False
            if (a, b) in Srel:
                return False
        # R constant on block pairs
        for (a, b) in Rrel:
            for a2 in range(n):
                if (a, a2) in Srel and (a2, b) not in Rrel and a2 != b:
                    return False
        return True

    def blocks(self, S) -> list[list[int]]:
        seen = set()
        out = []
        for x in range(S.n):
            if x in seen:
                continue
            blk = sorted(y for y in range(S.n) if (x, y) in S.interp["S"])
            seen.update(blk)
            out.append(blk)
        return out

    def one_point_extensions(self, S, prescribed=None, free=None):
        star = S.n
        if free is None:
            free = list(range(S.n))
        free_set = set(free)
        fixed = [x for x in range(S.n) if x not in free_set]
        blocks = self.blocks(S)
        out = []
        options = [("join", i) for i in range(len(blocks))]
        for pattern in itertools.chain.from_iterable(
            itertools.combinations(range(len(blocks)), k) for k in range(len(blocks) + 1)
        ):
            options.append(("new", pattern))
        for kind, arg in options:
            s_edges: set[tuple[int, int]] = {(star, star)}
            r_edges: set[tuple[int, int]] = set()
            if kind == "join":
                blk = blocks[arg]
                for a in blk:
                    s_edges.update({(a, star), (star, a)})
                # R pattern inherited from any block member
                rep = blk[0]
                for b in range(S.n):
                    if (rep, b) in S.interp["R"]:
                        r_edges.update({(b, star), (star, b)})
            else:
                for bi in arg:
                    for b in blocks[bi]:
                        r_edges.update({(b, star), (star, b)})
            if prescribed is not None:
                ok = True
                for a in fixed:
                    if ((a, star) in prescribed.get("S", set()) or (star, a) in prescribed.get("S", set())) != (
                        (a, star) in s_edges
                    ):
                        ok = False
                        break
                    if ((a, star) in prescribed.get("R", set()) or (star, a) in prescribed.get("R", set())) != (
                        (a, star) in r_edges
                    ):
                        ok = False
                        break
                if not ok:
                    continue
            out.append(S.with_point({"S": s_edges, "R": r_edges}))
        # joining distinct blocks always differs; dedupe new-block patterns
        seen = set()
        result = []
        for e in out:
            key = e._interp_key()
            if key not in seen:
                seen.add(key)
                result.append(e)
        result.sort(key=lambda e: e._interp_key())
        return result


# ---------------------------------------------------------------------------
# registry


_REGISTRY_CACHE: dict[str, ClassOracle] = {}


def get_oracle(key: str) -> ClassOracle:
    """Resolve a registry key to an oracle instance (cached)."""
    if key in _REGISTRY_CACHE:
        return _REGISTRY_CACHE[key]
    oracle: ClassOracle
    if key == "k1":
        oracle = K1Oracle()
    elif key == "k2":
        oracle = K2Oracle()
    elif key == "graphs":
        oracle = GraphsOracle()
    elif key == "linear-orders":
        oracle = LinearOrdersOracle()
    elif key == "unary-marked":
        oracle = UnaryMarkedOracle()
    elif key == "rs-example":
        oracle = RSExampleOracle()
    elif key == "rational-metric" or key.startswith("rational-metric:"):
        parts = key.split(":")
        den = int(parts[1]) if len(parts) > 1 else 2
        diam = Fraction(parts[2]) if len(parts) > 2 else Fraction(2)
        oracle = RationalMetricOracle(den, diam)
    elif key.startswith("mh:"):
        from .wreath import mh_oracle_from_key

        oracle = mh_oracle_from_key(key)
    else:
        raise StructureError(f"unknown oracle key {key!r}")
    _REGISTRY_CACHE[key] = oracle
    return oracle


# ---------------------------------------------------------------------------
# type transport f[p]


def transport_type(f: PartialMap, p: RqfType, oracle: ClassOracle | None = None) -> RqfType:
    """Rename the anchors of `p` through `f`.

    When `f` is an isomorphism of the anchor structures the result is a
    valid type over the image; otherwise it is returned flagged
    not-realized (when an oracle is available to decide).
    """
    dom = set(f.pairs)
    if not set(p.anchor) <= dom:
        raise StructureError("map does not cover the anchor")
    images = [f.pairs[x] for x in p.anchor]
    new_anchor = tuple(sorted(images))
    rank = {b: i for i, b in enumerate(new_anchor)}
    relabel = {i: rank[f.pairs[x]] for i, x in enumerate(p.anchor)}
    relabel[p.star] = len(new_anchor)
    extension = p.extension.relabel(relabel)
    equals = f.pairs[p.equals_anchor] if p.equals_anchor is not None else None
    realized = None
    if oracle is not None:
        anchored, _ = induced_substructure(f.target, new_anchor)
        restricted, _ = induced_substructure(extension, range(len(new_anchor)))
        realized = oracle.member(extension) and anchored == restricted
    return RqfType(
        base=f.target,
        anchor=new_anchor,
        extension=extension,
        nontrivial=p.nontrivial,
        equals_anchor=equals,
        realized=realized,
    )


# ---------------------------------------------------------------------------
# amalgamation


@dataclass
class AmalgamationProblem:
    A: FinStructure
    B: FinStructure
    C: FinStructure
    f: PartialMap  # A -> B embedding
    g: PartialMap  # A -> C embedding
    strong: bool = False

    def __post_init__(self):
        for m, nm in ((self.f, "f"), (self.g, "g")):
            if len(m.pairs) != self.A.n:
                raise StructureError(f"{nm} must be total on A")
            if m.kind != "embedding":
                ok, viol = m.verify_embedding()
                if not ok:
                    raise StructureError(f"{nm} is not an embedding: {viol}")


@dataclass
class Amalgam:
    D: FinStructure
    i: PartialMap  # B -> D
    j: PartialMap  # C -> D

    def verify(self, problem: AmalgamationProblem, oracle: ClassOracle) -> bool:
        if not oracle.member(self.D):
            return False
        for m in (self.i, self.j):
            ok, _ = m.verify_embedding()
            if not ok:
                return False
        for a in range(problem.A.n):
            if self.i.pairs[problem.f.pairs[a]] != self.j.pairs[problem.g.pairs[a]]:
                return False
        if problem.strong:
            base = {self.i.pairs[problem.f.pairs[a]] for a in range(problem.A.n)}
            overlap = set(self.i.pairs.values()) & set(self.j.pairs.values())
            if overlap != base:
                return False
        return True


def _amalgam_from_candidate(problem, D, glue: dict[int, int]) -> Amalgam:
    """Assemble maps for the standard labeling; `glue` maps C elements to
    D labels."""
    i = PartialMap(problem.B, D, {b: b for b in range(problem.B.n)}, kind="raw")
    j = PartialMap(problem.C, D, glue, kind="raw")
    return Amalgam(D, i, j)


def _gluings(problem: AmalgamationProblem):
    """Candidate identifications of new C points with new B points,
    largest first (minimal amalgam size first)."""
    g_img = set(problem.g.pairs.values())
    f_img = set(problem.f.pairs.values())
    c_new = [c for c in range(problem.C.n) if c not in g_img]
    b_new = [b for b in range(problem.B.n) if b not in f_img]
    if problem.strong:
        yield {}
        return
    sizes = range(min(len(c_new), len(b_new)), -1, -1)
    for k in sizes:
        for dom in itertools.combinations(c_new, k):
            for img in itertools.permutations(b_new, k):
                yield dict(zip(dom, img))


def _glue_consistent(problem: AmalgamationProblem, phi: dict[int, int]) -> bool:
    """The glued C part must already sit inside B as an induced copy."""
    mapping = {problem.g.pairs[a]: problem.f.pairs[a] for a in range(problem.A.n)}
    mapping.update(phi)
    sub, rel = induced_substructure(problem.C, sorted(mapping))
    pairs = {rel[c]: mapping[c] for c in mapping}
    from .structures import is_embedding

    return is_embedding(sub, problem.B, pairs)


def amalgamate(
    problem: AmalgamationProblem, oracle: ClassOracle, max_extra: int | None = None
) -> Amalgam | None:
    """Search for an amalgam, minimal size first, then lexicographic.

    Absence (None) is a legitimate result and witnesses AP/SAP failure up
    to the search bound |D| <= |B| + |C| - identifications.
    """
    for S in (problem.A, problem.B, problem.C):
        if not oracle.member(S):
            raise StructureError("amalgamation problem outside the class")
    for phi in _gluings(problem):
        if not _glue_consistent(problem, phi):
            continue
        result = _complete_amalgam(problem, oracle, phi)
        if result is not None:
            return result
    return None


def _complete_amalgam(problem, oracle, phi) -> Amalgam | None:
    g_img = set(problem.g.pairs.values())
    c_rest = [c for c in range(problem.C.n) if c not in g_img and c not in phi]
    label_of_c: dict[int, int] = {problem.g.pairs[a]: problem.f.pairs[a] for a in range(problem.A.n)}
    label_of_c.update(phi)

    def rec(D: FinStructure, placed: list[int]) -> FinStructure | None:
        if len(placed) == len(c_rest):
            return D
        c = c_rest[len(placed)]
        star = D.n
        prescribed: dict[str, set] = {}
        fixed = set(label_of_c[x] for x in label_of_c)
        for name, ts in problem.C.interp.items():
            want = set()
            for t in ts:
                if c in t and all(e == c or e in label_of_c for e in t):
                    want.add(tuple(star if e == c else label_of_c[e] for e in t))
            prescribed[name] = want
        free = [x for x in range(D.n) if x not in fixed]
        for ext in oracle.one_point_extensions(D, prescribed=prescribed, free=free):
            label_of_c[c] = star
            found = rec(ext, placed + [c])
            if found is not None:
                return found
            del label_of_c[c]
        return None

    D = rec(problem.B, [])
    if D is None:
        return None
    glue = dict(label_of_c)
    am = _amalgam_from_candidate(problem, D, glue)
    return am if am.verify(problem, oracle) else None


def _amalgam_exists(problem: AmalgamationProblem, oracle: ClassOracle) -> bool:
    """Existence-only check; tries the oracle's constructive amalgam first."""
    fast = getattr(oracle, "amalgam_exists", None)
    if fast is not None:
        verdict = fast(problem)
        if verdict is not None:
            if verdict:
                return True
            return amalgamate(problem, oracle) is not None
    D = oracle.free_amalgam(problem.A, problem.B, problem.C, problem.f, problem.g)
    if D is not None and oracle.member(D):
        c_new = [c for c in range(problem.C.n) if c not in set(problem.g.pairs.values())]
        glue = {problem.g.pairs[a]: problem.f.pairs[a] for a in range(problem.A.n)}
        glue.update({c: problem.B.n + k for k, c in enumerate(c_new)})
        am = _amalgam_from_candidate(problem, D, glue)
        if am.verify(problem, oracle):
            return True
    return amalgamate(problem, oracle) is not None


# ---------------------------------------------------------------------------
# bounded axiom checking


_MEMBER_CACHE: dict[tuple[str, int], list[FinStructure]] = {}


def members_up_to(oracle: ClassOracle, bound: int) -> list[FinStructure]:
    """Canonical members of size <= bound, by iterated one-point extension.

    Complete for hereditary membership predicates (all built-ins).
    """
    key = (oracle.cache_key(), bound)
    if key in _MEMBER_CACHE:
        return _MEMBER_CACHE[key]
    levels: list[list[FinStructure]] = [[oracle.empty()]]
    for _ in range(bound):
        nxt: dict = {}
        for S in levels[-1]:
            for ext in oracle.one_point_extensions(S):
                c, _ = canonical_form(ext)
                nxt[c] = None
        levels.append(sorted(nxt, key=lambda s: s._interp_key()))
    out = [S for lvl in levels for S in lvl]
    _MEMBER_CACHE[key] = out
    return out


@dataclass
class PropertyVerdict:
    oracle: str
    prop: str
    bound: int
    kind: str  # holds-up-to-bound | counterexample | inconclusive-at-bound
    counterexample: dict | None = None
    seconds: float = 0.0

    @property
    def holds(self) -> bool:
        return self.kind == "holds-up-to-bound"


_AUT_CACHE: dict[FinStructure, list[dict[int, int]]] = {}
_REPS_CACHE: dict[tuple[FinStructure, FinStructure], list[PartialMap]] = {}


def _automorphisms(B: FinStructure) -> list[dict[int, int]]:
    auts = _AUT_CACHE.get(B)
    if auts is None:
        auts = [e.pairs for e in find_embeddings(B, B)]
        _AUT_CACHE[B] = auts
    return auts


def _embedding_orbit_reps(A: FinStructure, B: FinStructure) -> list[PartialMap]:
    """One representative per Aut(B)-orbit of embeddings A -> B."""
    key = (A, B)
    cached = _REPS_CACHE.get(key)
    if cached is not None:
        return cached
    embs = find_embeddings(A, B)
    reps: list[PartialMap] = []
    if embs:
        auts = _automorphisms(B)
        seen = set()
        for e in embs:
            k = min(tuple(sigma[e.pairs[a]] for a in range(A.n)) for sigma in auts)
            if k not in seen:
                seen.add(k)
                reps.append(e)
    _REPS_CACHE[key] = reps
    return reps


def check_property(
    oracle: ClassOracle,
    prop: str,
    bound: int,
    time_budget: float | None = None,
) -> PropertyVerdict:
    """Exhaustively check HP / JEP / AP / SAP over members up to `bound`.

    Timeouts surface as 'inconclusive-at-bound', never as holds.
    """
    if bound < 1:
        raise StructureError("bound must be >= 1")
    prop = prop.upper()
    if prop not in ("HP", "JEP", "AP", "SAP"):
        raise StructureError(f"unknown property {prop!r}")
    t0 = time.monotonic()

    def out_of_time():
        return time_budget is not None and time.monotonic() - t0 > time_budget

    def verdict(kind, ce=None):
        return PropertyVerdict(
            oracle=oracle.name,
            prop=prop,
            bound=bound,
            kind=kind,
            counterexample=ce,
            seconds=time.monotonic() - t0,
        )

    members = members_up_to(oracle, bound)

    if prop == "HP":
        for S in members:
            if out_of_time():
                return verdict("inconclusive-at-bound")
            for x in range(S.n):
                sub, _ = induced_substructure(S, [y for y in range(S.n) if y != x])
                if not oracle.member(sub):
                    return verdict(
                        "counterexample", {"S": S, "deleted": x, "substructure": sub}
                    )
        return verdict("holds-up-to-bound")

    if prop == "JEP":
        for ai in range(len(members)):
            for bi in range(ai, len(members)):
                if out_of_time():
                    return verdict("inconclusive-at-bound")
                A, B = members[ai], members[bi]
                empty = oracle.empty()
                problem = AmalgamationProblem(
                    empty,
                    A,
                    B,
                    PartialMap(empty, A, {}),
                    PartialMap(empty, B, {}),
                    strong=False,
                )
                if not _amalgam_exists(problem, oracle):
                    return verdict(
                        "counterexample", {"A": A, "B": B, "searched_to": A.n + B.n}
                    )
        return verdict("holds-up-to-bound")

    strong = prop == "SAP"
    for A in members:
        for bi in range(len(members)):
            B = members[bi]
            reps_B = _embedding_orbit_reps(A, B)
            if not reps_B:
                continue
            for ci in range(bi, len(members)):
                C = members[ci]
                reps_C = _embedding_orbit_reps(A, C) if C != B else reps_B
                if not reps_C:
                    continue
                if out_of_time():
                    return verdict("inconclusive-at-bound")
                for f in reps_B:
                    for g in reps_C:
                        problem = AmalgamationProblem(A, B, C, f, g, strong=strong)
                        if not _amalgam_exists(problem, oracle):
                            return verdict(
                                "counterexample",
                                {
                                    "A": A,
                                    "B": B,
                                    "C": C,
                                    "f": f.sorted_pairs(),
                                    "g": g.sorted_pairs(),
                                    "searched_to": B.n + C.n,
                                },
                            )
    return verdict("holds-up-to-bound")
