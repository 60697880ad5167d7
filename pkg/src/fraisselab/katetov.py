"""Rational metric side: Katětov maps, split pairs, Urysohn-like stages.

Everything here runs on exact rational arithmetic; no floating point.
The finite stand-ins: stages realize every small-support rational
Katětov map from a bounded grid, carved subsets report their absorption
defects explicitly, and the metric strategy round mirrors the discrete
one with radii.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .structures import StructureError

__all__ = [
    "RationalMetricSpace",
    "KatetovMap",
    "is_katetov",
    "sup_distance",
    "katetov_extension",
    "split_pair",
    "grid_values",
    "grid_katetov_maps",
    "paley_sphere",
    "build_rational_urysohn",
    "check_approx_extension",
    "carve_absorbing_subspace",
    "MetricGameState",
    "new_metric_game",
    "metric_splitter_reply",
    "MetricGameError",
]


class MetricGameError(StructureError):
    """Illegal metric move; carries the distorted pair when present."""

    def __init__(self, message, violating=None):
        super().__init__(message)
        self.violating = violating


# ---------------------------------------------------------------------------
# spaces and maps


class RationalMetricSpace:
    """Finite metric space with exact rational distances.

    `bound` caps the diameter (1 for the sphere variant)."""

    __slots__ = ("n", "d", "bound")

    def __init__(self, n: int, d, bound=None):
        self.n = n
        self.d = [[Fraction(x) for x in row] for row in d]
        self.bound = Fraction(bound) if bound is not None else None
        if len(self.d) != n or any(len(row) != n for row in self.d):
            raise StructureError("distance matrix must be n x n")
        for i in range(n):
            if self.d[i][i] != 0:
                raise StructureError(f"d({i},{i}) must be 0")
            for j in range(n):
                if i != j and self.d[i][j] <= 0:
                    raise StructureError(f"d({i},{j}) must be positive")
                if self.d[i][j] != self.d[j][i]:
                    raise StructureError(f"asymmetry at ({i},{j})")
                if self.bound is not None and self.d[i][j] > self.bound:
                    raise StructureError(f"d({i},{j}) exceeds the bound")
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    a, b, c = self.d[i][j], self.d[i][k], self.d[j][k]
                    if a > b + c or b > a + c or c > a + b:
                        raise StructureError(f"triangle violated on ({i},{j},{k})")

    def diameter(self) -> Fraction:
        return max(
            (self.d[i][j] for i in range(self.n) for j in range(self.n)), default=Fraction(0)
        )

    def distance_to(self, x: int, subset) -> Fraction | None:
        vals = [self.d[x][y] for y in subset if y != x]
        if x in subset:
            return Fraction(0)
        return min(vals) if vals else None

    def with_point(self, distances) -> "RationalMetricSpace":
        """Extend by one point at the given distances (validated)."""
        n = self.n
        d = [row[:] + [Fraction(distances[i])] for i, row in enumerate(self.d)]
        d.append([Fraction(distances[i]) for i in range(n)] + [Fraction(0)])
        return RationalMetricSpace(n + 1, d, bound=self.bound)

    def __eq__(self, other):
        return (
            isinstance(other, RationalMetricSpace)
            and self.n == other.n
            and self.d == other.d
            and self.bound == other.bound
        )

    def __repr__(self):
        return f"RationalMetricSpace(n={self.n}, diam={self.diameter()})"


@dataclass(frozen=True)
class KatetovMap:
    """Prospective distances from a new point to (a subset of) a space."""

    space: RationalMetricSpace
    values: tuple  # Fraction per point of the space, or per support member
    support: tuple | None = None  # point indices; None = all points

    def points(self) -> tuple:
        return self.support if self.support is not None else tuple(range(self.space.n))

    def value_at(self, x: int) -> Fraction:
        return self.values[self.points().index(x)]


def is_katetov(g: KatetovMap) -> tuple[bool, tuple | None]:
    """Both inequalities, exactly, over every pair of defined points."""
    pts = g.points()
    if len(g.values) != len(pts):
        raise StructureError("values must cover the map's points")
    for v in g.values:
        if Fraction(v) <= 0:
            return False, ("nonpositive", v)
    for i, x in enumerate(pts):
        for j, y in enumerate(pts):
            if j <= i:
                continue
            gx, gy = Fraction(g.values[i]), Fraction(g.values[j])
            dxy = g.space.d[x][y]
            if abs(gx - gy) > dxy or dxy > gx + gy:
                return False, (x, y)
    return True, None


def sup_distance(g1: KatetovMap, g2: KatetovMap) -> Fraction:
    """sup |g1 - g2| over the shared points."""
    pts = g1.points()
    if pts != g2.points():
        raise StructureError("maps must share their points")
    return max(abs(Fraction(a) - Fraction(b)) for a, b in zip(g1.values, g2.values))


def point_map(space: RationalMetricSpace, x: int) -> KatetovMap:
    """The canonical embedding x -> d(x, .)."""
    return KatetovMap(space, tuple(space.d[x][y] for y in range(space.n) if y != x), tuple(
        y for y in range(space.n) if y != x
    ))


def katetov_extension(g: KatetovMap, to_all: bool = True) -> KatetovMap:
    """Extend from the support by g~(x) = min over the support of
    g(y) + d(x, y); finite supports turn the infimum into a minimum."""
    pts = g.points()
    if not pts:
        raise StructureError("empty support")
    ok, viol = is_katetov(g)
    if not ok:
        raise StructureError(f"not a Katetov map on its support: {viol}")
    space = g.space
    values = []
    for x in range(space.n):
        if x in pts:
            values.append(Fraction(g.values[pts.index(x)]))
        else:
            values.append(min(Fraction(g.values[i]) + space.d[x][y] for i, y in enumerate(pts)))
    return KatetovMap(space, tuple(values), None)


# ---------------------------------------------------------------------------
# the split pair


def split_pair(
    space: RationalMetricSpace,
    c: int,
    d_star,
    epsilon,
) -> tuple[KatetovMap, KatetovMap]:
    """Two Katetov maps agreeing off the marked point with a gap above
    epsilon at it.  Deterministic: the free parameter is the midpoint of
    (epsilon, d_star).

    On bounded spaces values are capped at the bound and re-verified;
    failures raise rather than guess.
    """
    d_star, epsilon = Fraction(d_star), Fraction(epsilon)
    others = [x for x in range(space.n) if x != c]
    if not others:
        raise StructureError("split pair needs at least one point besides c")
    dmin = min(space.d[c][x] for x in others)
    if not (0 < epsilon < d_star):
        raise StructureError("need 0 < epsilon < d_star")
    if d_star > dmin:
        raise StructureError("d_star must not exceed the distance from c to the rest")
    D = space.diameter()
    delta = (epsilon + d_star) / 2
    v1 = {x: 2 * D for x in others}
    v1[c] = 2 * D
    v2 = dict(v1)
    v2[c] = 2 * D - delta
    if space.bound is not None:
        cap = space.bound
        v1 = {x: min(v, cap) for x, v in v1.items()}
        v2 = {x: min(v, cap) for x, v in v2.items()}
    order = tuple(sorted(v1))
    g1 = KatetovMap(space, tuple(v1[x] for x in order), order)
    g2 = KatetovMap(space, tuple(v2[x] for x in order), order)
    for g in (g1, g2):
        ok, viol = is_katetov(g)
        if not ok:
            raise StructureError(f"bounded split pair loses the Katetov property: {viol}")
    if abs(g1.value_at(c) - g2.value_at(c)) <= epsilon:
        raise StructureError("bounded split pair loses the gap")
    return g1, g2


# ---------------------------------------------------------------------------
# grids of test maps


def grid_values(den_bound: int, max_value) -> list[Fraction]:
    """Positive rationals with denominator <= den_bound up to max_value."""
    out = set()
    max_value = Fraction(max_value)
    for q in range(1, den_bound + 1):
        p = 1
        while Fraction(p, q) <= max_value:
            out.add(Fraction(p, q))
            p += 1
    return sorted(out)


def grid_katetov_maps(space, support, den_bound: int, max_value) -> list[KatetovMap]:
    """All grid-valued Katetov maps on the support, canonical order."""
    support = tuple(sorted(support))
    values = grid_values(den_bound, max_value)
    out = []
    for combo in itertools.product(values, repeat=len(support)):
        g = KatetovMap(space, combo, support)
        ok, _ = is_katetov(g)
        if ok:
            out.append(g)
    return out


# ---------------------------------------------------------------------------
# stage construction


def _capped_extension_distances(space, support, g_values, cap) -> list[Fraction]:
    """Distances of the realizing point: prescribed on the support, capped
    Katetov completion elsewhere (valid on spaces of diameter <= cap)."""
    sup = list(support)
    out = []
    for x in range(space.n):
        if x in sup:
            out.append(Fraction(g_values[sup.index(x)]))
        else:
            v = min(Fraction(g_values[i]) + space.d[x][y] for i, y in enumerate(sup))
            out.append(min(v, cap))
    return out


def paley_sphere(q: int) -> RationalMetricSpace:
    """The quadratic-residue two-distance sphere on q points (q prime,
    q = 1 mod 4): residue pairs at 1/2, the rest at 1.  Exactly realizes
    every grid pair demand for denominators <= 2 at diameter 1."""
    if q < 5 or q % 4 != 1:
        raise StructureError("need a prime q = 1 mod 4")
    qr = {(i * i) % q for i in range(1, q)}
    d = [[Fraction(0)] * q for _ in range(q)]
    for i in range(q):
        for j in range(q):
            if i != j:
                d[i][j] = Fraction(1, 2) if (i - j) % q in qr else Fraction(1)
    return RationalMetricSpace(q, d, bound=Fraction(1))


def build_rational_urysohn(
    levels: int,
    denominator_bound: int,
    diameter_bound,
    sphere: bool = False,
    multiplicity: int = 1,
    seed: RationalMetricSpace | None = None,
    support_bound: int = 2,
    saturate: bool = False,
    max_points: int = 400,
) -> list[RationalMetricSpace]:
    """Chained stages realizing every grid Katetov map over small supports.

    Chain mode: stage t+1 realizes the demands of stage t's supports.
    With `saturate`, the final stage also serves the demands its own new
    points create, until exact pair closure (or the point budget).  New
    points take the capped completion off their support, which keeps the
    whole matrix metric.
    """
    if denominator_bound < 1:
        raise StructureError("denominator bound must be >= 1")
    if support_bound > 2:
        raise StructureError("builder closes supports of size <= 2 only")
    cap = Fraction(1) if sphere else Fraction(diameter_bound)
    if seed is None:
        seed = RationalMetricSpace(1, [[0]], bound=cap)
    if seed.bound != cap:
        seed = RationalMetricSpace(seed.n, seed.d, bound=cap)
    values = grid_values(denominator_bound, cap)
    stages = [seed]

    for level in range(levels):
        m = [row[:] for row in stages[-1].d]
        n = len(m)
        frontier = n

        def count_singles(x, v):
            return sum(1 for z in range(n) if z != x and m[z][x] == v)

        def count_pairs(x, y, v1, v2):
            return sum(
                1 for z in range(n) if z != x and z != y and m[z][x] == v1 and m[z][y] == v2
            )

        def add_point(support, combo):
            nonlocal n
            if n >= max_points:
                raise StructureError(
                    f"stage would exceed {max_points} points before closing"
                )
            dist = []
            for x in range(n):
                if x in support:
                    dist.append(Fraction(combo[support.index(x)]))
                else:
                    v = min(
                        Fraction(combo[i]) + m[x][s] for i, s in enumerate(support)
                    )
                    dist.append(min(v, cap))
            for x in range(n):
                m[x].append(dist[x])
            m.append(dist + [Fraction(0)])
            n += 1

        def sweep(limit) -> int:
            added = 0
            if support_bound >= 1:
                for x in range(limit):
                    for v in values:
                        need = multiplicity - count_singles(x, v)
                        for _ in range(max(0, need)):
                            add_point((x,), (v,))
                            added += 1
            if support_bound >= 2:
                for x in range(limit):
                    for y in range(x + 1, limit):
                        dxy = m[x][y]
                        for v1 in values:
                            for v2 in values:
                                if abs(v1 - v2) > dxy or dxy > v1 + v2:
                                    continue
                                need = multiplicity - count_pairs(x, y, v1, v2)
                                for _ in range(max(0, need)):
                                    add_point((x, y), (v1, v2))
                                    added += 1
            return added

        sweep(frontier)
        if saturate and level == levels - 1:
            while sweep(n) > 0:
                pass
        stages.append(RationalMetricSpace(n, m, bound=cap))
    return stages


def check_approx_extension(
    space: RationalMetricSpace,
    epsilon,
    support_bound: int,
    den_bound: int = 2,
    max_value=None,
):
    """Exhaustive: every grid Katetov map on supports up to the bound is
    realized within epsilon by some point of the space."""
    epsilon = Fraction(epsilon)
    if max_value is None:
        max_value = space.diameter()
    for size in range(1, support_bound + 1):
        for support in itertools.combinations(range(space.n), size):
            for g in grid_katetov_maps(space, support, den_bound, max_value):
                realized = any(
                    all(
                        abs(space.d[z][s] - g.value_at(s)) <= epsilon
                        for s in support
                    )
                    for z in range(space.n)
                    if z not in support
                )
                if not realized:
                    return False, {"support": support, "values": g.values}
    return True, None


# ---------------------------------------------------------------------------
# carved subsets and their absorption report


def carve_absorbing_subspace(
    space: RationalMetricSpace,
    deletions,
    den_bound: int = 2,
    support_bound: int = 2,
):
    """Remove shrunken balls; report which guarded demands the remainder
    still absorbs.

    deletions: iterable of (center, radius, shrink) with rational radius
    and shrink in [0, 1); a point x survives when
    d(x, center) >= radius * (1 - shrink) for every deletion.
    """
    rules = [(int(c), Fraction(r), Fraction(s)) for c, r, s in deletions]
    for c, r, s in rules:
        if c < 0 or c >= space.n:
            raise StructureError(f"center {c} not in the space")
        if not (0 <= s < 1):
            raise StructureError("shrink factor must be in [0, 1)")
    F = [
        x
        for x in range(space.n)
        if all(space.d[x][c] >= r * (1 - s) for c, r, s in rules)
    ]
    report = {
        "F": F,
        "empty": not F,
        "checked": 0,
        "absorbed": 0,
        "failures": [],
    }
    if not F:
        return F, report
    max_value = space.diameter() + 1
    fset = set(F)
    for size in range(1, support_bound + 1):
        for support in itertools.combinations(range(space.n), size):
            for g in grid_katetov_maps(space, support, den_bound, max_value):
                # the absorption predicate is guarded: only demands
                # strictly above the distance to F count
                guard = all(
                    (space.distance_to(s, fset) or Fraction(0)) < g.value_at(s)
                    for s in support
                )
                if not guard:
                    continue
                report["checked"] += 1
                hit = any(
                    z in fset
                    and all(space.d[z][s] == g.value_at(s) for s in support)
                    for z in range(space.n)
                    if z not in support
                )
                if hit:
                    report["absorbed"] += 1
                elif len(report["failures"]) < 32:
                    report["failures"].append(
                        {"support": support, "values": [str(v) for v in g.values]}
                    )
    return F, report


# ---------------------------------------------------------------------------
# the metric strategy round


@dataclass
class MetricGameState:
    space: RationalMetricSpace
    A: frozenset
    B: frozenset
    c_star: int
    d_star: Fraction
    epsilon: Fraction
    cells: list[list[int]]
    replies: list[tuple[dict, Fraction]] = field(default_factory=list)
    excluded_cells: list[int] = field(default_factory=list)
    round_index: int = 0


def _cells_of(space, points, epsilon) -> list[list[int]]:
    """Greedy grouping with diameter < epsilon/2 (radius <= epsilon/4)."""
    cells: list[list[int]] = []
    for p in sorted(points):
        for cell in cells:
            if space.d[p][cell[0]] <= epsilon / 4:
                cell.append(p)
                break
        else:
            cells.append([p])
    return cells


def new_metric_game(
    space: RationalMetricSpace,
    A,
    B=None,
    c_star: int | None = None,
    d_star=None,
    epsilon=None,
) -> MetricGameState:
    A = frozenset(A)
    B = frozenset(B) if B is not None else A
    complement = sorted(set(range(space.n)) - A)
    if not complement:
        raise StructureError("A must have a complement to host c*")
    if c_star is None:
        c_star = complement[0]
    if c_star in A:
        raise StructureError("c* must avoid A")
    rho = min(space.d[c_star][a] for a in A)
    d_star = Fraction(d_star) if d_star is not None else rho / 2
    epsilon = Fraction(epsilon) if epsilon is not None else d_star / 2
    if not (0 < epsilon < d_star < rho):
        raise StructureError("need 0 < epsilon < d_star < distance(c*, A)")
    cells = _cells_of(space, set(range(space.n)) - B, epsilon)
    return MetricGameState(
        space=space,
        A=A,
        B=B,
        c_star=c_star,
        d_star=d_star,
        epsilon=epsilon,
        cells=cells,
    )


def _is_partial_isometry(space, pairs) -> tuple[bool, tuple | None]:
    items = sorted(pairs.items())
    if len({b for _, b in items}) != len(items):
        return False, ("injectivity", None)
    for (a1, b1), (a2, b2) in itertools.combinations(items, 2):
        if space.d[a1][a2] != space.d[b1][b2]:
            return False, ((a1, a2), (b1, b2))
    return True, None


def metric_splitter_reply(state: MetricGameState, move_pairs: dict, delta) -> dict:
    """One metric round: target the least live cell, split the distances
    at c*, realize both prescriptions, shrink the radius, certify."""
    delta = Fraction(delta)
    if delta <= 0:
        raise MetricGameError("radius must be positive")
    move = {int(a): int(b) for a, b in move_pairs.items()}
    space = state.space
    prev = state.replies[-1][0] if state.replies else {}
    for a, b in prev.items():
        if move.get(a) != b:
            raise MetricGameError(f"move must keep the previous reply ({a}->{b})")
    for a, b in move.items():
        if a not in state.A or b not in state.B:
            raise MetricGameError(f"pair ({a},{b}) leaves the designated sides")
    ok, viol = _is_partial_isometry(space, move)
    if not ok:
        raise MetricGameError(f"move distorts distances: {viol}", violating=viol)
    if not move:
        # bootstrap: the split lemma needs at least one anchor
        a = sorted(state.A)[0]
        b = sorted(state.B)[0]
        move = {a: b}

    c = state.c_star
    target = None
    for idx, cell in enumerate(state.cells):
        if idx in state.excluded_cells:
            continue
        for y in cell:
            trial = dict(move)
            if y in trial.values():
                continue
            ok, _ = _is_partial_isometry(space, {**trial, c: y})
            if ok:
                target = (idx, y)
                break
        if target:
            break
    if target is None:
        raise MetricGameError("no live cell admits an isometric placement of c*")
    cell_idx, y_n = target

    anchors = sorted(move) + [c]
    sub_idx = {p: i for i, p in enumerate(anchors)}
    sub = RationalMetricSpace(
        len(anchors),
        [[space.d[p][q] for q in anchors] for p in anchors],
        bound=space.bound,
    )
    g1, g2 = split_pair(sub, sub_idx[c], state.d_star, state.epsilon)
    # lift above the distance from c* to A so realizations stay off A's
    # boundary, by a common shift (Katetov-ness is translation-safe upward)
    rho = min(space.d[c][a] for a in state.A)
    lift = max(Fraction(0), rho - g2.value_at(sub_idx[c]) + state.epsilon)
    vals1 = {anchors[i]: Fraction(v) + lift for i, v in enumerate(g1.values)}
    vals2 = {anchors[i]: Fraction(v) + lift for i, v in enumerate(g2.values)}

    def realize(side, demand: dict) -> int | None:
        for z in sorted(side):
            if z in demand or z in move or z in move.values():
                continue
            if all(space.d[z][p] == v for p, v in demand.items()):
                return z
        return None

    z_n = realize(state.A, vals1)
    image_demand = {move[a]: v for a, v in vals2.items() if a != c}
    image_demand[y_n] = vals2[c]
    z1_n = realize(state.B, image_demand)
    if z_n is None or z1_n is None:
        raise MetricGameError("absorption budget exhausted: no exact realization")

    reply = dict(move)
    reply[z_n] = z1_n
    n = state.round_index
    delta_prime = min(delta, state.epsilon / 2, Fraction(1, 2 ** n))

    certificate = _metric_certificate(state, reply, delta_prime, cell_idx)
    if not certificate["all_outside"]:
        raise AssertionError("metric exclusion certificate failed")

    state.replies.append((reply, delta_prime))
    state.excluded_cells.append(cell_idx)
    state.round_index += 1
    return {
        "reply": sorted(reply.items()),
        "delta_prime": str(delta_prime),
        "cell_excluded": cell_idx,
        "z": z_n,
        "z_image": z1_n,
        "certificate": certificate,
    }


def _metric_certificate(state, reply, delta_prime, cell_idx) -> dict:
    """Every stage extension of the reply within the radius that places
    c* lands outside the targeted cell."""
    space = state.space
    cell = set(state.cells[cell_idx])
    checked = 0
    all_outside = True
    offender = None
    dom = sorted(reply)
    for y in range(space.n):
        if y in reply.values():
            continue
        # candidate images within delta_prime of the reply pointwise
        pools = []
        for a in dom:
            pools.append(
                [
                    b
                    for b in range(space.n)
                    if space.d[b][reply[a]] < delta_prime or b == reply[a]
                ]
            )
        for images in itertools.product(*pools):
            H = dict(zip(dom, images))
            H[state.c_star] = y
            if len(set(H.values())) != len(H):
                continue
            ok, _ = _is_partial_isometry(space, H)
            if not ok:
                continue
            checked += 1
            if y in cell:
                all_outside = False
                offender = y
                break
        if not all_outside:
            break
    return {
        "cell": sorted(cell),
        "extensions_checked": checked,
        "all_outside": all_outside,
        "offender": offender,
    }
