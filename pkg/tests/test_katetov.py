"""Exact rational metric side: maps, split pairs, stages, carving, game."""

import random
from fractions import Fraction

import pytest

from fraisselab.katetov import (
    KatetovMap,
    MetricGameError,
    RationalMetricSpace,
    build_rational_urysohn,
    carve_absorbing_subspace,
    check_approx_extension,
    grid_katetov_maps,
    grid_values,
    is_katetov,
    katetov_extension,
    metric_splitter_reply,
    new_metric_game,
    paley_sphere,
    point_map,
    split_pair,
    sup_distance,
)
from fraisselab.structures import StructureError

F = Fraction


def space(rows, bound=None):
    return RationalMetricSpace(len(rows), rows, bound=bound)


TRIANGLE = space([[0, 2, 3], [2, 0, 1], [3, 1, 0]])


# ---------------------------------------------------------------------------
# spaces


def test_triangle_inequality_enforced():
    with pytest.raises(StructureError):
        space([[0, F(1, 2), F(1, 2)], [F(1, 2), 0, 2], [F(1, 2), 2, 0]])
    with pytest.raises(StructureError):
        space([[0, 1], [2, 0]])
    with pytest.raises(StructureError):
        space([[0, -1], [-1, 0]])


def test_boundary_triangle_accepted():
    assert TRIANGLE.diameter() == 3


# ---------------------------------------------------------------------------
# katetov maps


def test_point_maps_are_katetov():
    for x in range(TRIANGLE.n):
        ok, _ = is_katetov(point_map(TRIANGLE, x))
        assert ok


def test_boundary_katetov():
    two = space([[0, 2], [2, 0]])
    ok, _ = is_katetov(KatetovMap(two, (F(1), F(1))))
    assert ok  # 2 <= 1 + 1 exactly


def test_violating_pair_reported():
    two = space([[0, 2], [2, 0]])
    ok, pair = is_katetov(KatetovMap(two, (F(1), F(4))))
    assert not ok and pair == (0, 1)


def test_sup_distance_recovers_metric():
    for x in range(TRIANGLE.n):
        for y in range(TRIANGLE.n):
            if x == y:
                continue
            shared = tuple(sorted(set(range(TRIANGLE.n))))
            gx = KatetovMap(TRIANGLE, tuple(TRIANGLE.d[x][z] if z != x else F(0) for z in shared), shared)
            # replace the zero self-distance entries by restricting to others
            pts = tuple(z for z in range(TRIANGLE.n) if z not in (x, y))
            gx = KatetovMap(TRIANGLE, tuple(TRIANGLE.d[x][z] for z in pts) + (TRIANGLE.d[x][y],), pts + (y,))
            gy = KatetovMap(TRIANGLE, tuple(TRIANGLE.d[y][z] for z in pts) + (F(0),), pts + (y,))
            # sup over shared points including y itself attains d(x, y)
            vals = [abs(a - b) for a, b in zip(gx.values, gy.values)]
            assert max(vals) == TRIANGLE.d[x][y]


# ---------------------------------------------------------------------------
# extension


def test_extension_agrees_on_support():
    g = KatetovMap(TRIANGLE, (F(2), F(1)), (0, 1))
    ext = katetov_extension(g)
    assert ext.value_at(0) == 2 and ext.value_at(1) == 1
    ok, _ = is_katetov(ext)
    assert ok


def test_extension_single_support():
    two = space([[0, 2], [2, 0]])
    g = KatetovMap(two, (F(1),), (0,))
    ext = katetov_extension(g)
    assert ext.value_at(1) == 3  # g(y0) + d(x, y0) = 1 + 2


def test_extension_idempotent_on_support():
    g = KatetovMap(TRIANGLE, (F(3), F(2)), (0, 2))
    ext = katetov_extension(g)
    back = KatetovMap(TRIANGLE, (ext.value_at(0), ext.value_at(2)), (0, 2))
    assert back.values == g.values


def test_empty_support_rejected():
    with pytest.raises(StructureError):
        katetov_extension(KatetovMap(TRIANGLE, (), ()))


# ---------------------------------------------------------------------------
# split pairs


def test_split_pair_paper_values():
    two = space([[0, 1], [1, 0]])
    g1, g2 = split_pair(two, 1, d_star=1, epsilon=F(1, 2))
    assert g1.value_at(0) == 2 and g1.value_at(1) == 2
    assert g2.value_at(0) == 2 and g2.value_at(1) == F(5, 4)
    assert abs(g1.value_at(1) - g2.value_at(1)) > F(1, 2)


def test_split_pair_singleton_refused():
    one = space([[0]])
    with pytest.raises(StructureError):
        split_pair(one, 0, d_star=F(1, 2), epsilon=F(1, 4))


def test_split_pair_epsilon_bounds():
    two = space([[0, 1], [1, 0]])
    with pytest.raises(StructureError):
        split_pair(two, 1, d_star=F(1, 2), epsilon=F(1, 2))
    with pytest.raises(StructureError):
        split_pair(two, 1, d_star=2, epsilon=F(1, 2))


def random_space(rng, n, den=8, diam=4):
    values = grid_values(den, diam)
    rows = [[F(0)]]
    for _ in range(n - 1):
        k = len(rows)
        while True:
            cand = [rng.choice(values) for _ in range(k)]
            ok = all(
                abs(cand[i] - cand[j]) <= rows[i][j] <= cand[i] + cand[j]
                for i in range(k)
                for j in range(i + 1, k)
            )
            if ok:
                break
        for i in range(k):
            rows[i].append(cand[i])
        rows.append(cand + [F(0)])
    return RationalMetricSpace(len(rows), rows)


def test_split_pair_random_instances():
    rng = random.Random(20260810)
    for _ in range(150):
        sp = random_space(rng, rng.randint(2, 5))
        c = rng.randrange(sp.n)
        dmin = min(sp.d[c][x] for x in range(sp.n) if x != c)
        d_star = dmin
        epsilon = d_star * F(rng.randint(1, 7), 8)
        if not (0 < epsilon < d_star):
            continue
        g1, g2 = split_pair(sp, c, d_star, epsilon)
        for g in (g1, g2):
            ok, viol = is_katetov(g)
            assert ok, viol
        others = [x for x in range(sp.n) if x != c]
        assert all(g1.value_at(x) == g2.value_at(x) for x in others)
        assert g1.value_at(c) >= d_star and g2.value_at(c) >= d_star
        assert abs(g1.value_at(c) - g2.value_at(c)) > epsilon


def test_split_pair_sphere_capped_or_flagged():
    sphere = space([[0, F(1, 2)], [F(1, 2), 0]], bound=1)
    try:
        g1, g2 = split_pair(sphere, 1, d_star=F(1, 2), epsilon=F(1, 8))
    except StructureError:
        return  # flagged: the cap destroyed the gap
    for g in (g1, g2):
        assert max(g.values) <= 1
        ok, _ = is_katetov(g)
        assert ok
    assert abs(g1.value_at(1) - g2.value_at(1)) > F(1, 8)


# ---------------------------------------------------------------------------
# stages


def test_builder_distance_menu():
    stages = build_rational_urysohn(levels=1, denominator_bound=2, diameter_bound=2)
    top = stages[-1]
    assert {top.d[0][z] for z in range(1, top.n)} == {F(1, 2), F(1), F(3, 2), F(2)}


def test_builder_chain_closure():
    stages = build_rational_urysohn(levels=2, denominator_bound=2, diameter_bound=1, sphere=True)
    # every grid map over supports of the previous stage is realized next
    prev, top = stages[-2], stages[-1]
    for x in range(prev.n):
        for g in grid_katetov_maps(top, (x,), 2, 1):
            assert any(
                top.d[z][x] == g.value_at(x) for z in range(top.n) if z != x
            )


def test_sphere_flag_caps_distances():
    stages = build_rational_urysohn(levels=1, denominator_bound=2, diameter_bound=5, sphere=True)
    for s in stages:
        assert s.diameter() <= 1


def test_saturated_sphere_exact_pair_closure():
    stages = build_rational_urysohn(
        levels=1,
        denominator_bound=2,
        diameter_bound=1,
        sphere=True,
        seed=paley_sphere(13),
        saturate=True,
    )
    ok, failure = check_approx_extension(stages[-1], 0, 2, den_bound=2)
    assert ok, failure


def test_check_extension_one_point_space_fails():
    one = space([[0]])
    ok, failure = check_approx_extension(one, 0, 1, den_bound=1, max_value=1)
    assert not ok and failure["support"] == (0,)


def test_check_extension_vacuous_with_huge_epsilon():
    ok, _ = check_approx_extension(TRIANGLE, 10, 2, den_bound=1, max_value=2)
    assert ok


# ---------------------------------------------------------------------------
# carving


def test_carve_triangle_example():
    stages = build_rational_urysohn(
        levels=1, denominator_bound=1, diameter_bound=3, seed=TRIANGLE
    )
    sp = stages[-1]
    F_set, report = carve_absorbing_subspace(sp, [(0, F(1, 2), F(0))], den_bound=1)
    assert 0 not in F_set
    assert 1 in F_set and 2 in F_set
    assert not report["empty"]


def test_carve_without_deletions_is_whole_space():
    F_set, report = carve_absorbing_subspace(TRIANGLE, [], den_bound=1)
    assert F_set == [0, 1, 2]


def test_carve_everything_flagged_empty():
    F_set, report = carve_absorbing_subspace(
        TRIANGLE, [(0, 10, F(0))], den_bound=1
    )
    assert F_set == [] and report["empty"]


# ---------------------------------------------------------------------------
# the metric round


def game_stage():
    return build_rational_urysohn(levels=1, denominator_bound=2, diameter_bound=2)[-1]


def test_metric_round_certificate_and_radius():
    sp = game_stage()
    state = new_metric_game(sp, A={2, 3, 4}, d_star=F(3, 4), epsilon=F(1, 4))
    out = metric_splitter_reply(state, {2: 2}, F(1, 2))
    assert out["certificate"]["all_outside"]
    assert F(out["delta_prime"]) == min(F(1, 2), state.epsilon / 2, F(1))
    # radii are non-increasing and bounded by 2^-n
    out2 = None
    try:
        out2 = metric_splitter_reply(state, dict(state.replies[-1][0]), F(1, 2))
    except MetricGameError:
        pass  # later rounds may exhaust the finite stage honestly
    if out2 is not None:
        assert F(out2["delta_prime"]) <= F(out["delta_prime"])
        assert F(out2["delta_prime"]) <= F(1, 2)


def test_metric_move_distortion_rejected():
    sp = game_stage()
    state = new_metric_game(sp, A={0, 1, 2}, c_star=3, d_star=F(3, 4), epsilon=F(1, 4))
    with pytest.raises(MetricGameError) as err:
        metric_splitter_reply(state, {0: 0, 1: 2}, F(1, 2))
    assert err.value.violating is not None


def test_metric_move_must_keep_previous_reply():
    sp = game_stage()
    state = new_metric_game(sp, A={2, 3, 4}, d_star=F(3, 4), epsilon=F(1, 4))
    metric_splitter_reply(state, {2: 2}, F(1, 2))
    with pytest.raises(MetricGameError):
        metric_splitter_reply(state, {}, F(1, 4))
