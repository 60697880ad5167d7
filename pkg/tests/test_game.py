"""The strategy engine, exclusion certificates, and the extension branch."""

import itertools

import pytest

from fraisselab.game import (
    CandidateList,
    GameError,
    check_exclusion,
    extend_partial_isomorphism,
    new_game,
    run_auto_game,
    splitter_reply,
)
from fraisselab.limits import build_absorbing_partition, demo_extension_stage, demo_game_stage
from fraisselab.oracles import cliques_structure, get_oracle, graph_structure
from fraisselab.serialize import transcript_from_dict, transcript_to_dict
from fraisselab.splitting import equivalence_classes
from fraisselab.structures import extends_to_automorphism, is_embedding


SMALL = demo_game_stage(hubs=8, leaves=4, sea=10)
PART = build_absorbing_partition(SMALL)
VERTEX = graph_structure(1, [])


def small_game(**kw):
    return new_game(PART, VERTEX, **kw)


# ---------------------------------------------------------------------------
# setup


def test_c_star_is_least_complement_point():
    state = small_game()
    assert state.c_star == (min(set(range(SMALL.top.n)) - PART.A),)


def test_non_splitting_oracle_refused():
    approx = demo_extension_stage()
    part = build_absorbing_partition(approx, blocks=approx.oracle.blocks(approx.top))
    with pytest.raises(Exception):
        new_game(part, graph_structure(1, []))


def test_candidate_list_matches_brute_force():
    # 10-point stage, cap 3: lazy enumeration equals the direct one
    approx = demo_game_stage(hubs=2, leaves=2, sea=2)
    part = build_absorbing_partition(approx)
    stage = approx.top
    state = new_game(part, VERTEX, cap=3)
    got = state.g_list.materialize()

    A, B = state.A, state.B
    base = set(state.c_star)
    rest = [x for x in range(stage.n) if x not in base]
    expected = []
    for extra in range(0, 3 - len(base) + 1):
        for S in itertools.combinations(rest, extra):
            dom = tuple(sorted(base | set(S)))
            for images in itertools.permutations(range(stage.n), len(dom)):
                pairs = dict(zip(dom, images))
                if any((x in A) != (y in B) for x, y in pairs.items()):
                    continue
                if not is_embedding(stage, stage, pairs):
                    continue
                if extends_to_automorphism(stage, pairs) is None:
                    continue
                expected.append(pairs)
    assert got == expected


# ---------------------------------------------------------------------------
# moves and replies


def test_illegal_move_not_an_embedding():
    state = small_game()
    hub, leaf = 0, 8  # adjacent pair in the broom stage
    sea1, sea2 = sorted(state.A)[-2:]
    with pytest.raises(GameError) as err:
        splitter_reply(state, {hub: sea1, leaf: sea2})
    assert err.value.violating is not None


def test_move_outside_sides_rejected():
    state = small_game()
    outside = min(set(range(SMALL.top.n)) - state.A)
    with pytest.raises(GameError):
        splitter_reply(state, {outside: sorted(state.A)[0]})


def test_move_must_extend_last_reply():
    state = small_game()
    splitter_reply(state, {})
    with pytest.raises(GameError):
        splitter_reply(state, {})  # lost the previous reply


def test_reply_extends_move_and_certificate_holds():
    state = small_game()
    round_ = splitter_reply(state, {})
    assert round_.certificate["all_incompatible"]
    assert round_.k_n == 0
    assert set(round_.reply) >= set(round_.move)
    assert is_embedding(state.stage, state.stage, round_.reply)


def test_excluded_indices_strictly_increase():
    state = small_game()
    for _ in range(4):
        splitter_reply(state, dict(state.last_reply))
    ex = state.excluded
    assert ex == sorted(ex) and len(set(ex)) == len(ex)


# ---------------------------------------------------------------------------
# auto games


@pytest.mark.parametrize("policy", ["minimal-legal", "random", "adversarial-toward-g0"])
def test_auto_game_verifies(policy):
    state = small_game()
    tr = run_auto_game(state, 3, policy, seed=5)
    assert len(tr.rounds) == 3 and not tr.aborted
    ok, msg = check_exclusion(tr)
    assert ok, msg


def test_zero_rounds_empty_transcript():
    state = small_game()
    tr = run_auto_game(state, 0)
    assert tr.rounds == []
    assert check_exclusion(tr)[0]


def test_different_seeds_both_verify():
    t1 = run_auto_game(small_game(), 3, "random", seed=1)
    t2 = run_auto_game(small_game(), 3, "random", seed=2)
    assert check_exclusion(t1)[0] and check_exclusion(t2)[0]


def test_transcripts_reproducible_byte_for_byte():
    t1 = run_auto_game(small_game(), 3, "random", seed=9)
    t2 = run_auto_game(small_game(), 3, "random", seed=9)
    assert transcript_to_dict(t1) == transcript_to_dict(t2)


def test_tampered_transcript_detected():
    tr = run_auto_game(small_game(), 2, "minimal-legal")
    data = transcript_to_dict(tr)
    # swap one pair inside the round-1 reply
    reply = data["rounds"][1]["reply"]
    a, b = reply[0]
    free = [y for y in range(SMALL.top.n) if all(y != p[1] for p in reply)]
    reply[0] = [a, free[0]]
    bad = transcript_from_dict(data)
    ok, msg = check_exclusion(bad)
    assert not ok and "round" in msg


def test_strategy_soundness_final_map():
    # the union of replies admits no stage extension defined on C* that is
    # compatible with any excluded candidate
    state = small_game()
    tr = run_auto_game(state, 3, "minimal-legal")
    stage, h = state.stage, tr.final_map()
    cstar = tr.c_star[0]
    for k in tr.excluded_indices():
        g_k = state.g_list.get(k)
        for y in range(stage.n):
            H = dict(h)
            if y in H.values():
                continue
            H[cstar] = y
            if not is_embedding(stage, stage, H):
                continue
            merged = dict(H)
            conflict = False
            for a, b in g_k.items():
                if merged.get(a, b) != b:
                    conflict = True
                    break
                merged[a] = b
            if conflict or len(set(merged.values())) != len(merged):
                continue
            assert not is_embedding(stage, stage, merged)


# ---------------------------------------------------------------------------
# the extension branch


def ext_setup():
    approx = demo_extension_stage()
    blocks = approx.oracle.blocks(approx.top)
    part = build_absorbing_partition(approx, blocks=blocks)
    cd = equivalence_classes(approx.top, approx.oracle)
    return approx, part, cd


def test_identity_extends_to_identity():
    approx, part, cd = ext_setup()
    g = {x: x for x in sorted(part.A)[:4]}
    res = extend_partial_isomorphism(part, None, g, cd)
    assert res.is_automorphism
    assert res.total_map == {x: x for x in range(approx.top.n)}


def test_swapping_clique_reps_swaps_blocks():
    approx, part, cd = ext_setup()
    a0 = next(x for x in cd.partition[0] if x in part.A)
    a1 = next(x for x in cd.partition[1] if x in part.A)
    res = extend_partial_isomorphism(part, None, {a0: a1, a1: a0}, cd)
    assert res.is_automorphism
    cm = res.class_map
    assert cm[0] == 1 and cm[1] == 0 and cm[2] == 2
    for x in cd.partition[0]:
        assert res.total_map[x] in cd.partition[1]


def test_k1_any_block_bijection():
    o = get_oracle("k1")
    from fraisselab.limits import LimitApprox
    from fraisselab.structures import FinStructure

    stage = FinStructure(o.signature, 6)
    approx = LimitApprox(oracle=o, stages=[stage], k=1, multiplicity=2)
    part = build_absorbing_partition(approx, blocks=[list(range(6))])
    cd = equivalence_classes(stage, o)
    res = extend_partial_isomorphism(part, None, {0: 2}, cd)
    assert res.is_automorphism


def test_extension_rejects_non_iso_seed():
    approx, part, cd = ext_setup()
    a0 = next(x for x in cd.partition[0] if x in part.A)
    b0 = next(x for x in cd.partition[0] if x in part.A and x != a0)
    a1 = next(x for x in cd.partition[1] if x in part.A)
    # a0, b0 are clique mates; their images are not: not a partial iso
    with pytest.raises(Exception):
        extend_partial_isomorphism(part, None, {a0: a0, b0: a1}, cd)


def test_extension_cardinality_mismatch():
    from fraisselab.limits import LimitApprox

    o = get_oracle("k2")
    stage = cliques_structure([4, 4, 4])
    approx = LimitApprox(oracle=o, stages=[stage], k=1, multiplicity=2)
    # unbalanced partition: A takes 3 points of clique 0, 1 of clique 1
    A = frozenset({0, 1, 2, 4, 8, 9})
    from fraisselab.limits import AbsorbingPartition

    part = AbsorbingPartition(approx, A, 1)
    cd = equivalence_classes(stage, o)
    a0 = 0
    a1 = 4
    with pytest.raises(Exception):
        extend_partial_isomorphism(part, None, {a0: a1}, cd)


def test_random_partial_isos_all_extend():
    import random

    approx, part, cd = ext_setup()
    stage = approx.top
    A = sorted(part.A)
    rng = random.Random(3)
    for _ in range(20):
        while True:
            size = rng.randint(0, 4)
            src = rng.sample(A, size)
            dst = rng.sample(A, size)
            g = dict(zip(src, dst))
            if is_embedding(stage, stage, g):
                break
        res = extend_partial_isomorphism(part, None, g, cd)
        assert res.is_automorphism
        for a, b in g.items():
            assert res.total_map[a] == b
