"""Stage construction, closure verification, absorbing partitions."""

import pytest

from fraisselab.limits import (
    AbsorbingPartition,
    ConstructionError,
    LimitApprox,
    back_and_forth,
    build_absorbing_partition,
    build_limit_approx,
    demo_extension_stage,
    demo_game_stage,
    verify_absorbing,
    verify_extension_property,
)
from fraisselab.oracles import cliques_structure, get_oracle, graph_structure, order_structure
from fraisselab.structures import FinStructure, induced_substructure, is_embedding


def graphs_approx(m=2):
    o = get_oracle("graphs")
    return build_limit_approx(o, k=1, steps=2, multiplicity=m, seed=graph_structure(1, []))


# ---------------------------------------------------------------------------
# builder


def test_graphs_closure_realizes_both_types_twice():
    approx = graphs_approx()
    M1, M2 = approx.stages[1], approx.stages[2]
    # independent closure oracle: count neighbors and non-neighbors by hand
    for v in range(M1.n):
        neighbors = [z for z in range(M2.n) if z != v and M2.holds("R", (v, z))]
        non = [z for z in range(M2.n) if z != v and not M2.holds("R", (v, z))]
        assert len(neighbors) >= 2 and len(non) >= 2
    ok, _ = verify_extension_property(approx)
    assert ok


def test_k1_closure_adds_one_point_per_anchor_type():
    o = get_oracle("k1")
    approx = build_limit_approx(o, k=2, steps=1, multiplicity=1, seed=o.empty())
    # the empty seed has one anchor (the empty one) with one type
    assert [s.n for s in approx.stages] == [0, 1]


def test_linear_orders_closure():
    o = get_oracle("linear-orders")
    approx = build_limit_approx(o, k=1, steps=2, multiplicity=2, seed=order_structure(1))
    M1, M2 = approx.stages[1], approx.stages[2]
    for v in range(M1.n):
        below = [z for z in range(M2.n) if z != v and M2.holds("<", (z, v))]
        above = [z for z in range(M2.n) if z != v and M2.holds("<", (v, z))]
        assert len(below) >= 2 and len(above) >= 2


def test_builder_requires_sap():
    o = get_oracle("unary-marked")
    with pytest.raises(ConstructionError):
        build_limit_approx(o, k=1, steps=1, multiplicity=1, seed=o.empty())


def test_stage_chain_is_embedding_chain():
    approx = graphs_approx()
    assert approx.check_chain()


# ---------------------------------------------------------------------------
# independent closure verification


def test_verifier_detects_deleted_realization():
    approx = graphs_approx()
    top = approx.top
    # drop the last point: some closure count falls below multiplicity
    smaller, _ = induced_substructure(top, range(top.n - 1))
    broken = LimitApprox(
        oracle=approx.oracle,
        stages=[approx.stages[0], approx.stages[1], smaller],
        k=approx.k,
        multiplicity=approx.multiplicity,
    )
    ok, failure = verify_extension_property(broken)
    assert not ok
    assert failure["anchor"] is not None


def test_single_stage_vacuously_closed():
    o = get_oracle("graphs")
    approx = LimitApprox(oracle=o, stages=[graph_structure(3, [(0, 1)])], k=1, multiplicity=2)
    ok, _ = verify_extension_property(approx)
    assert ok


# ---------------------------------------------------------------------------
# absorbing partitions


def test_graphs_partition_passes_checker():
    approx = graphs_approx()
    part = build_absorbing_partition(approx)
    ok, _ = verify_absorbing(part)
    assert ok
    # every M_1 vertex keeps neighbors and non-neighbors on both sides
    M1, M2 = approx.stages[1], approx.top
    for v in range(M1.n):
        for side in (part.A, part.complement):
            assert any(z in side and M2.holds("R", (v, z)) for z in range(M2.n))
            assert any(
                z in side and z != v and not M2.holds("R", (v, z)) for z in range(M2.n)
            )


def test_k1_partition_balanced():
    o = get_oracle("k1")
    approx = build_limit_approx(o, k=1, steps=1, multiplicity=2, seed=FinStructure(o.signature, 2))
    part = build_absorbing_partition(approx)
    assert abs(len(part.A) - len(part.complement)) <= 1


def test_partition_symmetry():
    approx = graphs_approx()
    part = build_absorbing_partition(approx)
    ok, _ = verify_absorbing(part.swap())
    assert ok


def test_mutated_partition_detected():
    approx = graphs_approx()
    part = build_absorbing_partition(approx)
    # move every realization of some type to one side: take a neighbor
    # census point and steal its A-side neighbors
    M2 = approx.top
    v = 0
    grabbed = frozenset(part.A) - {z for z in range(M2.n) if M2.holds("R", (v, z))}
    mutated = AbsorbingPartition(approx, grabbed, part.level)
    ok, failure = verify_absorbing(mutated)
    assert not ok
    assert failure["anchor"] is not None and failure["missing_side"] in ("A", "Ac")


def test_multiplicity_one_refused():
    o = get_oracle("graphs")
    approx = build_limit_approx(o, k=1, steps=1, multiplicity=1, seed=graph_structure(1, []))
    with pytest.raises(ConstructionError):
        build_absorbing_partition(approx)


def test_block_partition_balances_cliques():
    approx = demo_extension_stage(blocks=3, size=4)
    blocks = approx.oracle.blocks(approx.top)
    part = build_absorbing_partition(approx, blocks=blocks)
    for blk in blocks:
        in_a = sum(1 for x in blk if x in part.A)
        assert in_a == 2  # 2 + 2 per clique


# ---------------------------------------------------------------------------
# back and forth


def test_back_and_forth_k1():
    o = get_oracle("k1")
    approx = build_limit_approx(o, k=1, steps=2, multiplicity=2, seed=FinStructure(o.signature, 8))
    part = build_absorbing_partition(approx)
    result = back_and_forth(part, 4)
    assert result.rounds_completed == 4
    assert len(result.map.pairs) == 4


def test_back_and_forth_graphs_prefix_embeddings():
    approx = graphs_approx()
    part = build_absorbing_partition(approx)
    result = back_and_forth(part, 3)
    assert result.rounds_completed == 3
    ok, _ = result.map.verify_embedding()
    assert ok
    assert set(result.map.pairs) <= part.A
    assert all(b < approx.previous.n for b in result.map.pairs.values())


def test_back_and_forth_zero_rounds():
    approx = graphs_approx()
    part = build_absorbing_partition(approx)
    assert back_and_forth(part, 0).map.pairs == {}


# ---------------------------------------------------------------------------
# curated stages


def test_demo_game_stage_coherent():
    approx = demo_game_stage(hubs=6, leaves=4, sea=8)
    ok, _ = verify_extension_property(approx)
    assert ok
    part = build_absorbing_partition(approx)
    ok, _ = verify_absorbing(part)
    assert ok


def test_demo_extension_stage_classes_balanced():
    approx = demo_extension_stage()
    assert approx.top == cliques_structure([4, 4, 4])
