"""Split witnesses, control certificates, equivalence classes, dichotomy."""

import itertools

import pytest

from fraisselab.oracles import (
    cliques_structure,
    get_oracle,
    graph_structure,
    order_structure,
)
from fraisselab.splitting import (
    ControlNotFound,
    control_counterexample,
    dichotomy_check,
    equivalence_classes,
    find_common_control,
    find_control,
    find_split_witness,
    verify_split_witness,
    witness_for,
)
from fraisselab.structures import FinStructure, find_embeddings, is_embedding


# ---------------------------------------------------------------------------
# split witnesses


def test_graphs_split_at_bound_3():
    o = get_oracle("graphs")
    C = graph_structure(1, [])
    verdict = find_split_witness(o, C, 3)
    assert verdict.splits
    assert verdict.pair_count == len(verdict.witnesses)
    for w in verdict.witnesses:
        assert verify_split_witness(w, o)
        # the violating tuple meets the C image: the toggle lives on c
        c_img = {w.j1.pairs[w.i.pairs[c]] for c in range(w.C.n)}
        name, t, _ = w.violating
        assert any(e in c_img for e in t)


def test_graph_witness_is_edge_toggle():
    # the canonical witness on a single-vertex host: second extension
    # differs exactly in the c-w edge
    o = get_oracle("graphs")
    C = graph_structure(1, [])
    D = graph_structure(1, [])
    i = find_embeddings(C, D)[0]
    w = witness_for(o, C, D, i)
    assert w is not None
    diff = w.D1.interp["R"] ^ w.D2.interp["R"]
    assert diff == {(0, 1), (1, 0)}


def test_linear_orders_split_one_point():
    o = get_oracle("linear-orders")
    C = order_structure(1)
    verdict = find_split_witness(o, C, 3)
    assert verdict.splits
    # host = C itself: the two extensions put w on opposite sides of c
    w = verdict.witnesses[0]
    assert w.D.n == 1
    assert w.D1.holds("<", (0, 1)) != w.D2.holds("<", (0, 1))


def test_k2_blocked_for_all_small_C():
    o = get_oracle("k2")
    for C in [graph_structure(1, []), cliques_structure([2]), cliques_structure([1, 1]), cliques_structure([3])]:
        verdict = find_split_witness(o, C, 4)
        assert verdict.kind == "blocked", C
        D, i = verdict.blocked_at
        assert witness_for(o, C, D, i) is None


def test_k1_blocked():
    o = get_oracle("k1")
    C = FinStructure(o.signature, 1)
    assert find_split_witness(o, C, 3).kind == "blocked"


def test_rational_metric_splits():
    o = get_oracle("rational-metric")
    from fraisselab.oracles import metric_structure

    C = metric_structure([[0]], o.signature)
    verdict = find_split_witness(o, C, 3)
    assert verdict.splits
    for w in verdict.witnesses[:10]:
        assert verify_split_witness(w, o)


def test_tampered_witness_rejected():
    o = get_oracle("graphs")
    C = graph_structure(1, [])
    verdict = find_split_witness(o, C, 2)
    w = verdict.witnesses[0]
    # make f an actual isomorphism: both sides equal
    import dataclasses

    same = dataclasses.replace(w, D2=w.D1)
    assert not verify_split_witness(same, o)
    # D1 outside the class
    bad = FinStructure(o.signature, w.D1.n, {"R": [(0, 0)]})
    assert not verify_split_witness(dataclasses.replace(w, D1=bad), o)


# ---------------------------------------------------------------------------
# control certificates


def test_k1_empty_controller():
    o = get_oracle("k1")
    stage = FinStructure(o.signature, 5)
    cert = find_control(stage, 2, o, k_bound=0)
    assert cert is not None and cert.K == ()
    assert cert.verify()


def test_k2_same_clique_controller():
    o = get_oracle("k2")
    stage = cliques_structure([3, 3])
    cert = find_control(stage, 0, o)
    assert cert is not None
    # a same-clique companion controls; the empty set does not
    assert cert.K and cert.K[0] in (1, 2)
    assert control_counterexample(stage, 0, (), 3) is not None


def test_graphs_stage_has_no_controls():
    # needs a stage of minimum degree > k_bound, else K can swallow a
    # whole neighborhood and control vacuously at stage scale
    o = get_oracle("graphs")
    from fraisselab.limits import build_limit_approx

    approx = build_limit_approx(o, k=1, steps=2, multiplicity=4, seed=graph_structure(1, []))
    stage = approx.top
    for c in range(3):
        assert find_control(stage, c, o, k_bound=3, f_bound=4) is None


def test_certificate_stability_under_superset():
    # if (c, K) certifies then so does (c, K + {x})
    o = get_oracle("k2")
    stage = cliques_structure([3, 3])
    cert = find_control(stage, 0, o)
    for x in range(stage.n):
        if x == 0 or x in cert.K:
            continue
        bigger = tuple(sorted(set(cert.K) | {x}))
        assert control_counterexample(stage, 0, bigger, cert.verified_bound) is None


def test_certificate_automorphism_invariance():
    o = get_oracle("k2")
    stage = cliques_structure([3, 3])
    cert = find_control(stage, 0, o)
    for sigma in (e.pairs for e in find_embeddings(stage, stage)):
        sK = tuple(sorted(sigma[x] for x in cert.K))
        sc = sigma[0]
        assert control_counterexample(stage, sc, sK, cert.verified_bound) is None


# ---------------------------------------------------------------------------
# equivalence classes


def test_k1_single_class():
    o = get_oracle("k1")
    stage = FinStructure(o.signature, 4)
    cd = equivalence_classes(stage, o)
    assert cd.partition == [[0, 1, 2, 3]]


def test_k2_classes_are_cliques():
    o = get_oracle("k2")
    stage = cliques_structure([4, 4, 4])
    cd = equivalence_classes(stage, o)
    assert cd.partition == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11]]


def test_rs_classes_are_blocks():
    o = get_oracle("rs-example")
    # blocks of size >= 2 with pairwise distinct block rows
    interp = {"S": set(), "R": set()}
    blocks = [[0, 1], [2, 3], [4, 5]]
    for blk in blocks:
        for a in blk:
            for b in blk:
                interp["S"].add((a, b))
    # block graph: 0-1 edge only
    for a in blocks[0]:
        for b in blocks[1]:
            interp["R"].update({(a, b), (b, a)})
    stage = FinStructure(o.signature, 6, interp)
    assert o.member(stage)
    cd = equivalence_classes(stage, o)
    assert cd.partition == blocks


def test_classes_fail_on_splitting_stage():
    o = get_oracle("graphs")
    from fraisselab.limits import build_limit_approx

    approx = build_limit_approx(o, k=1, steps=2, multiplicity=2, seed=graph_structure(1, []))
    with pytest.raises(ControlNotFound):
        equivalence_classes(approx.top, o, k_bound=1, f_bound=3)


def test_common_controller_for_clique_mates():
    o = get_oracle("k2")
    stage = cliques_structure([3, 3])
    common = find_common_control(stage, (0, 1), o)
    assert common is not None
    assert all(x not in (0, 1) for x in common)


# ---------------------------------------------------------------------------
# the dichotomy driver


@pytest.mark.parametrize(
    "key,bound,expected",
    [
        ("graphs", 3, "splits-up-to-bound"),
        ("linear-orders", 3, "splits-up-to-bound"),
        ("k1", 3, "does-not-split-up-to-bound"),
        # two-point structures split k2 and rs-example up to bound 3 (the
        # blocking host needs 4 points), so the control side needs bound 4
        ("k2", 4, "does-not-split-up-to-bound"),
        ("rs-example", 4, "does-not-split-up-to-bound"),
    ],
)
def test_dichotomy(key, bound, expected):
    verdict = dichotomy_check(get_oracle(key), bound=bound)
    assert verdict.kind == expected
    if expected == "does-not-split-up-to-bound":
        assert verdict.certificates
        for cert in verdict.certificates.values():
            assert cert.verify()


def test_dichotomy_exactly_one_side():
    # never both, never neither, for the built-ins at bound 4
    for key in ["graphs", "linear-orders", "k1", "k2", "rs-example"]:
        v = dichotomy_check(get_oracle(key), bound=4)
        assert v.kind in ("splits-up-to-bound", "does-not-split-up-to-bound")
        if v.kind == "splits-up-to-bound":
            assert v.certificates is None
        else:
            assert all(not b.splits for b in v.blocked)


# ---------------------------------------------------------------------------
# the permutation criterion behind the extension algorithm


def test_type_preserving_injections_are_embeddings():
    # on a small non-splitting stage: any injection that is an embedding
    # on F and preserves each controlled point's type over the common
    # controller is itself an embedding
    o = get_oracle("k2")
    stage = cliques_structure([3, 3, 2])
    K = (1, 4)  # controls 0 (clique mate 1) and 3 (clique mate 4)
    for c in (0, 3):
        assert control_counterexample(stage, c, K, 4) is None
    controlled = [0, 3]
    for F_extra in itertools.combinations([x for x in range(stage.n) if x not in controlled], 2):
        F = tuple(sorted(set(K) | set(F_extra)))
        if any(c in F for c in controlled):
            continue
        base = {x: x for x in F}
        for images in itertools.permutations(range(stage.n), len(controlled)):
            f = dict(base)
            ok_types = True
            for c, y in zip(controlled, images):
                if y in f.values():
                    ok_types = False
                    break
                f[c] = y
                # same type over K: K is fixed pointwise here
                if not is_embedding(stage, stage, {**{k: k for k in K}, c: y}):
                    ok_types = False
                    break
            if not ok_types:
                continue
            if not is_embedding(stage, stage, base):
                continue
            assert is_embedding(stage, stage, f), f
