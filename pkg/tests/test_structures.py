"""Core structure machinery, checked against brute-force oracles."""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from fraisselab.structures import (
    FinStructure,
    PartialMap,
    Signature,
    StructureError,
    canonical_form,
    enumerate_rqf_types,
    extends_to_automorphism,
    find_embeddings,
    find_isomorphism,
    induced_substructure,
)

GRAPH_SIG = Signature.make(("R", 2))
ORDER_SIG = Signature.make(("<", 2))


def graph(n, edges):
    pairs = []
    for a, b in edges:
        pairs.append((a, b))
        pairs.append((b, a))
    return FinStructure(GRAPH_SIG, n, {"R": pairs})


def linear_order(n):
    return FinStructure(ORDER_SIG, n, {"<": [(i, j) for i in range(n) for j in range(n) if i < j]})


def brute_restrict(S, subset):
    """Independent restriction oracle: relabel + relation filter by hand."""
    subset = sorted(subset)
    pos = {x: i for i, x in enumerate(subset)}
    interp = {}
    for name, tuples in S.interp.items():
        interp[name] = [
            tuple(pos[e] for e in t) for t in tuples if all(e in pos for e in t)
        ]
    return FinStructure(S.signature, len(subset), interp)


def brute_embeddings(A, B):
    """Exhaustive injection enumeration oracle."""
    out = []
    for images in itertools.permutations(range(B.n), A.n):
        mapping = dict(enumerate(images))
        good = True
        for name, arity in A.signature.symbols:
            for t in itertools.product(range(A.n), repeat=arity):
                if A.holds(name, t) != B.holds(name, tuple(mapping[e] for e in t)):
                    good = False
                    break
            if not good:
                break
        if good:
            out.append(mapping)
    return out


def brute_isomorphic(A, B):
    return A.n == B.n and bool(brute_embeddings(A, B))


# ---------------------------------------------------------------------------
# induced substructures


def test_induced_path_endpoints_no_edge():
    path = graph(3, [(0, 1), (1, 2)])
    sub, relabel = induced_substructure(path, {0, 2})
    assert sub == graph(2, [])
    assert relabel == {0: 0, 2: 1}


def test_induced_full_domain_is_identity():
    path = graph(3, [(0, 1), (1, 2)])
    sub, relabel = induced_substructure(path, range(3))
    assert sub == path
    assert relabel == {0: 0, 1: 1, 2: 2}


def test_induced_linear_order_keeps_direction():
    # frozen from the brute-force restriction oracle
    order = linear_order(3)
    sub, _ = induced_substructure(order, {0, 2})
    assert sub == brute_restrict(order, [0, 2])
    assert sub.holds("<", (0, 1))
    assert not sub.holds("<", (1, 0))


def test_induced_out_of_range_rejected():
    with pytest.raises(StructureError):
        induced_substructure(graph(2, []), {0, 5})


def test_induced_composes():
    S = graph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
    mid, rel1 = induced_substructure(S, {0, 1, 2, 4})
    small, rel2 = induced_substructure(mid, {rel1[0], rel1[2], rel1[4]})
    direct, _ = induced_substructure(S, {0, 2, 4})
    assert small == direct


# ---------------------------------------------------------------------------
# embeddings


def test_edge_into_triangle_six_embeddings():
    edge = graph(2, [(0, 1)])
    k3 = graph(3, [(0, 1), (1, 2), (0, 2)])
    embs = find_embeddings(edge, k3)
    assert len(embs) == 6
    assert [e.pairs for e in embs] == brute_embeddings(edge, k3)


def test_vertex_into_any_graph():
    v = graph(1, [])
    host = graph(4, [(0, 1), (2, 3)])
    assert len(find_embeddings(v, host)) == 4


def test_edge_into_edgeless_graph_empty():
    edge = graph(2, [(0, 1)])
    host = graph(2, [])
    assert find_embeddings(edge, host) == []


def test_embeddings_signature_mismatch():
    with pytest.raises(StructureError):
        find_embeddings(graph(1, []), linear_order(2))


def test_embeddings_lexicographic_and_limit():
    v = graph(1, [])
    host = graph(3, [])
    embs = find_embeddings(v, host)
    assert [e.pairs[0] for e in embs] == [0, 1, 2]
    assert len(find_embeddings(v, host, limit=2)) == 2


def test_embedding_composition_closure():
    A = graph(2, [(0, 1)])
    B = graph(3, [(0, 1), (1, 2)])
    C = graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    ab = find_embeddings(A, B)
    bc = find_embeddings(B, C)
    ac_pairs = {tuple(sorted(e.pairs.items())) for e in find_embeddings(A, C)}
    for f in ab:
        for g in bc:
            comp = g.compose(f)
            assert tuple(sorted(comp.pairs.items())) in ac_pairs


# ---------------------------------------------------------------------------
# partial maps


def test_partial_map_injectivity_enforced():
    g = graph(3, [(0, 1)])
    with pytest.raises(StructureError):
        PartialMap(g, g, {0: 2, 1: 2})


def test_partial_map_embedding_claim_checked():
    g = graph(3, [(0, 1)])
    with pytest.raises(StructureError):
        PartialMap(g, g, {0: 0, 1: 2}, kind="embedding")
    ok = PartialMap(g, g, {0: 1, 1: 0}, kind="embedding")
    assert ok.verify_embedding() == (True, None)


def test_partial_map_union_conflicts():
    g = graph(4, [])
    a = PartialMap(g, g, {0: 0})
    b = PartialMap(g, g, {0: 1})
    assert a.union(b) is None
    c = PartialMap(g, g, {1: 1})
    assert a.union(c).pairs == {0: 0, 1: 1}


# ---------------------------------------------------------------------------
# canonical forms


def test_canonical_form_identifies_isomorphic_paths():
    p1 = graph(3, [(0, 1), (1, 2)])
    p2 = graph(3, [(0, 2), (2, 1)])
    c1, m1 = canonical_form(p1)
    c2, m2 = canonical_form(p2)
    assert c1 == c2
    # relabeling is an isomorphism onto the canonical structure
    assert c1 == p1.relabel(m1)


def test_canonical_form_idempotent():
    g = graph(4, [(0, 1), (1, 2), (2, 3)])
    c1, _ = canonical_form(g)
    c2, _ = canonical_form(c1)
    assert c1 == c2


def test_canonical_form_separates_one_point_graph_extensions():
    # all 4 one-point extensions of an edge: new point adjacent to
    # {}, {0}, {1}, {0,1}; 4 distinct extension patterns with anchors
    # fixed, 3 canonical classes once anchors are forgotten.
    edge = graph(2, [(0, 1)])
    exts = []
    for adj in [[], [0], [1], [0, 1]]:
        exts.append(graph(3, [(0, 1)] + [(a, 2) for a in adj]))
    keyed = {e._interp_key() for e in exts}
    assert len(keyed) == 4
    canon = {canonical_form(e)[0] for e in exts}
    assert len(canon) == 3


def random_structure(draw, n, sig):
    interp = {}
    for name, arity in sig.symbols:
        universe = list(itertools.product(range(n), repeat=arity))
        interp[name] = draw(st.sets(st.sampled_from(universe))) if universe else set()
    return FinStructure(sig, n, interp)


TWO_BINARY = Signature.make(("R", 2), ("S", 2))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_canonical_form_respects_isomorphism(data):
    n = data.draw(st.integers(min_value=1, max_value=4))
    A = random_structure(data.draw, n, TWO_BINARY)
    perm = data.draw(st.permutations(range(n)))
    B = A.relabel(dict(enumerate(perm)))
    cA, _ = canonical_form(A)
    cB, _ = canonical_form(B)
    assert cA == cB


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_canonical_form_separates_non_isomorphic(data):
    n = data.draw(st.integers(min_value=1, max_value=4))
    A = random_structure(data.draw, n, TWO_BINARY)
    B = random_structure(data.draw, n, TWO_BINARY)
    cA, _ = canonical_form(A)
    cB, _ = canonical_form(B)
    assert (cA == cB) == brute_isomorphic(A, B)


def test_find_isomorphism_matches_brute_force():
    A = graph(4, [(0, 1), (1, 2), (2, 3)])
    B = graph(4, [(3, 2), (2, 0), (0, 1)])
    iso = find_isomorphism(A, B)
    assert iso is not None
    assert iso in brute_embeddings(A, B)


def test_extends_to_automorphism():
    square = graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    full = extends_to_automorphism(square, {0: 1})
    assert full is not None
    assert full[0] == 1
    # 0 and 1 are adjacent: no automorphism can fix 0 and send 1 to the
    # opposite corner
    assert extends_to_automorphism(square, {0: 0, 1: 2}) is None


# ---------------------------------------------------------------------------
# rqf types (the oracle used here is minimal: membership + generic extension)


class GraphsOracleLite:
    """Test-local graph class oracle: symmetric irreflexive edges."""

    signature = GRAPH_SIG

    def member(self, S):
        for (a, b) in S.interp["R"]:
            if a == b or (b, a) not in S.interp["R"]:
                return False
        return True

    def one_point_extensions(self, S):
        out = []
        star = S.n
        for adj in itertools.chain.from_iterable(
            itertools.combinations(range(S.n), k) for k in range(S.n + 1)
        ):
            ts = set()
            for a in adj:
                ts.add((a, star))
                ts.add((star, a))
            out.append(S.with_point({"R": ts}))
        return out


def test_rqf_types_over_adjacent_pair():
    host = graph(3, [(0, 1), (1, 2)])
    types = enumerate_rqf_types(host, (0, 1), GraphsOracleLite())
    assert len(types) == 4
    # each type's extension restricted to the anchor is the anchor structure
    for p in types:
        assert p.check_base_consistency()
    # frozen from exhaustive subset enumeration: adjacency subsets of {a1, a2}
    star_degrees = sorted(
        sum(1 for a in (0, 1) if p.extension.holds("R", (a, 2))) for p in types
    )
    assert star_degrees == [0, 1, 1, 2]


def test_rqf_types_no_anchor_fixing_isomorphic_duplicates():
    host = graph(4, [(0, 1), (1, 2), (2, 3)])
    types = enumerate_rqf_types(host, (0, 2), GraphsOracleLite())
    keys = [p.key() for p in types]
    assert len(keys) == len(set(keys))


def test_rqf_type_realizations():
    host = graph(4, [(0, 1), (0, 2)])
    types = enumerate_rqf_types(host, (0,), GraphsOracleLite())
    adjacent = [p for p in types if p.extension.holds("R", (0, 1))][0]
    assert adjacent.realizations() == [1, 2]
    non_adjacent = [p for p in types if not p.extension.holds("R", (0, 1))][0]
    assert non_adjacent.realizations() == [3]


def test_trivial_types_flagged():
    host = graph(3, [(0, 1)])
    types = enumerate_rqf_types(host, (0, 1), GraphsOracleLite(), nontrivial_only=False)
    trivial = [p for p in types if not p.nontrivial]
    assert [p.equals_anchor for p in trivial] == [0, 1]
