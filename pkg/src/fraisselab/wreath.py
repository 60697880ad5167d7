"""Block-structured limits, their automorphism groups, and type trees.

Covers the constructive side of the structural analysis: the iterated
type-splitting scheme (a finite-depth Cantor scheme of quantifier-free
types), block structures built from a permutation group on index set I,
brute-force automorphism groups, and the wreath-factorization report.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .structures import (
    FinStructure,
    Signature,
    StructureError,
    find_embeddings,
    _refined_colors,
)
from .oracles import ClassOracle

__all__ = [
    "WreathSpec",
    "MHOracle",
    "mh_oracle_from_key",
    "build_MH",
    "AutomorphismGroup",
    "automorphism_group",
    "WreathReport",
    "verify_wreath_factorization",
    "TypeTree",
    "TypeTreeNode",
    "type_splitting_tree",
]


# ---------------------------------------------------------------------------
# permutation groups on the index set


def _closure(size: int, generators) -> list[tuple[int, ...]]:
    """Group closure of permutations given as image tuples."""
    identity = tuple(range(size))
    gens = [tuple(g) for g in generators]
    for g in gens:
        if sorted(g) != list(range(size)):
            raise StructureError(f"{g} is not a permutation of range({size})")
    seen = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for h in frontier:
            for g in gens:
                prod = tuple(g[h[i]] for i in range(size))
                if prod not in seen:
                    seen.add(prod)
                    nxt.append(prod)
        frontier = nxt
    return sorted(seen)


@dataclass(frozen=True)
class WreathSpec:
    """Index set size, permutation group (by generators) and block sizes."""

    size: int
    generators: tuple[tuple[int, ...], ...]
    block_sizes: tuple[int, ...]

    def __post_init__(self):
        if self.size < 1 or self.size > 8:
            raise StructureError("index set size must be in 1..8")
        if len(self.block_sizes) != self.size:
            raise StructureError("need one block size per index")
        if any(b < 1 for b in self.block_sizes):
            raise StructureError("block sizes must be >= 1")
        group = _closure(self.size, self.generators)
        # block sizes must be constant on group orbits
        for g in group:
            for i in range(self.size):
                if self.block_sizes[g[i]] != self.block_sizes[i]:
                    raise StructureError("block sizes must be constant on orbits")
        object.__setattr__(self, "_group", group)

    @property
    def group(self) -> list[tuple[int, ...]]:
        return self._group  # type: ignore[attr-defined]

    def orbits(self, arity: int) -> list[tuple[tuple[int, ...], ...]]:
        """Orbits of the group action on I^arity, canonically ordered."""
        seen = set()
        orbits = []
        for t in itertools.product(range(self.size), repeat=arity):
            if t in seen:
                continue
            orb = sorted({tuple(g[i] for i in t) for g in self.group})
            seen.update(orb)
            orbits.append(tuple(orb))
        orbits.sort(key=lambda o: o[0])
        return orbits

    @staticmethod
    def from_dict(data: dict) -> "WreathSpec":
        size = int(data["I"])
        gens = tuple(tuple(g) for g in data.get("H_generators", []))
        sizes = data.get("block_sizes")
        if sizes is None:
            sizes = [2] * size
        return WreathSpec(size, gens, tuple(int(b) for b in sizes))

    def to_dict(self) -> dict:
        return {
            "I": self.size,
            "H_generators": [list(g) for g in self.generators],
            "block_sizes": list(self.block_sizes),
        }

    def key(self) -> str:
        return "mh:" + json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)


# ---------------------------------------------------------------------------
# the block-structure oracle


class MHOracle(ClassOracle):
    """Age of the block structure over a permutation group on I.

    Same-block relation S plus one symbol per group orbit on I and I*I
    (orbit arities capped at 2).  Membership: blocks inject into I
    consistently with the orbit data.
    """

    claims_sap = True
    claims_splits = False

    def __init__(self, spec: WreathSpec):
        self.spec = spec
        self.unary_orbits = spec.orbits(1)
        self.binary_orbits = spec.orbits(2)
        symbols = [("S", 2)]
        symbols += [(f"R1_{j}", 1) for j in range(len(self.unary_orbits))]
        symbols += [(f"R2_{j}", 2) for j in range(len(self.binary_orbits))]
        self._sig = Signature(tuple(symbols))
        self._unary_of = {}
        for j, orb in enumerate(self.unary_orbits):
            for (i,) in orb:
                self._unary_of[i] = j
        self._binary_of = {}
        for j, orb in enumerate(self.binary_orbits):
            for pair in orb:
                self._binary_of[pair] = j
        self.name = spec.key()

    @property
    def signature(self):
        return self._sig

    def cache_key(self):
        return self.name

    # -- block bookkeeping ---------------------------------------------------

    def blocks(self, S: FinStructure) -> list[list[int]] | None:
        """S-equivalence classes, or None when S is not an equivalence."""
        rel = S.interp["S"]
        n = S.n
        for a in range(n):
            if (a, a) not in rel:
                return None
        for (a, b) in rel:
            if (b, a) not in rel:
                return None
            for c in range(n):
                if (b, c) in rel and (a, c) not in rel:
                    return None
        seen = set()
        out = []
        for x in range(n):
            if x in seen:
                continue
            blk = sorted(y for y in range(n) if (x, y) in rel)
            seen.update(blk)
            out.append(blk)
        return out

    def _assignment_ok(self, S, blocks, assign: list[int]) -> bool:
        """assign[bi] = index in I; check all orbit relations."""
        block_of = {}
        for bi, blk in enumerate(blocks):
            for x in blk:
                block_of[x] = bi
        for x in range(S.n):
            i = assign[block_of[x]]
            for j in range(len(self.unary_orbits)):
                if S.holds(f"R1_{j}", (x,)) != (self._unary_of[i] == j):
                    return False
        for x in range(S.n):
            ix = assign[block_of[x]]
            for y in range(S.n):
                iy = assign[block_of[y]]
                want = self._binary_of[(ix, iy)]
                for j in range(len(self.binary_orbits)):
                    if S.holds(f"R2_{j}", (x, y)) != (want == j):
                        return False
        return True

    def assignments(self, S: FinStructure) -> list[list[int]]:
        """All injections blocks -> I consistent with the relations."""
        blocks = self.blocks(S)
        if blocks is None:
            return []
        out = []
        for assign in itertools.permutations(range(self.spec.size), len(blocks)):
            if self._assignment_ok(S, blocks, list(assign)):
                out.append(list(assign))
        return out

    def member(self, S):
        if S.n == 0:
            return True
        return bool(self.assignments(S))

    def one_point_extensions(self, S, prescribed=None, free=None):
        blocks = self.blocks(S)
        if blocks is None:
            raise StructureError("not a block structure")
        star = S.n
        if free is None:
            free = list(range(S.n))
        free_set = set(free)
        fixed = [x for x in range(S.n) if x not in free_set]
        block_of = {}
        for bi, blk in enumerate(blocks):
            for x in blk:
                block_of[x] = bi
        seen = set()
        out = []
        for assign in self.assignments(S) or ([] if S.n else [[]]):
            for i in range(self.spec.size):
                new: dict[str, set] = {"S": {(star, star)}}
                joined = [bi for bi, idx in enumerate(assign) if idx == i]
                for bi in joined:
                    for x in blocks[bi]:
                        new["S"].update({(x, star), (star, x)})
                j = self._unary_of[i]
                new[f"R1_{j}"] = {(star,)}
                for x in range(S.n):
                    ix = assign[block_of[x]]
                    new.setdefault(f"R2_{self._binary_of[(ix, i)]}", set()).add((x, star))
                    new.setdefault(f"R2_{self._binary_of[(i, ix)]}", set()).add((star, x))
                new.setdefault(f"R2_{self._binary_of[(i, i)]}", set()).add((star, star))
                ext = S.with_point(new)
                key = ext._interp_key()
                if key in seen:
                    continue
                seen.add(key)
                if prescribed is not None and not _extension_matches(
                    ext, S.n, fixed, prescribed
                ):
                    continue
                out.append(ext)
        out.sort(key=lambda e: e._interp_key())
        return out


def _extension_matches(ext: FinStructure, star: int, fixed, prescribed: dict) -> bool:
    """Extension agrees with the prescription on tuples over fixed elements."""
    fixed_set = set(fixed)
    for name, arity in ext.signature.symbols:
        want = {tuple(t) for t in prescribed.get(name, set())}
        for t in itertools.product(list(fixed_set) + [star], repeat=arity):
            if star not in t:
                continue
            if ext.holds(name, t) != (t in want):
                return False
    return True


def mh_oracle_from_key(key: str) -> MHOracle:
    if not key.startswith("mh:"):
        raise StructureError(f"not an mh key: {key!r}")
    spec = WreathSpec.from_dict(json.loads(key[3:]))
    return MHOracle(spec)


def build_MH(spec: WreathSpec, level: int | None = None) -> tuple[FinStructure, MHOracle]:
    """The finite block structure itself: `level` points per block
    (overriding the spec's block sizes when given)."""
    oracle = MHOracle(spec)
    sizes = spec.block_sizes if level is None else tuple([level] * spec.size)
    offsets = [0]
    for s in sizes:
        offsets.append(offsets[-1] + s)
    n = offsets[-1]

    def block_index(x: int) -> int:
        for i in range(spec.size):
            if offsets[i] <= x < offsets[i + 1]:
                return i
        raise AssertionError

    interp: dict[str, set] = {"S": set()}
    for x in range(n):
        for y in range(n):
            ix, iy = block_index(x), block_index(y)
            if ix == iy:
                interp["S"].add((x, y))
            interp.setdefault(f"R2_{oracle._binary_of[(ix, iy)]}", set()).add((x, y))
        interp.setdefault(f"R1_{oracle._unary_of[block_index(x)]}", set()).add((x,))
    S = FinStructure(oracle.signature, n, interp)
    return S, oracle


# ---------------------------------------------------------------------------
# automorphism groups by brute force


@dataclass
class AutomorphismGroup:
    structure: FinStructure
    order: int
    generators: list[dict[int, int]]
    all_maps: list[dict[int, int]] = field(repr=False)


_GROUP_CACHE: dict[FinStructure, AutomorphismGroup] = {}


def automorphism_group(S: FinStructure) -> AutomorphismGroup:
    """Exact automorphism group; |S| <= 12 enforced."""
    if S.n > 12:
        raise StructureError("automorphism enumeration capped at 12 elements")
    cached = _GROUP_CACHE.get(S)
    if cached is not None:
        return cached
    auts = _enumerate_automorphisms(S)
    gens = _generators(S.n, auts)
    from .structures import is_embedding

    for g in gens:
        assert is_embedding(S, S, g)
    group = AutomorphismGroup(S, len(auts), gens, auts)
    _GROUP_CACHE[S] = group
    return group


def _enumerate_automorphisms(S: FinStructure) -> list[dict[int, int]]:
    colors = _refined_colors(S)
    n = S.n
    out = []
    assign: dict[int, int] = {}
    used = [False] * n
    higher = S.signature.max_arity > 2

    def consistent(a, b):
        if colors[a] != colors[b]:
            return False
        if S.unary_mask(a) != S.unary_mask(b) or S.pair_mask(a, a) != S.pair_mask(b, b):
            return False
        for a2, b2 in assign.items():
            if S.pair_mask(a, a2) != S.pair_mask(b, b2):
                return False
            if S.pair_mask(a2, a) != S.pair_mask(b2, b):
                return False
        return True

    def rec(a):
        if a == n:
            mapping = dict(assign)
            if higher:
                from .structures import is_embedding

                if not is_embedding(S, S, mapping):
                    return
            out.append(mapping)
            return
        for b in range(n):
            if used[b] or not consistent(a, b):
                continue
            assign[a] = b
            used[b] = True
            rec(a + 1)
            used[b] = False
            del assign[a]

    rec(0)
    return out


def _compose(g: dict, h: dict) -> tuple:
    return tuple(g[h[i]] for i in range(len(h)))


def _generators(n: int, auts: list[dict[int, int]]) -> list[dict[int, int]]:
    """Greedy small generating set."""
    all_tuples = {tuple(a[i] for i in range(n)) for a in auts}
    identity = tuple(range(n))
    gens: list[tuple] = []
    span = {identity}
    for a in sorted(all_tuples):
        if a in span:
            continue
        gens.append(a)
        frontier = list(span) + [a]
        span.add(a)
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    for prod in (
                        tuple(g[x[i]] for i in range(n)),
                        tuple(x[g[i]] for i in range(n)),
                    ):
                        if prod not in span:
                            span.add(prod)
                            nxt.append(prod)
            frontier = nxt
        if len(span) == len(all_tuples):
            break
    return [dict(enumerate(g)) for g in gens]


# ---------------------------------------------------------------------------
# wreath factorization report


@dataclass
class WreathReport:
    order: int
    classes: list[list[int]]
    class_preservation: bool
    kernel_fullness: bool
    order_equation: bool
    induced_group_order: int
    expected_order: int
    h_matches_expected: bool | None
    failure: dict | None = None

    @property
    def passes(self) -> bool:
        ok = self.class_preservation and self.kernel_fullness and self.order_equation
        if self.h_matches_expected is not None:
            ok = ok and self.h_matches_expected
        return ok


def verify_wreath_factorization(
    S: FinStructure,
    classes: list[list[int]],
    H_expected: list[tuple[int, ...]] | None = None,
) -> WreathReport:
    """Check the finite wreath-product factorization of Aut(S) over the
    given partition: class preservation, kernel fullness, order equation.
    """
    group = automorphism_group(S)
    class_of = {}
    for ci, cls in enumerate(classes):
        for x in cls:
            class_of[x] = ci
    if len(class_of) != S.n:
        raise StructureError("classes must partition the domain")

    failure = None
    preservation = True
    induced: set[tuple[int, ...]] = set()
    for sigma in group.all_maps:
        img = []
        ok = True
        for cls in classes:
            targets = {class_of[sigma[x]] for x in cls}
            if len(targets) != 1:
                ok = False
                break
            img.append(targets.pop())
        if not ok or sorted(img) != list(range(len(classes))):
            preservation = False
            failure = {"kind": "class-preservation", "automorphism": sigma}
            break
        induced.add(tuple(img))

    # kernel fullness <=> every within-class transposition is an automorphism
    from .structures import is_embedding

    kernel_full = True
    for cls in classes:
        for x, y in itertools.combinations(cls, 2):
            swap = {i: i for i in range(S.n)}
            swap[x], swap[y] = y, x
            if not is_embedding(S, S, swap):
                kernel_full = False
                if failure is None:
                    failure = {"kind": "kernel-fullness", "transposition": (x, y)}
                break
        if not kernel_full:
            break

    expected = 1
    for cls in classes:
        import math

        expected *= math.factorial(len(cls))
    expected *= max(len(induced), 1)
    order_eq = preservation and group.order == expected

    h_match = None
    if H_expected is not None:
        want = set(_closure(len(classes), [tuple(h) for h in H_expected]))
        h_match = induced == want

    return WreathReport(
        order=group.order,
        classes=[sorted(c) for c in classes],
        class_preservation=preservation,
        kernel_fullness=kernel_full,
        order_equation=order_eq,
        induced_group_order=len(induced),
        expected_order=expected,
        h_matches_expected=h_match,
        failure=failure,
    )


# ---------------------------------------------------------------------------
# iterated type-splitting tree


@dataclass
class TypeTreeNode:
    path: str
    point: int
    distinguisher: int | None = None  # stage point recorded at this node's split
    children: list["TypeTreeNode"] = field(default_factory=list)


@dataclass
class TypeTree:
    stage: FinStructure
    root: TypeTreeNode
    depth: int
    requested_depth: int
    recorded: list[int]  # union of all distinguishing sets

    def leaves(self) -> list[TypeTreeNode]:
        out = []

        def walk(node):
            if not node.children:
                out.append(node)
            for c in node.children:
                walk(c)

        walk(self.root)
        return out

    def leaf_types(self):
        """Leaf patterns over the union of recorded sets, as rqf types."""
        from .structures import RqfType, induced_substructure

        anchor = tuple(sorted(self.recorded))
        types = []
        for leaf in self.leaves():
            ext, _ = induced_substructure(self.stage, list(anchor) + [leaf.point])
            # relabel so the leaf point is last
            order = sorted(list(anchor) + [leaf.point])
            pos = {x: i for i, x in enumerate(order)}
            target = {pos[x]: i for i, x in enumerate(anchor)}
            target[pos[leaf.point]] = len(anchor)
            ext = ext.relabel(target)
            types.append(
                RqfType(base=self.stage, anchor=anchor, extension=ext, nontrivial=True)
            )
        return types

    def leaves_pairwise_distinct(self) -> bool:
        types = self.leaf_types()
        keys = {t.extension._interp_key() for t in types}
        return len(keys) == len(types)


def _same_pattern(S: FinStructure, a: int, b: int, F) -> bool:
    """Do a and b have the same quantifier-free pattern over F?"""
    if a == b:
        return True
    if S.unary_mask(a) != S.unary_mask(b) or S.pair_mask(a, a) != S.pair_mask(b, b):
        return False
    for w in F:
        if S.pair_mask(a, w) != S.pair_mask(b, w):
            return False
        if S.pair_mask(w, a) != S.pair_mask(w, b):
            return False
    return True


def type_splitting_tree(approx, C0: FinStructure, depth: int) -> TypeTree:
    """Iterate the splitting step into a depth-`depth` binary scheme.

    Each split finds two stage points sharing the parent's pattern over
    the sets recorded so far, plus a fresh point distinguishing them.
    Truncates honestly when the stage budget runs out.
    """
    oracle = approx.oracle
    stage = approx.top
    if C0.n != 1:
        raise StructureError("type trees are built over one-point structures")
    from .splitting import find_split_witness

    probe = find_split_witness(oracle, C0, size_bound=max(2, C0.n + 1))
    if probe.kind != "splits-up-to-bound":
        raise StructureError(
            f"oracle {oracle.name} does not split at probe bound; tree refused"
        )

    base_candidates = [
        z for z in range(stage.n) if _point_matches(stage, z, C0)
    ]
    if not base_candidates:
        raise StructureError("stage contains no copy of the root structure")
    root = TypeTreeNode(path="", point=base_candidates[0])
    recorded: list[int] = []
    occupied: set[int] = {root.point}
    # distinguishers come from the closed previous stage so same-pattern
    # pools stay inhabited down the tree
    w_pool = range(approx.previous.n)

    def split(node: TypeTreeNode, F: tuple[int, ...], level: int):
        if level == depth:
            return
        v = node.point
        found = None
        for u2 in base_candidates:
            if u2 in occupied or u2 in F or not _same_pattern(stage, u2, v, F):
                continue
            for w in w_pool:
                if w in occupied or w in F or w == u2 or w == v:
                    continue
                if not _same_pattern(stage, v, u2, (w,)):
                    found = (u2, w)
                    break
            if found:
                break
        if not found:
            return  # budget exhausted: honest truncation
        u2, w = found
        occupied.update({u2, w})
        node.distinguisher = w
        recorded.append(w)
        node.children = [
            TypeTreeNode(path=node.path + "0", point=v),
            TypeTreeNode(path=node.path + "1", point=u2),
        ]
        for child in node.children:
            split(child, tuple(sorted(set(F) | {w})), level + 1)

    split(root, (), 0)
    leaves_depths = set()

    def min_leaf_depth(node, d):
        if not node.children:
            leaves_depths.add(d)
        for c in node.children:
            min_leaf_depth(c, d + 1)

    min_leaf_depth(root, 0)
    achieved = min(leaves_depths) if leaves_depths else 0
    return TypeTree(
        stage=stage,
        root=root,
        depth=achieved,
        requested_depth=depth,
        recorded=sorted(set(recorded)),
    )


def _point_matches(S: FinStructure, z: int, C0: FinStructure) -> bool:
    from .structures import is_embedding

    return is_embedding(C0, S, {0: z})
