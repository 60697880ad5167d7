"""The splitting dichotomy made executable.

One side searches bounded split witnesses (two extensions of any host
agreeing off a fixed copy of C yet non-isomorphic); the other side
searches control certificates (a finite set whose types pin a point's
type over every bounded extension) and assembles the induced equivalence
classes.  All verdicts carry their bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .oracles import ClassOracle, members_up_to
from .structures import (
    FinStructure,
    PartialMap,
    StructureError,
    find_embeddings,
    induced_substructure,
    is_embedding,
)

__all__ = [
    "SplitWitness",
    "SplitVerdict",
    "witness_for",
    "find_split_witness",
    "verify_split_witness",
    "ControlCertificate",
    "control_counterexample",
    "find_control",
    "ClassData",
    "equivalence_classes",
    "ControlNotFound",
    "DichotomyVerdict",
    "dichotomy_check",
    "default_stage",
]


class ControlNotFound(StructureError):
    """No control certificate at the given bounds."""


# ---------------------------------------------------------------------------
# split witnesses


@dataclass
class SplitWitness:
    """Two extensions of D agreeing off the C-image but non-isomorphic.

    Standard labeling: D1 and D2 share the domain D + new points, j1 and
    j2 are inclusions and f is the identity on labels.  verify() accepts
    the general shape regardless.
    """

    C: FinStructure
    D: FinStructure
    i: PartialMap  # C -> D
    D1: FinStructure
    D2: FinStructure
    j1: PartialMap  # D -> D1
    j2: PartialMap  # D -> D2
    f: dict[int, int]  # total bijection D1 -> D2
    violating: tuple  # (symbol, tuple in D1 labels, side holding it)


def _c_image_in_d1(w: SplitWitness) -> set[int]:
    return {w.j1.pairs[w.i.pairs[c]] for c in range(w.C.n)}


def verify_split_witness(w: SplitWitness, oracle: ClassOracle) -> bool:
    """Re-derive every clause; the stored violating tuple is not trusted."""
    for S in (w.C, w.D, w.D1, w.D2):
        if not oracle.member(S):
            return False
    for m in (w.i, w.j1, w.j2):
        ok, _ = m.verify_embedding()
        if not ok:
            return False
    if w.D1.n != w.D2.n or len(w.f) != w.D1.n:
        return False
    if sorted(w.f.values()) != list(range(w.D2.n)):
        return False
    # f . j1 = j2
    for d in range(w.D.n):
        if w.f[w.j1.pairs[d]] != w.j2.pairs[d]:
            return False
    # f restricted off the C-image is an isomorphism of induced substructures
    c_img = _c_image_in_d1(w)
    off = {x: w.f[x] for x in range(w.D1.n) if x not in c_img}
    if not is_embedding(w.D1, w.D2, off):
        return False
    # f itself is NOT an isomorphism: re-derive a violating tuple
    return _violating_tuple(w.D1, w.D2, w.f) is not None


def _violating_tuple(D1: FinStructure, D2: FinStructure, f: dict) -> tuple | None:
    for name, arity in D1.signature.symbols:
        for t in sorted(itertools.product(range(D1.n), repeat=arity)):
            a = D1.holds(name, t)
            b = D2.holds(name, tuple(f[e] for e in t))
            if a != b:
                return (name, t, 1 if a else 2)
    return None


def _extensions_up_to(oracle, D, slack):
    """Extensions of D by 1..slack new points, depth-first."""
    frontier = [D]
    for _ in range(slack):
        nxt = []
        for S in frontier:
            for ext in oracle.one_point_extensions(S):
                yield ext
                nxt.append(ext)
        frontier = nxt


def witness_for(
    oracle: ClassOracle, C: FinStructure, D: FinStructure, i: PartialMap, slack: int = 1
) -> SplitWitness | None:
    """First witness for the pair (D, i) in canonical search order, or None."""
    c_img = sorted(i.pairs.values())
    for D1 in _extensions_up_to(oracle, D, slack):
        D2 = _matching_second_extension(oracle, D, c_img, D1)
        if D2 is None:
            continue
        viol = _violating_tuple(D1, D2, {x: x for x in range(D1.n)})
        incl = {d: d for d in range(D.n)}
        return SplitWitness(
            C=C,
            D=D,
            i=i,
            D1=D1,
            D2=D2,
            j1=PartialMap(D, D1, incl, kind="embedding"),
            j2=PartialMap(D, D2, incl, kind="embedding"),
            f={x: x for x in range(D1.n)},
            violating=viol,
        )
    return None


def _matching_second_extension(oracle, D, c_img, D1) -> FinStructure | None:
    """Rebuild D1's new points over D with relations to the C-image free;
    return the first member differing from D1."""
    news = list(range(D.n, D1.n))
    c_set = set(c_img)

    def rec(S: FinStructure, idx: int):
        if idx == len(news):
            return S if S != D1 else None
        w_old = news[idx]
        star = S.n
        prescribed: dict[str, set] = {}
        for name, arity in D1.signature.symbols:
            want = set()
            for t in D1.interp[name]:
                if w_old not in t:
                    continue
                if any(e in c_set for e in t):
                    continue
                if all(e < D.n or e <= w_old for e in t) and all(
                    e not in range(w_old + 1, D1.n) for e in t
                ):
                    want.add(tuple(star if e == w_old else e for e in t))
            prescribed[name] = want
        free = sorted(c_set)
        for ext in oracle.one_point_extensions(S, prescribed=prescribed, free=free):
            found = rec(ext, idx + 1)
            if found is not None:
                return found
        return None

    return rec(D, 0)


@dataclass
class SplitVerdict:
    kind: str  # splits-up-to-bound | blocked
    oracle: str
    C: FinStructure
    size_bound: int
    slack: int
    witnesses: list[SplitWitness] = field(default_factory=list)
    pair_count: int = 0
    blocked_at: tuple[FinStructure, PartialMap] | None = None

    @property
    def splits(self) -> bool:
        return self.kind == "splits-up-to-bound"


def find_split_witness(
    oracle: ClassOracle, C: FinStructure, size_bound: int, slack: int = 1
) -> SplitVerdict:
    """Check every host pair (D, i) with |D| <= size_bound.

    splits-up-to-bound carries one verified witness per enumerated pair;
    blocked carries the first pair admitting none within the slack.
    """
    if not oracle.member(C):
        raise StructureError("C rejected by oracle")
    witnesses = []
    pairs = 0
    for D in members_up_to(oracle, size_bound):
        for i in find_embeddings(C, D):
            pairs += 1
            w = witness_for(oracle, C, D, i, slack)
            if w is None:
                return SplitVerdict(
                    kind="blocked",
                    oracle=oracle.name,
                    C=C,
                    size_bound=size_bound,
                    slack=slack,
                    pair_count=pairs,
                    blocked_at=(D, i),
                )
            witnesses.append(w)
    return SplitVerdict(
        kind="splits-up-to-bound",
        oracle=oracle.name,
        C=C,
        size_bound=size_bound,
        slack=slack,
        witnesses=witnesses,
        pair_count=pairs,
    )


# ---------------------------------------------------------------------------
# control certificates


@dataclass
class ControlCertificate:
    """K pins the type of c over every bounded extension inside the stage."""

    stage: FinStructure
    c: int
    K: tuple[int, ...]
    verified_bound: int  # max |F| checked

    def verify(self) -> bool:
        return control_counterexample(self.stage, self.c, self.K, self.verified_bound) is None


def _pattern_key(S: FinStructure, pts: tuple[int, ...]) -> tuple:
    """Labeled quantifier-free pattern of an ordered point tuple."""
    key = []
    for idx, p in enumerate(pts):
        key.append(S.unary_mask(p))
        key.append(S.pair_mask(p, p))
        for q in pts[:idx]:
            key.append(S.pair_mask(p, q))
            key.append(S.pair_mask(q, p))
    for name, arity in S.signature.symbols:
        if arity <= 2:
            continue
        for t in itertools.product(pts, repeat=arity):
            key.append(S.holds(name, t))
    return tuple(key)


def control_counterexample(
    stage: FinStructure, c: int, K, f_bound: int
) -> tuple[tuple, tuple] | None:
    """A pair of anchored tuples sharing a pattern over K but not over
    K + c, or None when K controls c up to |F| <= f_bound."""
    Kt = tuple(sorted(K))
    if c in Kt:
        raise StructureError("c must avoid K")
    others = [x for x in range(stage.n) if x != c and x not in set(Kt)]
    for m in range(0, max(0, f_bound - len(Kt)) + 1):
        groups: dict[tuple, tuple] = {}
        for xs in itertools.permutations(others, m):
            pk = _pattern_key(stage, Kt + xs)
            pck = _pattern_key(stage, Kt + (c,) + xs)
            ref = groups.get(pk)
            if ref is None:
                groups[pk] = (xs, pck)
            elif ref[1] != pck:
                return (Kt + ref[0], Kt + xs)
    return None


def find_common_control(
    stage: FinStructure,
    points,
    oracle: ClassOracle,
    k_bound: int = 2,
    f_bound: int = 4,
) -> tuple[int, ...] | None:
    """Smallest K avoiding `points` and controlling each of them."""
    pts = set(points)
    candidates = [x for x in range(stage.n) if x not in pts]
    for k in range(0, k_bound + 1):
        for K in itertools.combinations(candidates, k):
            if all(control_counterexample(stage, p, K, f_bound) is None for p in pts):
                return K
    return None


def find_control(
    stage: FinStructure,
    c: int,
    oracle: ClassOracle,
    k_bound: int = 2,
    f_bound: int = 4,
    exclude=(),
) -> ControlCertificate | None:
    """Smallest K (canonical order) controlling c, or None at these bounds."""
    if c < 0 or c >= stage.n:
        raise StructureError("point out of range")
    candidates = [x for x in range(stage.n) if x != c and x not in set(exclude)]
    # a controller as large as the F bound would be vacuous
    for k in range(0, min(k_bound, f_bound - 1) + 1):
        for K in itertools.combinations(candidates, k):
            if control_counterexample(stage, c, K, f_bound) is None:
                return ControlCertificate(stage=stage, c=c, K=K, verified_bound=f_bound)
    return None


# ---------------------------------------------------------------------------
# the equivalence classes induced by controls


@dataclass
class ClassData:
    stage: FinStructure
    partition: list[list[int]]
    certificates: dict[int, ControlCertificate]
    k_bound: int
    f_bound: int

    def class_of(self, x: int) -> int:
        for idx, cls in enumerate(self.partition):
            if x in cls:
                return idx
        raise StructureError(f"{x} not in partition")


def equivalence_classes(
    stage: FinStructure, oracle: ClassOracle, k_bound: int = 2, f_bound: int = 4
) -> ClassData:
    """Partition stage points: together iff some control's types agree.

    Raises ControlNotFound when any point lacks a certificate at the
    bounds; verifies the relation is a genuine equivalence and that pairs
    agree over a common controller.
    """
    certs: dict[int, ControlCertificate] = {}
    for c in range(stage.n):
        cert = find_control(stage, c, oracle, k_bound, f_bound)
        if cert is None:
            raise ControlNotFound(
                f"class is not known non-splitting at these bounds (point {c})"
            )
        certs[c] = cert

    avoid_cache: dict[tuple[int, int], ControlCertificate | None] = {}

    def controller_avoiding(a: int, b: int) -> ControlCertificate | None:
        cert = certs[a]
        if b not in cert.K:
            return cert
        key = (a, b)
        if key not in avoid_cache:
            avoid_cache[key] = find_control(stage, a, oracle, k_bound, f_bound, exclude={b})
        return avoid_cache[key]

    n = stage.n
    related = [[False] * n for _ in range(n)]
    for a in range(n):
        related[a][a] = True
        for b in range(n):
            if a == b:
                continue
            cert = controller_avoiding(a, b)
            if cert is None:
                raise ControlNotFound(
                    f"no controller of {a} avoiding {b} at these bounds"
                )
            mapping = {k: k for k in cert.K}
            mapping[a] = b
            related[a][b] = is_embedding(stage, stage, mapping)
    for a in range(n):
        for b in range(n):
            if related[a][b] != related[b][a]:
                raise StructureError(f"equivalence symmetry fails on ({a},{b})")
            for c in range(n):
                if related[a][b] and related[b][c] and not related[a][c]:
                    raise StructureError(f"equivalence transitivity fails on ({a},{b},{c})")

    partition: list[list[int]] = []
    seen: set[int] = set()
    for a in range(n):
        if a in seen:
            continue
        cls = [b for b in range(n) if related[a][b]]
        seen.update(cls)
        partition.append(sorted(cls))

    # pairwise consistency over a common controller
    for cls in partition:
        rep = cls[0]
        for x in cls[1:]:
            common = find_common_control(stage, (rep, x), oracle, k_bound, f_bound)
            if common is None:
                raise StructureError(
                    f"no common controller for {rep}, {x} at these bounds"
                )
            mapping = {k: k for k in common}
            mapping[rep] = x
            if not is_embedding(stage, stage, mapping):
                raise StructureError(
                    f"types of {rep} and {x} disagree over common controller {common}"
                )
    return ClassData(
        stage=stage,
        partition=partition,
        certificates=certs,
        k_bound=k_bound,
        f_bound=f_bound,
    )


# ---------------------------------------------------------------------------
# the dichotomy driver


@dataclass
class DichotomyVerdict:
    oracle: str
    kind: str  # splits-up-to-bound | does-not-split-up-to-bound | inconclusive-at-bound
    size_bound: int
    slack: int
    c_max: int
    splitting_C: FinStructure | None = None
    split_verdict: SplitVerdict | None = None
    blocked: list[SplitVerdict] = field(default_factory=list)
    stage: FinStructure | None = None
    certificates: dict[int, ControlCertificate] | None = None
    detail: str = ""


def default_stage(oracle: ClassOracle, k: int = 1, T: int = 2, m: int = 2) -> FinStructure:
    """A small limit-approximation stage used as the control-search host."""
    from .limits import build_limit_approx

    approx = build_limit_approx(oracle, k=k, steps=T, multiplicity=m, seed=oracle.empty())
    return approx.top


def dichotomy_check(
    oracle: ClassOracle,
    bound: int,
    slack: int = 1,
    c_max: int = 2,
    stage: FinStructure | None = None,
    k_bound: int = 2,
    f_bound: int = 4,
) -> DichotomyVerdict:
    """Decide the dichotomy at the given bounds.

    Splits when some C with |C| <= c_max has witnesses for every (D, i)
    with |D| <= bound; does-not-split when every such C is blocked and
    every stage point has a control certificate; inconclusive otherwise.
    """
    blocked = []
    for C in members_up_to(oracle, c_max):
        if C.n == 0:
            continue
        verdict = find_split_witness(oracle, C, bound, slack)
        if verdict.splits:
            return DichotomyVerdict(
                oracle=oracle.name,
                kind="splits-up-to-bound",
                size_bound=bound,
                slack=slack,
                c_max=c_max,
                splitting_C=C,
                split_verdict=verdict,
            )
        blocked.append(verdict)

    if stage is None:
        if not oracle.claims_sap:
            return DichotomyVerdict(
                oracle=oracle.name,
                kind="inconclusive-at-bound",
                size_bound=bound,
                slack=slack,
                c_max=c_max,
                blocked=blocked,
                detail="no splitting C found; control stage needs strong amalgams",
            )
        stage = default_stage(oracle)

    certs: dict[int, ControlCertificate] = {}
    for c in range(stage.n):
        cert = find_control(stage, c, oracle, k_bound, f_bound)
        if cert is None:
            return DichotomyVerdict(
                oracle=oracle.name,
                kind="inconclusive-at-bound",
                size_bound=bound,
                slack=slack,
                c_max=c_max,
                blocked=blocked,
                stage=stage,
                detail=f"no control certificate for point {c} at k<={k_bound}, f<={f_bound}",
            )
        certs[c] = cert
    return DichotomyVerdict(
        oracle=oracle.name,
        kind="does-not-split-up-to-bound",
        size_bound=bound,
        slack=slack,
        c_max=c_max,
        blocked=blocked,
        stage=stage,
        certificates=certs,
    )
