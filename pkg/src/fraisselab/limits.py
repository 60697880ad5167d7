"""Finite limit-stage construction, absorbing partitions, back-and-forth.

A limit approximation is an ascending chain of members where every
nontrivial type over every small anchor of one stage is realized with
multiplicity in the next.  An absorbing partition splits the realizations
of every such type between a set and its complement; it is the finite
stand-in for a generic substructure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .oracles import ClassOracle
from .structures import (
    FinStructure,
    PartialMap,
    RqfType,
    StructureError,
    induced_substructure,
    is_embedding,
)

__all__ = [
    "ConstructionError",
    "LimitApprox",
    "build_limit_approx",
    "verify_extension_property",
    "AbsorbingPartition",
    "build_absorbing_partition",
    "verify_absorbing",
    "BackAndForthResult",
    "back_and_forth",
]


class ConstructionError(StructureError):
    """Stage construction failed; carries the offending anchor and type."""


def demo_game_stage(hubs: int = 24, leaves: int = 4, sea: int = 16) -> "LimitApprox":
    """Graphs stage tuned for long strategy runs: a forest of `hubs`
    brooms (a hub with `leaves` private leaves) plus isolated points.

    Hubs sit at the low indices, so the canonical C* lands on a hub with
    private absorption supply on both partition sides; the big
    automorphism group keeps the candidate list deep.
    """
    from .oracles import get_oracle, graph_structure

    if leaves % 2 != 0:
        raise ConstructionError("leaves per hub must be even for balanced sides")
    oracle = get_oracle("graphs")
    edges = []
    for j in range(hubs):
        edges += [(j, hubs + leaves * j + i) for i in range(leaves)]
    top = graph_structure(hubs + leaves * hubs + sea, edges)
    seed = graph_structure(1, [])
    return LimitApprox(oracle=oracle, stages=[seed, top], k=1, multiplicity=2)


def demo_extension_stage(blocks: int = 3, size: int = 4) -> "LimitApprox":
    """Disjoint-cliques stage for the global-extension branch."""
    from .oracles import cliques_structure, get_oracle

    oracle = get_oracle("k2")
    stage = cliques_structure([size] * blocks)
    return LimitApprox(oracle=oracle, stages=[stage], k=1, multiplicity=2)


def demo_tree_stage(depth: int = 3, hubs: int | None = None) -> "LimitApprox":
    """Graphs stage for iterated type splitting: one point per subset of
    hubs up to `depth` hubs, so every node of the scheme finds a partner
    matching its pattern and differing at one fresh hub."""
    import itertools

    from .oracles import get_oracle, graph_structure

    if hubs is None:
        hubs = 2 ** (depth + 1)
    subsets = []
    for size in range(0, depth + 1):
        subsets += list(itertools.combinations(range(hubs), size))
    hub_base = len(subsets)
    edges = []
    for idx, S in enumerate(subsets):
        edges += [(idx, hub_base + h) for h in S]
    stage = graph_structure(hub_base + hubs, edges)
    oracle = get_oracle("graphs")
    return LimitApprox(oracle=oracle, stages=[stage], k=1, multiplicity=2)


@dataclass
class LimitApprox:
    """Ascending chain of stages; stage t is a domain prefix of stage t+1."""

    oracle: ClassOracle
    stages: list[FinStructure]
    k: int
    multiplicity: int

    def __post_init__(self):
        for a, b in zip(self.stages, self.stages[1:]):
            if b.n < a.n:
                raise StructureError("stages must be ascending")

    @property
    def top(self) -> FinStructure:
        return self.stages[-1]

    @property
    def previous(self) -> FinStructure:
        return self.stages[-2] if len(self.stages) >= 2 else self.stages[-1]

    def inclusions(self) -> list[list[int]]:
        return [list(range(s.n)) for s in self.stages[:-1]]

    def check_chain(self) -> bool:
        """Each inclusion is an embedding."""
        for a, b in zip(self.stages, self.stages[1:]):
            if not is_embedding(a, b, {x: x for x in range(a.n)}):
                return False
        return True


def _anchors(n: int, k: int):
    for size in range(0, k + 1):
        yield from itertools.combinations(range(n), size)


def _anchored_types(oracle: ClassOracle, stage: FinStructure, k: int):
    """All (anchor, extension pattern) closure obligations, canonical order."""
    for anchor in _anchors(stage.n, k):
        anchored, _ = induced_substructure(stage, anchor)
        for ext in oracle.one_point_extensions(anchored):
            yield anchor, ext


def _realizations(host: FinStructure, anchor: tuple[int, ...], ext: FinStructure) -> list[int]:
    out = []
    anchor_set = set(anchor)
    for z in range(host.n):
        if z in anchor_set:
            continue
        mapping = {i: x for i, x in enumerate(anchor)}
        mapping[len(anchor)] = z
        if is_embedding(ext, host, mapping):
            out.append(z)
    return out


def _first_extension(oracle, S, prescribed, free) -> FinStructure | None:
    fast = getattr(oracle, "first_extension", None)
    if fast is not None:
        return fast(S, prescribed, free)
    exts = oracle.one_point_extensions(S, prescribed=prescribed, free=free)
    return exts[0] if exts else None


def build_limit_approx(
    oracle: ClassOracle,
    k: int,
    steps: int,
    multiplicity: int,
    seed: FinStructure,
) -> LimitApprox:
    """Iterate stage closure: every nontrivial type over every anchor of
    size <= k gets >= multiplicity realizations in the next stage.

    Deterministic: anchors and types processed in canonical order, each
    new point takes the least admissible relation pattern.
    """
    if not oracle.claims_sap:
        raise ConstructionError(
            f"oracle {oracle.name} does not claim strong amalgamation; "
            "point addition without identification is not available"
        )
    if not oracle.member(seed):
        raise ConstructionError("seed rejected by oracle")
    stages = [seed]
    for _ in range(steps):
        current = stages[-1]
        N = current
        for anchor, ext in _anchored_types(oracle, current, k):
            need = multiplicity - len(_realizations(N, anchor, ext))
            for _ in range(need):
                star = N.n
                prescribed: dict[str, set] = {}
                for name, arity in ext.signature.symbols:
                    want = set()
                    for t in ext.interp[name]:
                        if len(anchor) not in t:
                            continue
                        want.add(
                            tuple(star if e == len(anchor) else anchor[e] for e in t)
                        )
                    prescribed[name] = want
                free = [x for x in range(N.n) if x not in set(anchor)]
                nxt = _first_extension(oracle, N, prescribed, free)
                if nxt is None:
                    raise ConstructionError(
                        f"no admissible realization for anchor {anchor} "
                        f"pattern {sorted(ext.interp.items())}"
                    )
                N = nxt
        stages.append(N)
    return LimitApprox(oracle=oracle, stages=stages, k=k, multiplicity=multiplicity)


def verify_extension_property(approx: LimitApprox, k: int | None = None):
    """Independent closure re-check.

    Re-enumerates every anchor and type from scratch and counts
    realizations in the following stage; returns (ok, first failure).
    """
    if k is None:
        k = approx.k
    for t in range(len(approx.stages) - 1):
        cur, nxt = approx.stages[t], approx.stages[t + 1]
        for anchor in _anchors(cur.n, k):
            anchored, _ = induced_substructure(cur, anchor)
            for ext in approx.oracle.one_point_extensions(anchored):
                found = _realizations(nxt, anchor, ext)
                if len(found) < approx.multiplicity:
                    return False, {
                        "stage": t,
                        "anchor": anchor,
                        "pattern": ext,
                        "found": found,
                    }
    return True, None


# ---------------------------------------------------------------------------
# absorbing partitions


@dataclass
class AbsorbingPartition:
    approx: LimitApprox
    A: frozenset[int]
    level: int

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(range(self.approx.top.n)) - self.A

    def side_of(self, x: int) -> str:
        return "A" if x in self.A else "Ac"

    def swap(self) -> "AbsorbingPartition":
        return AbsorbingPartition(self.approx, self.complement, self.level)


def verify_absorbing(partition: AbsorbingPartition):
    """Both sides must realize every nontrivial type over every anchor of
    the previous stage; returns (ok, first violated obligation)."""
    approx = partition.approx
    top = approx.top
    host = approx.previous
    A = partition.A
    for anchor in _anchors(host.n, partition.level):
        anchored, _ = induced_substructure(host, anchor)
        for ext in approx.oracle.one_point_extensions(anchored):
            zs = _realizations(top, anchor, ext)
            in_a = [z for z in zs if z in A]
            in_c = [z for z in zs if z not in A]
            if not in_a or not in_c:
                return False, {
                    "anchor": anchor,
                    "pattern": ext,
                    "realizations": zs,
                    "missing_side": "A" if not in_a else "Ac",
                }
    return True, None


def build_absorbing_partition(
    approx: LimitApprox, blocks: list[list[int]] | None = None
) -> AbsorbingPartition:
    """Deterministic two-coloring splitting every type's realizations.

    With `blocks` given, alternates within each block (keeps blocks
    balanced for the extension algorithm); otherwise greedy: each
    obligation claims one unassigned realization per side, leftovers
    alternate globally.
    """
    if approx.multiplicity < 2:
        raise ConstructionError("absorbing partitions need multiplicity >= 2")
    top = approx.top
    if blocks is not None:
        side: dict[int, str] = {}
        for blk in blocks:
            for pos, x in enumerate(sorted(blk)):
                side[x] = "A" if pos % 2 == 0 else "Ac"
        if len(side) != top.n:
            raise StructureError("blocks must partition the stage")
        partition = AbsorbingPartition(
            approx, frozenset(x for x, s in side.items() if s == "A"), approx.k
        )
        ok, failure = verify_absorbing(partition)
        if not ok:
            raise ConstructionError(f"block coloring is not absorbing: {failure}")
        return partition

    host = approx.previous
    side = {}
    obligations = []
    for anchor, ext in _anchored_types(approx.oracle, host, approx.k):
        zs = _realizations(top, anchor, ext)
        obligations.append((len(zs), anchor, ext._interp_key(), zs))
    # tightest obligations first so big sets cannot starve two-point ones
    obligations.sort(key=lambda o: (o[0], o[1], o[2]))
    for _, anchor, _, zs in obligations:
        hit_a = any(side.get(z) == "A" for z in zs)
        hit_c = any(side.get(z) == "Ac" for z in zs)
        free = [z for z in zs if z not in side]
        if not hit_a:
            if not free:
                raise ConstructionError(
                    f"greedy coloring stuck on anchor {anchor}: no free realization"
                )
            side[free.pop(0)] = "A"
        if not hit_c:
            if not free:
                raise ConstructionError(
                    f"greedy coloring stuck on anchor {anchor}: no free realization"
                )
            side[free.pop(0)] = "Ac"
    parity = 0
    for x in range(top.n):
        if x not in side:
            side[x] = "A" if parity % 2 == 0 else "Ac"
            parity += 1
    partition = AbsorbingPartition(
        approx, frozenset(x for x, s in side.items() if s == "A"), approx.k
    )
    ok, failure = verify_absorbing(partition)
    if not ok:
        raise ConstructionError(f"greedy coloring is not absorbing: {failure}")
    return partition


# ---------------------------------------------------------------------------
# back-and-forth between the induced structure on A and the previous stage


@dataclass
class BackAndForthResult:
    map: PartialMap
    rounds_completed: int
    requested: int

    @property
    def complete(self) -> bool:
        return self.rounds_completed >= self.requested


def back_and_forth(partition: AbsorbingPartition, rounds: int) -> BackAndForthResult:
    """Grow a partial isomorphism from the structure induced on A onto the
    previous stage, alternating domain and range extensions.

    Every prefix is an embedding; stops honestly when no extension exists
    inside the finite stage.
    """
    approx = partition.approx
    top = approx.top
    prev = approx.previous
    A = sorted(partition.A)
    pairs: dict[int, int] = {}
    done = 0
    for r in range(rounds):
        forward = r % 2 == 0
        extended = False
        if forward:
            for a in A:
                if a in pairs:
                    continue
                for b in range(prev.n):
                    if b in pairs.values():
                        continue
                    trial = dict(pairs)
                    trial[a] = b
                    if is_embedding(top, top, trial):
                        pairs[a] = b
                        extended = True
                        break
                break
        else:
            inv = {b: a for a, b in pairs.items()}
            for b in range(prev.n):
                if b in inv:
                    continue
                for a in A:
                    if a in pairs:
                        continue
                    trial = dict(pairs)
                    trial[a] = b
                    if is_embedding(top, top, trial):
                        pairs[a] = b
                        extended = True
                        break
                break
        if not extended:
            break
        done += 1
    result = PartialMap(top, prev, pairs, kind="embedding")
    return BackAndForthResult(map=result, rounds_completed=done, requested=rounds)
