"""The extension game on absorbing partitions, both branches.

Splitting side: Player II's strategy rules out one candidate global
extension per round, each exclusion backed by an exhaustively checked
certificate.  Non-splitting side: the blockwise algorithm extending any
partial isomorphism of the distinguished set to a verified automorphism
of the whole stage.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .limits import AbsorbingPartition
from .oracles import ClassOracle
from .splitting import ClassData, SplitWitness, find_split_witness, witness_for
from .structures import (
    FinStructure,
    PartialMap,
    StructureError,
    extends_to_automorphism,
    find_embeddings,
    induced_substructure,
    is_embedding,
)

__all__ = [
    "GameError",
    "GameAborted",
    "GameState",
    "GameRound",
    "GameTranscript",
    "new_game",
    "splitter_reply",
    "run_auto_game",
    "check_exclusion",
    "extend_partial_isomorphism",
    "ExtensionResult",
]


class GameError(StructureError):
    """Illegal move; carries the violating tuple when there is one."""

    def __init__(self, message, violating=None):
        super().__init__(message)
        self.violating = violating


class GameAborted(RuntimeError):
    """Finite-stage budget ran out; the partial transcript is attached."""

    def __init__(self, reason, transcript=None):
        super().__init__(reason)
        self.reason = reason
        self.transcript = transcript


# ---------------------------------------------------------------------------
# the candidate list {g_k}


class CandidateList:
    """Partial isomorphisms of the stage with domain containing the fixed
    copy of C, size-capped, that extend to a stage automorphism and map
    the A side into B and the complement into the complement.

    Generated lazily in canonical order (domain size, domain, images).
    """

    def __init__(self, stage: FinStructure, c_star, cap: int, A, B):
        self.stage = stage
        self.c_star = tuple(c_star)
        self.cap = cap
        self.A = frozenset(A)
        self.B = frozenset(B)
        self.items: list[dict[int, int]] = []
        self._orbits: dict[int, list[int]] = {}
        self._gen = self._generate()
        self.exhausted = False

    def _respects_sides(self, pairs: dict[int, int]) -> bool:
        for x, y in pairs.items():
            if (x in self.A) != (y in self.B):
                return False
        return True

    def _candidate_domains(self):
        import itertools

        base = set(self.c_star)
        rest = [x for x in range(self.stage.n) if x not in base]
        for extra in range(0, self.cap - len(base) + 1):
            for S in itertools.combinations(rest, extra):
                yield tuple(sorted(base | set(S)))

    def _point_orbit(self, x: int) -> list[int]:
        orbit = self._orbits.get(x)
        if orbit is None:
            orbit = [
                y
                for y in range(self.stage.n)
                if extends_to_automorphism(self.stage, {x: y}) is not None
            ]
            self._orbits[x] = orbit
        return orbit

    def _generate(self):
        import itertools

        for dom in self._candidate_domains():
            # necessary condition: each image lies in its point's orbit
            image_pools = [self._point_orbit(x) for x in dom]
            for images in itertools.product(*image_pools):
                if len(set(images)) != len(images):
                    continue
                pairs = dict(zip(dom, images))
                if not self._respects_sides(pairs):
                    continue
                if not is_embedding(self.stage, self.stage, pairs):
                    continue
                # a single orbit-checked point is already extendable
                if len(pairs) > 1 and extends_to_automorphism(self.stage, pairs) is None:
                    continue
                yield pairs

    def get(self, k: int) -> dict[int, int] | None:
        while len(self.items) <= k and not self.exhausted:
            try:
                self.items.append(next(self._gen))
            except StopIteration:
                self.exhausted = True
        return self.items[k] if k < len(self.items) else None

    def materialize(self, limit: int = 100000) -> list[dict[int, int]]:
        k = 0
        while self.get(k) is not None and k < limit:
            k += 1
        return list(self.items)


# ---------------------------------------------------------------------------
# game state and transcripts


@dataclass
class GameRound:
    move: dict[int, int]
    k_n: int | None
    g_k: dict[int, int] | None
    witness: SplitWitness | None
    new_a: list[int]
    new_b: list[int]
    reply: dict[int, int]
    bf_added: dict[int, int]
    certificate: dict | None

    def to_dict(self) -> dict:
        from .serialize import witness_to_dict

        return {
            "move": sorted(self.move.items()),
            "k_n": self.k_n,
            "g_k": sorted(self.g_k.items()) if self.g_k is not None else None,
            "witness": witness_to_dict(self.witness) if self.witness else None,
            "new_a": list(self.new_a),
            "new_b": list(self.new_b),
            "reply": sorted(self.reply.items()),
            "bf_added": sorted(self.bf_added.items()),
            "certificate": self.certificate,
        }


@dataclass
class GameTranscript:
    oracle_name: str
    stage: FinStructure
    A: tuple[int, ...]
    B: tuple[int, ...]
    C: FinStructure
    c_star: tuple[int, ...]
    cap: int
    slack: int
    policy: str | None
    seed: int | None
    rounds: list[GameRound] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    def final_map(self) -> dict[int, int]:
        return dict(self.rounds[-1].reply) if self.rounds else {}

    def excluded_indices(self) -> list[int]:
        return [r.k_n for r in self.rounds if r.k_n is not None]


class GameState:
    """Exclusively owned by one session; moves mutate it."""

    def __init__(
        self,
        partitionA: AbsorbingPartition,
        splitting_C: FinStructure,
        partitionB: AbsorbingPartition | None = None,
        cap: int | None = None,
        slack: int = 1,
    ):
        self.partitionA = partitionA
        self.partitionB = partitionB or partitionA
        if self.partitionB.approx.top != partitionA.approx.top:
            raise StructureError("both partitions must live on the same stage")
        self.stage = partitionA.approx.top
        self.oracle: ClassOracle = partitionA.approx.oracle
        self.A = frozenset(partitionA.A)
        self.B = frozenset(self.partitionB.A)
        self.C = splitting_C
        self.slack = slack

        probe = find_split_witness(self.oracle, splitting_C, max(2, splitting_C.n + 1), slack)
        if not probe.splits:
            raise StructureError(
                f"oracle {self.oracle.name} does not split at the probe bound; "
                "the strategy needs a splitting structure"
            )

        complement, _ = induced_substructure(self.stage, sorted(set(range(self.stage.n)) - self.A))
        rev = sorted(set(range(self.stage.n)) - self.A)
        embs = find_embeddings(splitting_C, complement, limit=1)
        if not embs:
            raise StructureError(
                "the complement hosts no copy of C: partition is not absorbing enough"
            )
        self.c_star = tuple(rev[embs[0].pairs[c]] for c in range(splitting_C.n))
        self.cap = cap if cap is not None else max(1, len(self.c_star))
        self.g_list = CandidateList(self.stage, self.c_star, self.cap, self.A, self.B)
        self.replies: list[dict[int, int]] = [{}]
        self.excluded: list[int] = []
        self.rounds: list[GameRound] = []

    @property
    def last_reply(self) -> dict[int, int]:
        return self.replies[-1]

    def used_points(self) -> set[int]:
        used = set(self.c_star)
        for r in self.rounds:
            used |= set(r.reply) | set(r.reply.values())
        return used

    def transcript(self, policy=None, seed=None, aborted=False, reason="") -> GameTranscript:
        return GameTranscript(
            oracle_name=self.oracle.name,
            stage=self.stage,
            A=tuple(sorted(self.A)),
            B=tuple(sorted(self.B)),
            C=self.C,
            c_star=self.c_star,
            cap=self.cap,
            slack=self.slack,
            policy=policy,
            seed=seed,
            rounds=list(self.rounds),
            aborted=aborted,
            abort_reason=reason,
        )


def new_game(
    partitionA: AbsorbingPartition,
    splitting_C: FinStructure,
    partitionB: AbsorbingPartition | None = None,
    cap: int | None = None,
    slack: int = 1,
) -> GameState:
    return GameState(partitionA, splitting_C, partitionB, cap, slack)


# ---------------------------------------------------------------------------
# player II's reply


def _merge(a: dict[int, int], b: dict[int, int]) -> dict[int, int] | None:
    out = dict(a)
    for x, y in b.items():
        if out.get(x, y) != y:
            return None
        out[x] = y
    if len(set(out.values())) != len(out):
        return None
    return out


def _compatible(stage: FinStructure, g: dict[int, int], h: dict[int, int]) -> bool:
    """Plain compatibility: the union is again a partial isomorphism."""
    u = _merge(g, h)
    return u is not None and is_embedding(stage, stage, u)


def validate_move(state: GameState, move: dict[int, int]) -> None:
    """Moves are partial isomorphisms A -> B extending the last reply."""
    last = state.last_reply
    for x, y in last.items():
        if move.get(x) != y:
            raise GameError(f"move must extend the last reply ({x}->{y} lost)")
    if len(set(move.values())) != len(move):
        raise GameError("move is not injective")
    for x, y in move.items():
        if x not in state.A:
            raise GameError(f"domain point {x} is outside A", violating=("side", (x,)))
        if y not in state.B:
            raise GameError(f"image point {y} is outside B", violating=("side", (y,)))
    from .structures import _embedding_violation

    ok, viol = _embedding_violation(state.stage, state.stage, move)
    if not ok:
        raise GameError(f"move is not a partial isomorphism: {viol}", violating=viol)


def _realize_pattern(
    stage: FinStructure,
    ext: FinStructure,
    placed: dict[int, int],
    w: int,
    pool,
    banned: set[int],
) -> int | None:
    """Least stage point in `pool` realizing ext's point `w` over the
    placement `placed` (ext label -> stage point)."""
    for z in sorted(pool):
        if z in banned:
            continue
        trial = dict(placed)
        trial[w] = z
        if _placement_ok(stage, ext, trial, w):
            return z
    return None


def _placement_ok(stage, ext, placed, w) -> bool:
    for name, arity in ext.signature.symbols:
        if arity == 1:
            if ext.holds(name, (w,)) != stage.holds(name, (placed[w],)):
                return False
            continue
        if arity == 2:
            for v in placed:
                for t in ((w, v), (v, w)):
                    img = (placed[t[0]], placed[t[1]])
                    if ext.holds(name, t) != stage.holds(name, img):
                        return False
            continue
        import itertools

        for t in itertools.product(list(placed), repeat=arity):
            if w not in t:
                continue
            img = tuple(placed[e] for e in t)
            if ext.holds(name, t) != stage.holds(name, img):
                return False
    return True


_DEGREE_CACHE: dict[FinStructure, list[int]] = {}


def _degree(stage: FinStructure, z: int) -> int:
    """Total relational load of a point (incident tuples)."""
    degs = _DEGREE_CACHE.get(stage)
    if degs is None:
        degs = [0] * stage.n
        for name, tuples in stage.interp.items():
            for t in tuples:
                for e in set(t):
                    degs[e] += 1
        _DEGREE_CACHE[stage] = degs
    return degs[z]


def _pattern_extension(
    stage: FinStructure, D_struct: FinStructure, point_of_label: dict[int, int], z: int
) -> FinStructure:
    """The one-point extension pattern of stage point z over the labeled
    domain (label -> stage point)."""
    star = D_struct.n
    new: dict[str, set] = {}
    for name, arity in stage.signature.symbols:
        ts = set()
        if arity == 1:
            if stage.holds(name, (z,)):
                ts.add((star,))
        else:
            import itertools

            labels = list(range(D_struct.n)) + [star]

            def pt(lab):
                return z if lab == star else point_of_label[lab]

            for t in itertools.product(labels, repeat=arity):
                if star not in t:
                    continue
                if stage.holds(name, tuple(pt(e) for e in t)):
                    ts.add(t)
        new[name] = ts
    return D_struct.with_point(new)


def _agree_off_c(p1: FinStructure, p2: FinStructure, c_labels: set[int]) -> bool:
    """Extensions agree on every new-point tuple avoiding the C labels."""
    star = p1.n - 1
    for name in p1.signature.names:
        for t in p1.interp[name] ^ p2.interp[name]:
            if star in t and not any(e in c_labels for e in t):
                return False
    return True


def _joint_witness(state: GameState, g_union: dict[int, int], used: set[int]):
    """Find stage points z1 (A side) and z2 (B side) whose patterns over
    the merged domain agree off the C copy but differ on it; package the
    pair as a split witness realized in the stage."""
    stage = state.stage
    D_set = sorted(g_union)
    D_struct, relab = induced_substructure(stage, D_set)
    inv = {v: k for k, v in relab.items()}
    image_of_label = {lab: g_union[inv[lab]] for lab in range(D_struct.n)}
    c_labels = {relab[c] for c in state.c_star}
    i = PartialMap(
        state.C,
        D_struct,
        {c: relab[state.c_star[c]] for c in range(state.C.n)},
        kind="embedding",
    )
    def richness(p: FinStructure) -> int:
        star = p.n - 1
        return sum(1 for name in p.signature.names for t in p.interp[name] if star in t)

    pool_a = [z for z in sorted(state.A) if z not in used]
    pool_b = [z for z in sorted(state.B) if z not in used]
    # scan sparse patterns and structurally light points first: the
    # canonical witness toggles one tuple on an otherwise unrelated fresh
    # point, and frugal pairs keep later candidates alive
    pats_a = sorted(
        ((z, _pattern_extension(stage, D_struct, inv, z)) for z in pool_a),
        key=lambda zp: (richness(zp[1]), _degree(stage, zp[0]), zp[0]),
    )
    pats_b = sorted(
        ((z, _pattern_extension(stage, D_struct, image_of_label, z)) for z in pool_b),
        key=lambda zp: (richness(zp[1]), _degree(stage, zp[0]), zp[0]),
    )
    for z1, p1 in pats_a:
        for z2, p2 in pats_b:
            if z2 == z1:
                continue
            if p1 == p2 or not _agree_off_c(p1, p2, c_labels):
                continue
            viol = None
            for name in p1.signature.names:
                diffs = sorted(p1.interp[name] ^ p2.interp[name])
                if diffs:
                    t = diffs[0]
                    viol = (name, t, 1 if t in p1.interp[name] else 2)
                    break
            incl = {d: d for d in range(D_struct.n)}
            witness = SplitWitness(
                C=state.C,
                D=D_struct,
                i=i,
                D1=p1,
                D2=p2,
                j1=PartialMap(D_struct, p1, incl, kind="embedding"),
                j2=PartialMap(D_struct, p2, incl, kind="embedding"),
                f={x: x for x in range(p1.n)},
                violating=viol,
            )
            return witness, z1, z2
    return None


def splitter_reply(state: GameState, move: dict[int, int]) -> GameRound:
    """One strategy round: pick the least compatible candidate, realize a
    split witness inside both sides, reply, certify the exclusion."""
    validate_move(state, move)
    stage = state.stage

    k_n = None
    g_k = None
    k = 0
    while True:
        cand = state.g_list.get(k)
        if cand is None:
            break
        if k not in state.excluded and _compatible(stage, cand, move):
            k_n, g_k = k, cand
            break
        k += 1
    if k_n is None:
        # every candidate is already incompatible with the move: the
        # strategy has won outright; reply by growing the map and certify
        # the blanket exclusion
        reply = dict(move)
        bf_added = _back_and_forth_step(state, reply)
        reply.update(bf_added)
        certificate = _blanket_certificate(state, reply)
        if not certificate["all_incompatible"]:
            raise AssertionError("blanket exclusion certificate failed")
        round_ = GameRound(
            move=dict(move),
            k_n=None,
            g_k=None,
            witness=None,
            new_a=[],
            new_b=[],
            reply=dict(reply),
            bf_added=bf_added,
            certificate=certificate,
        )
        state.replies.append(dict(reply))
        state.rounds.append(round_)
        return round_

    g_union = _merge(g_k, move)
    assert g_union is not None
    used = state.used_points() | set(move) | set(move.values()) | set(g_union) | set(
        g_union.values()
    )
    found = _joint_witness(state, g_union, used)
    if found is None:
        raise GameAborted(
            "absorption budget exhausted: no realized witness pair",
            state.transcript(aborted=True, reason="witness realization failed"),
        )
    w, z1, z2 = found
    new_a, new_b = [z1], [z2]

    tilde_f = dict(g_union)
    tilde_f[z1] = z2
    reply = {x: y for x, y in tilde_f.items() if x in state.A}
    if not is_embedding(stage, stage, reply):
        raise AssertionError("strategy produced an illegal reply")

    bf_added = _back_and_forth_step(state, reply)
    reply.update(bf_added)

    certificate = _exclusion_certificate(state, reply, k_n, g_k)
    if not certificate["all_incompatible"]:
        raise AssertionError("exclusion certificate failed: strategy bug")

    round_ = GameRound(
        move=dict(move),
        k_n=k_n,
        g_k=dict(g_k),
        witness=w,
        new_a=new_a,
        new_b=new_b,
        reply=dict(reply),
        bf_added=bf_added,
        certificate=certificate,
    )
    state.excluded.append(k_n)
    state.replies.append(dict(reply))
    state.rounds.append(round_)
    return round_


def _back_and_forth_step(state: GameState, reply: dict[int, int]) -> dict[int, int]:
    """Alternating one-point domain/range coverage; skipped when the stage
    offers no extension.  Color-matched partners are preferred so the
    chain stays close to automorphic pairs."""
    from .structures import _refined_colors

    stage = state.stage
    colors = _refined_colors(stage)
    forward = len(state.rounds) % 2 == 0

    def cover_order(points):
        return sorted(points, key=lambda x: (_degree(stage, x), x))

    def partners(x, pool):
        same = [p for p in pool if colors[p] == colors[x]]
        rest = [p for p in pool if colors[p] != colors[x]]
        return same + rest

    if forward:
        for a in cover_order(state.A):
            if a in reply:
                continue
            pool = cover_order(b for b in state.B if b not in reply.values())
            for b in partners(a, pool):
                trial = dict(reply)
                trial[a] = b
                if is_embedding(stage, stage, trial):
                    return {a: b}
            return {}
    else:
        taken = set(reply.values())
        for b in cover_order(state.B):
            if b in taken:
                continue
            pool = cover_order(a for a in state.A if a not in reply)
            for a in partners(b, pool):
                trial = dict(reply)
                trial[a] = b
                if is_embedding(stage, stage, trial):
                    return {a: b}
            return {}
    return {}


def _exclusion_certificate(state: GameState, reply: dict[int, int], k_n: int, g_k) -> dict:
    """Exhaustive check: no partial-isomorphism extension of the reply
    defined on all of C* is compatible with the excluded candidate."""
    import itertools

    stage = state.stage
    checked = 0
    witnesses_ok = True
    offending = None
    free = [x for x in range(stage.n) if x not in reply.values()]
    for images in itertools.permutations(free, len(state.c_star)):
        H = dict(reply)
        clash = False
        for c, y in zip(state.c_star, images):
            if c in H and H[c] != y:
                clash = True
                break
            H[c] = y
        if clash or len(set(H.values())) != len(H):
            continue
        if not is_embedding(stage, stage, H):
            continue
        checked += 1
        u = _merge(H, g_k)
        if u is not None and is_embedding(stage, stage, u):
            witnesses_ok = False
            offending = sorted(H.items())
            break
    return {
        "kind": "exclusion",
        "k_n": k_n,
        "g_k": sorted(g_k.items()),
        "extensions_checked": checked,
        "all_incompatible": witnesses_ok,
        "offending_extension": offending,
    }


def _blanket_certificate(state: GameState, reply: dict[int, int]) -> dict:
    """Exhaustive check: every unexcluded candidate in the (finite,
    capped) list is incompatible with the reply already."""
    stage = state.stage
    checked = 0
    all_incompatible = True
    offending = None
    k = 0
    while True:
        cand = state.g_list.get(k)
        if cand is None:
            break
        if k not in state.excluded:
            checked += 1
            if _compatible(stage, cand, reply):
                all_incompatible = False
                offending = k
                break
        k += 1
    return {
        "kind": "all-incompatible",
        "candidates_checked": checked,
        "all_incompatible": all_incompatible,
        "offending_candidate": offending,
    }


# ---------------------------------------------------------------------------
# auto-play policies


def _policy_minimal(state: GameState, rng) -> dict[int, int]:
    return dict(state.last_reply)


def _policy_random(state: GameState, rng) -> dict[int, int]:
    move = dict(state.last_reply)
    for _ in range(rng.randint(0, 2)):
        candidates_a = [a for a in sorted(state.A) if a not in move]
        rng.shuffle(candidates_a)
        extended = False
        for a in candidates_a:
            bs = [b for b in sorted(state.B) if b not in move.values()]
            rng.shuffle(bs)
            for b in bs:
                trial = dict(move)
                trial[a] = b
                if is_embedding(state.stage, state.stage, trial):
                    move[a] = b
                    extended = True
                    break
            if extended:
                break
    return move


def _policy_adversarial(state: GameState, rng) -> dict[int, int]:
    """Stresses the strategy by steering toward the first candidate."""
    move = dict(state.last_reply)
    g0 = state.g_list.get(0)
    if g0 is None:
        return move
    for x, y in sorted(g0.items()):
        if x not in state.A or y not in state.B:
            continue
        if x in move or y in move.values():
            continue
        trial = dict(move)
        trial[x] = y
        if is_embedding(state.stage, state.stage, trial):
            move[x] = y
    return move


POLICIES = {
    "minimal-legal": _policy_minimal,
    "random": _policy_random,
    "adversarial-toward-g0": _policy_adversarial,
}


def run_auto_game(
    state: GameState, rounds: int, policy: str = "minimal-legal", seed: int | None = None
) -> GameTranscript:
    """Alternate policy moves and strategy replies for `rounds` rounds."""
    if rounds < 0:
        raise StructureError("rounds must be >= 0")
    if policy not in POLICIES:
        raise StructureError(f"unknown policy {policy!r}")
    rng = random.Random(seed)
    fn = POLICIES[policy]
    for _ in range(rounds):
        move = fn(state, rng)
        try:
            splitter_reply(state, move)
        except GameAborted as stop:
            return stop.transcript
    return state.transcript(policy=policy, seed=seed)


# ---------------------------------------------------------------------------
# replay verification


def rebuild_state(transcript: GameTranscript) -> GameState:
    """Reconstruct the strategy's inputs from a transcript."""
    from .limits import AbsorbingPartition, LimitApprox
    from .oracles import get_oracle

    oracle = get_oracle(transcript.oracle_name)
    approx = LimitApprox(
        oracle=oracle, stages=[transcript.stage], k=1, multiplicity=2
    )
    partA = AbsorbingPartition(approx, frozenset(transcript.A), approx.k)
    partB = AbsorbingPartition(approx, frozenset(transcript.B), approx.k)
    state = GameState(
        partA, transcript.C, partB, cap=transcript.cap, slack=transcript.slack
    )
    if state.c_star != transcript.c_star:
        raise StructureError("replay disagrees on the C* realization")
    return state


def check_exclusion(transcript: GameTranscript) -> tuple[bool, str]:
    """Replay the strategy on the recorded moves and re-derive every
    certificate; True iff the transcript reproduces byte-for-byte."""
    try:
        state = rebuild_state(transcript)
    except StructureError as err:
        return False, f"rebuild failed: {err}"
    for idx, recorded in enumerate(transcript.rounds):
        try:
            replayed = splitter_reply(state, dict(recorded.move))
        except (GameError, GameAborted) as err:
            return False, f"round {idx}: replay stopped ({err})"
        if replayed.to_dict() != recorded.to_dict():
            return False, f"round {idx}: replay diverges from the recorded round"
    return True, "replay matches"


# ---------------------------------------------------------------------------
# the extension algorithm (non-splitting side)


@dataclass
class ExtensionResult:
    total_map: dict[int, int]
    class_map: dict[int, int]
    extended_g: dict[int, int]
    is_automorphism: bool
    violating: tuple | None


def extend_partial_isomorphism(
    partitionA: AbsorbingPartition,
    partitionB: AbsorbingPartition | None,
    g: dict[int, int],
    class_data: ClassData,
) -> ExtensionResult:
    """Extend a partial isomorphism of the A side to a total stage map,
    blockwise on the complement, and verify it is an automorphism."""
    stage = partitionA.approx.top
    A = frozenset(partitionA.A)
    B = frozenset((partitionB or partitionA).A)
    classes = class_data.partition
    if class_data.stage != stage:
        raise StructureError("class data belongs to a different stage")

    g = dict(g)
    if len(set(g.values())) != len(g):
        raise StructureError("g is not injective")
    for x, y in g.items():
        if x not in A or y not in B:
            raise StructureError("g must map the A side into the B side")
    if not is_embedding(stage, stage, g):
        raise StructureError("g is not a partial isomorphism")

    def class_of(x: int) -> int:
        return class_data.class_of(x)

    # pin the induced class map, extending g canonically where needed
    class_map: dict[int, int] = {}
    for ci, cls in enumerate(classes):
        in_a = [x for x in cls if x in A]
        if not in_a:
            raise StructureError(f"class {ci} misses the A side: unbalanced partition")
        anchor = next((x for x in in_a if x in g), None)
        if anchor is None:
            anchor = in_a[0]
            image = None
            for b in sorted(B):
                if b in g.values():
                    continue
                trial = dict(g)
                trial[anchor] = b
                if is_embedding(stage, stage, trial):
                    image = b
                    break
            if image is None:
                raise StructureError(f"cannot extend g over class {ci}")
            g[anchor] = image
        class_map[ci] = class_of(g[anchor])

    if sorted(class_map.values()) != sorted(range(len(classes))):
        raise StructureError("induced class map is not a permutation")
    for x, y in g.items():
        if class_map[class_of(x)] != class_of(y):
            raise StructureError("g does not respect the classes")

    total = dict(g)
    for ci, cls in enumerate(classes):
        ti = class_map[ci]
        tgt = classes[ti]
        src_a = [x for x in cls if x in A and x not in total]
        dst_a = [y for y in tgt if y in B and y not in total.values()]
        if len(src_a) > len(dst_a):
            raise StructureError(f"cardinality mismatch on the A side of class {ci}")
        for x, y in zip(src_a, dst_a):
            total[x] = y
        src_c = [x for x in cls if x not in A]
        dst_c = [y for y in tgt if y not in B]
        if len(src_c) != len(dst_c):
            raise StructureError(
                f"cardinality mismatch between block complements ({ci} -> {ti})"
            )
        for x, y in zip(src_c, dst_c):
            total[x] = y

    if sorted(total) != list(range(stage.n)) or sorted(total.values()) != list(
        range(stage.n)
    ):
        raise StructureError("extension is not a bijection of the stage")

    from .structures import _embedding_violation

    ok, viol = _embedding_violation(stage, stage, total)
    return ExtensionResult(
        total_map=total,
        class_map=class_map,
        extended_g=g,
        is_automorphism=ok,
        violating=viol,
    )
