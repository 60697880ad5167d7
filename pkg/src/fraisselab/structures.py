"""Finite relational structures over countable relational signatures.

Everything downstream (class oracles, splitting certificates, limit stages,
games) moves through the three currencies defined here: `FinStructure`,
`PartialMap` and `RqfType`.  All operations are pure; structures are
immutable after construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

__all__ = [
    "StructureError",
    "Signature",
    "FinStructure",
    "PartialMap",
    "RqfType",
    "induced_substructure",
    "find_embeddings",
    "is_embedding",
    "find_isomorphism",
    "are_isomorphic",
    "canonical_form",
    "enumerate_rqf_types",
    "generic_one_point_extensions",
    "extends_to_automorphism",
]


class StructureError(ValueError):
    """Raised on malformed structures, maps or out-of-range elements."""


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class Signature:
    """Ordered list of relation symbols.  Names distinct, arities >= 1."""

    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.symbols]
        if len(set(names)) != len(names):
            raise StructureError("duplicate symbol names in signature")
        for name, arity in self.symbols:
            if not isinstance(arity, int) or arity < 1:
                raise StructureError(f"symbol {name!r} has invalid arity {arity!r}")

    @staticmethod
    def make(*symbols: tuple[str, int]) -> "Signature":
        return Signature(tuple(symbols))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.symbols)

    def arity(self, name: str) -> int:
        for sym, ar in self.symbols:
            if sym == name:
                return ar
        raise StructureError(f"unknown symbol {name!r}")

    @property
    def unary_names(self) -> tuple[str, ...]:
        return tuple(n for n, a in self.symbols if a == 1)

    @property
    def binary_names(self) -> tuple[str, ...]:
        return tuple(n for n, a in self.symbols if a == 2)

    @property
    def max_arity(self) -> int:
        return max((a for _, a in self.symbols), default=0)


EMPTY_SIGNATURE = Signature(())


# ---------------------------------------------------------------------------
# finite structures


class FinStructure:
    """A finite relational structure on domain {0, ..., n-1}.

    Interpretations are stored as frozensets of tuples; unary and binary
    symbols are additionally cached as bitmask labels so that embedding
    search runs on integer comparisons.
    """

    __slots__ = (
        "signature",
        "n",
        "interp",
        "_unary_mask",
        "_pair_mask",
        "_hash",
    )

    def __init__(self, signature: Signature, n: int, interp: dict | None = None):
        if n < 0:
            raise StructureError("domain size must be >= 0")
        interp = interp or {}
        clean: dict[str, frozenset] = {}
        known = set(signature.names)
        for name, tuples in interp.items():
            if name not in known:
                raise StructureError(f"interpretation for unknown symbol {name!r}")
            arity = signature.arity(name)
            tset = set()
            for t in tuples:
                t = tuple(t)
                if len(t) != arity:
                    raise StructureError(f"tuple {t} has wrong length for {name!r}")
                if any((not isinstance(e, int)) or e < 0 or e >= n for e in t):
                    raise StructureError(f"tuple {t} out of range for n={n}")
                tset.add(t)
            clean[name] = frozenset(tset)
        for name in signature.names:
            clean.setdefault(name, frozenset())
        self.signature = signature
        self.n = n
        self.interp = clean

        unary = [0] * n
        for ui, name in enumerate(signature.unary_names):
            for (x,) in clean[name]:
                unary[x] |= 1 << ui
        self._unary_mask = tuple(unary)

        pair: dict[tuple[int, int], int] = {}
        for bi, name in enumerate(signature.binary_names):
            for (x, y) in clean[name]:
                pair[(x, y)] = pair.get((x, y), 0) | (1 << bi)
        self._pair_mask = pair
        self._hash = hash((signature, n, self._interp_key()))

    # -- identity ----------------------------------------------------------

    def _interp_key(self):
        return tuple(
            (name, tuple(sorted(self.interp[name]))) for name in self.signature.names
        )

    def __eq__(self, other):
        return (
            isinstance(other, FinStructure)
            and self.signature == other.signature
            and self.n == other.n
            and self.interp == other.interp
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        rels = ", ".join(
            f"{name}:{sorted(self.interp[name])}"
            for name in self.signature.names
            if self.interp[name]
        )
        return f"FinStructure(n={self.n}, {rels})"

    # -- queries -----------------------------------------------------------

    def holds(self, name: str, t: tuple[int, ...]) -> bool:
        return tuple(t) in self.interp[name]

    def unary_mask(self, x: int) -> int:
        return self._unary_mask[x]

    def pair_mask(self, x: int, y: int) -> int:
        return self._pair_mask.get((x, y), 0)

    def elements(self) -> range:
        return range(self.n)

    def tuples_sorted(self, name: str) -> list[tuple[int, ...]]:
        return sorted(self.interp[name])

    # -- constructions -----------------------------------------------------

    def relabel(self, mapping: dict[int, int], new_n: int | None = None) -> "FinStructure":
        """Apply an injective relabeling `old -> new` to every tuple."""
        if new_n is None:
            new_n = self.n
        interp = {
            name: [tuple(mapping[e] for e in t) for t in tuples]
            for name, tuples in self.interp.items()
        }
        return FinStructure(self.signature, new_n, interp)

    def with_point(self, new_tuples: dict[str, set]) -> "FinStructure":
        """Extend by one fresh element `n`; `new_tuples` holds the tuples involving it."""
        interp = {name: set(tuples) for name, tuples in self.interp.items()}
        for name, ts in new_tuples.items():
            interp.setdefault(name, set()).update(tuple(t) for t in ts)
        return FinStructure(self.signature, self.n + 1, interp)


# ---------------------------------------------------------------------------
# induced substructures


def induced_substructure(S: FinStructure, subset) -> tuple[FinStructure, dict[int, int]]:
    """Restrict `S` to `subset`.

    Returns the restricted structure together with the order-preserving
    relabeling `old element -> new element`.
    """
    subset = sorted(set(subset))
    for x in subset:
        if x < 0 or x >= S.n:
            raise StructureError(f"element {x} out of range")
    relabel = {x: i for i, x in enumerate(subset)}
    keep = set(subset)
    interp = {
        name: [tuple(relabel[e] for e in t) for t in tuples if all(e in keep for e in t)]
        for name, tuples in S.interp.items()
    }
    return FinStructure(S.signature, len(subset), interp), relabel


# ---------------------------------------------------------------------------
# partial maps


class PartialMap:
    """An injective partial map between two structures.

    With kind="embedding" the constructor checks the full embedding
    invariant: every tuple over the domain holds iff its image holds.
    """

    __slots__ = ("source", "target", "pairs", "kind")

    def __init__(self, source: FinStructure, target: FinStructure, pairs, kind: str = "raw"):
        if kind not in ("raw", "embedding"):
            raise StructureError(f"unknown map kind {kind!r}")
        pairs = dict(pairs)
        for a, b in pairs.items():
            if a < 0 or a >= source.n:
                raise StructureError(f"source element {a} out of range")
            if b < 0 or b >= target.n:
                raise StructureError(f"target element {b} out of range")
        if len(set(pairs.values())) != len(pairs):
            raise StructureError("map is not injective")
        self.source = source
        self.target = target
        self.pairs = pairs
        self.kind = kind
        if kind == "embedding":
            ok, viol = _embedding_violation(source, target, pairs)
            if not ok:
                raise StructureError(f"embedding invariant fails on {viol}")

    # -- basics ------------------------------------------------------------

    @property
    def dom(self) -> tuple[int, ...]:
        return tuple(sorted(self.pairs))

    @property
    def ran(self) -> tuple[int, ...]:
        return tuple(sorted(self.pairs.values()))

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        return (
            isinstance(other, PartialMap)
            and self.source == other.source
            and self.target == other.target
            and self.pairs == other.pairs
        )

    def __hash__(self):
        return hash((self.source, self.target, tuple(sorted(self.pairs.items()))))

    def __repr__(self):
        body = ", ".join(f"{a}->{b}" for a, b in sorted(self.pairs.items()))
        return f"PartialMap({{{body}}}, kind={self.kind})"

    def apply(self, x: int) -> int:
        return self.pairs[x]

    def sorted_pairs(self) -> list[list[int]]:
        return [[a, b] for a, b in sorted(self.pairs.items())]

    # -- algebra -----------------------------------------------------------

    def restrict(self, subset) -> "PartialMap":
        keep = set(subset)
        return PartialMap(
            self.source, self.target, {a: b for a, b in self.pairs.items() if a in keep}, self.kind
        )

    def compose(self, other: "PartialMap") -> "PartialMap":
        """self after other: (self . other)(x) = self(other(x))."""
        if other.target is not self.source and other.target != self.source:
            raise StructureError("composition mismatch")
        pairs = {
            a: self.pairs[b] for a, b in other.pairs.items() if b in self.pairs
        }
        return PartialMap(other.source, self.target, pairs)

    def union(self, other: "PartialMap") -> "PartialMap | None":
        """Join two maps; None if the union is inconsistent or not injective."""
        pairs = dict(self.pairs)
        for a, b in other.pairs.items():
            if pairs.get(a, b) != b:
                return None
            pairs[a] = b
        if len(set(pairs.values())) != len(pairs):
            return None
        return PartialMap(self.source, self.target, pairs)

    def extends(self, other: "PartialMap") -> bool:
        return all(self.pairs.get(a) == b for a, b in other.pairs.items())

    def verify_embedding(self) -> tuple[bool, tuple | None]:
        """Re-derive the embedding invariant; returns (ok, violating tuple)."""
        return _embedding_violation(self.source, self.target, self.pairs)


def _embedding_violation(A: FinStructure, B: FinStructure, pairs: dict) -> tuple[bool, tuple | None]:
    dom = sorted(pairs)
    # unary and binary go through the cached masks
    for a in dom:
        if A.unary_mask(a) != B.unary_mask(pairs[a]):
            return False, ("unary", (a,))
    for a in dom:
        fa = pairs[a]
        for b in dom:
            fb = pairs[b]
            if A.pair_mask(a, b) != B.pair_mask(fa, fb):
                return False, ("binary", (a, b))
    for name, arity in A.signature.symbols:
        if arity <= 2:
            continue
        for t in itertools.product(dom, repeat=arity):
            img = tuple(pairs[e] for e in t)
            if A.holds(name, t) != B.holds(name, img):
                return False, (name, t)
    return True, None


def is_embedding(A: FinStructure, B: FinStructure, pairs: dict) -> bool:
    if len(set(pairs.values())) != len(pairs):
        return False
    ok, _ = _embedding_violation(A, B, pairs)
    return ok


# ---------------------------------------------------------------------------
# embedding search


def find_embeddings(
    A: FinStructure,
    B: FinStructure,
    limit: int | None = None,
) -> list[PartialMap]:
    """All embeddings of A into B, total on A.

    Deterministic: results ordered lexicographically by the assignment
    vector (image of 0, image of 1, ...).  With `limit` set, the first
    `limit` in that order.
    """
    if A.signature != B.signature:
        raise StructureError("signature mismatch between A and B")
    out: list[PartialMap] = []
    if A.n > B.n:
        return out
    higher = [s for s in A.signature.symbols if s[1] > 2]
    assign: list[int] = []
    used = [False] * B.n

    def consistent(a: int, b: int) -> bool:
        if A.unary_mask(a) != B.unary_mask(b):
            return False
        if A.pair_mask(a, a) != B.pair_mask(b, b):
            return False
        for a2, b2 in enumerate(assign):
            if A.pair_mask(a, a2) != B.pair_mask(b, b2):
                return False
            if A.pair_mask(a2, a) != B.pair_mask(b2, b):
                return False
        if higher:
            dom = list(range(len(assign))) + [a]
            img = {a2: b2 for a2, b2 in enumerate(assign)}
            img[a] = b
            for name, arity in higher:
                for t in itertools.product(dom, repeat=arity):
                    if a not in t:
                        continue
                    if A.holds(name, t) != B.holds(name, tuple(img[e] for e in t)):
                        return False
        return True

    def rec(a: int) -> bool:
        if a == A.n:
            out.append(PartialMap(A, B, dict(enumerate(assign)), kind="embedding"))
            return limit is not None and len(out) >= limit
        for b in range(B.n):
            if used[b] or not consistent(a, b):
                continue
            assign.append(b)
            used[b] = True
            done = rec(a + 1)
            used[b] = False
            assign.pop()
            if done:
                return True
        return False

    rec(0)
    return out


def find_isomorphism(A: FinStructure, B: FinStructure) -> dict[int, int] | None:
    """Least isomorphism A -> B, or None."""
    if A.n != B.n or A.signature != B.signature:
        return None
    found = find_embeddings(A, B, limit=1)
    return found[0].pairs if found else None


def are_isomorphic(A: FinStructure, B: FinStructure) -> bool:
    return find_isomorphism(A, B) is not None


_EXTEND_MEMO: dict[tuple, dict[int, int] | None] = {}


def extends_to_automorphism(S: FinStructure, partial: dict[int, int]) -> dict[int, int] | None:
    """Complete a partial map to a full automorphism of S, if possible.

    Individualization + color refinement: the refinement is seeded with
    the pinned points on both sides, so mismatching candidates die early
    and twin classes collapse.  Returns the first completion found.
    """
    if len(set(partial.values())) != len(partial):
        return None
    if not is_embedding(S, S, partial):
        return None
    memo_key = (S, tuple(sorted(partial.items())))
    if memo_key in _EXTEND_MEMO:
        return _EXTEND_MEMO[memo_key]
    result = _extend_search(S, partial)
    if len(_EXTEND_MEMO) > 200000:
        _EXTEND_MEMO.clear()
    _EXTEND_MEMO[memo_key] = result
    return result


def _extend_search(S: FinStructure, partial: dict[int, int]) -> dict[int, int] | None:
    dom_order = sorted(partial)
    seeds_s = {a: i for i, a in enumerate(dom_order)}
    seeds_t = {partial[a]: i for i, a in enumerate(dom_order)}
    refined = _bi_refine(S, seeds_s, seeds_t)
    if refined is None:
        return None
    cs, ct = refined
    targets: dict[int, list[int]] = {}
    for b in range(S.n):
        targets.setdefault(ct[b], []).append(b)

    assign = dict(partial)
    used = set(partial.values())
    free = [x for x in range(S.n) if x not in assign]
    # smallest candidate classes first: fail fast
    free.sort(key=lambda a: (len(targets.get(cs[a], [])), a))

    def consistent(a: int, b: int) -> bool:
        if S.unary_mask(a) != S.unary_mask(b) or S.pair_mask(a, a) != S.pair_mask(b, b):
            return False
        for a2, b2 in assign.items():
            if S.pair_mask(a, a2) != S.pair_mask(b, b2):
                return False
            if S.pair_mask(a2, a) != S.pair_mask(b2, b):
                return False
        return True

    def rec(i: int) -> bool:
        if i == len(free):
            return True
        a = free[i]
        for b in targets.get(cs[a], ()):
            if b in used or not consistent(a, b):
                continue
            assign[a] = b
            used.add(b)
            if rec(i + 1):
                return True
            del assign[a]
            used.discard(b)
        return False

    if not rec(0):
        return None
    if S.signature.max_arity > 2 and not is_embedding(S, S, assign):
        for emb in find_embeddings(S, S):
            if all(emb.pairs[a] == b for a, b in partial.items()):
                return dict(emb.pairs)
        return None
    return dict(assign)


def _bi_refine(S: FinStructure, seeds_s: dict[int, int], seeds_t: dict[int, int]):
    """Refine two seeded colorings of S in lockstep with a shared key
    space.  Returns (colors_source, colors_target), or None as soon as
    the color histograms diverge (no automorphism can match the seeds)."""
    from collections import Counter

    n = S.n
    higher = [s for s in S.signature.symbols if s[1] > 2]

    def base(seeds):
        out = []
        for x in range(n):
            extra = tuple(sum(1 for t in S.interp[name] if x in t) for name, _ in higher)
            out.append((seeds.get(x, -1), S.unary_mask(x), S.pair_mask(x, x), extra))
        return out

    ks, kt = base(seeds_s), base(seeds_t)
    rank = {k: i for i, k in enumerate(sorted(set(ks) | set(kt)))}
    cs = [rank[k] for k in ks]
    ct = [rank[k] for k in kt]
    if Counter(cs) != Counter(ct):
        return None
    masks = list(S._pair_mask.values()) or [1]
    width = max(16, max(m.bit_length() for m in masks) + 1)

    def step(colors):
        keys = []
        for x in range(n):
            cx = colors[x]
            nb = sorted(
                (colors[y] << (2 * width)) | (S.pair_mask(x, y) << width) | S.pair_mask(y, x)
                for y in range(n)
                if y != x
            )
            keys.append((cx, tuple(nb)))
        return keys

    while True:
        ks, kt = step(cs), step(ct)
        rank = {k: i for i, k in enumerate(sorted(set(ks) | set(kt)))}
        ns = [rank[k] for k in ks]
        nt = [rank[k] for k in kt]
        if Counter(ns) != Counter(nt):
            return None
        if ns == cs and nt == ct:
            return cs, ct
        cs, ct = ns, nt


# ---------------------------------------------------------------------------
# canonical form


_COLOR_CACHE: dict[FinStructure, list[int]] = {}


def _refined_colors(S: FinStructure) -> list[int]:
    """Stable iterative refinement; colors are isomorphism-invariant."""
    cached = _COLOR_CACHE.get(S)
    if cached is not None:
        return cached
    colors = _refine_colors_impl(S)
    if len(_COLOR_CACHE) > 100000:
        _COLOR_CACHE.clear()
    _COLOR_CACHE[S] = colors
    return colors


def _refine_colors_impl(S: FinStructure) -> list[int]:
    higher = [s for s in S.signature.symbols if s[1] > 2]
    base = []
    for x in range(S.n):
        extra = tuple(
            sum(1 for t in S.interp[name] if x in t) for name, _ in higher
        )
        base.append((S.unary_mask(x), S.pair_mask(x, x), extra))
    order = sorted(set(base))
    colors = [order.index(b) for b in base]
    while True:
        keys = []
        for x in range(S.n):
            nb = sorted(
                (colors[y], S.pair_mask(x, y), S.pair_mask(y, x))
                for y in range(S.n)
                if y != x
            )
            keys.append((colors[x], tuple(nb)))
        order = sorted(set(keys))
        new = [order.index(k) for k in keys]
        if new == colors:
            return colors
        colors = new


def _class_is_uniform(S: FinStructure, cls: list[int]) -> bool:
    """True when all members of `cls` are pairwise interchangeable."""
    if S.signature.max_arity > 2 or len(cls) <= 1:
        return False
    inner = S.pair_mask(cls[0], cls[1]) if len(cls) > 1 else 0
    others = [w for w in range(S.n) if w not in set(cls)]
    u0 = cls[0]
    for u in cls:
        for v in cls:
            if u != v and S.pair_mask(u, v) != inner:
                return False
    for w in others:
        for u in cls[1:]:
            if S.pair_mask(u, w) != S.pair_mask(u0, w):
                return False
            if S.pair_mask(w, u) != S.pair_mask(w, u0):
                return False
    return True


_CANON_CACHE: dict[FinStructure, tuple[FinStructure, dict[int, int]]] = {}


def canonical_form(S: FinStructure) -> tuple[FinStructure, dict[int, int]]:
    """Canonical relabeling: isomorphic inputs yield equal outputs.

    Lex-least encoding over color-consistent permutations, with uniform
    color classes (pairwise interchangeable points) pinned in one order.
    Intended scale <= 10 elements plus the stages produced here.
    """
    cached = _CANON_CACHE.get(S)
    if cached is not None:
        return cached
    n = S.n
    colors = _refined_colors(S)
    classes: dict[int, list[int]] = {}
    for x in range(n):
        classes.setdefault(colors[x], []).append(x)
    blocks = [classes[c] for c in sorted(classes)]
    # slots[i] = color block that position i draws from
    slots: list[list[int]] = []
    block_uniform: list[bool] = []
    for blk in blocks:
        uni = _class_is_uniform(S, blk)
        for _ in blk:
            slots.append(blk)
            block_uniform.append(uni)

    best_rows: list[tuple] | None = None
    best_perm: list[int] | None = None
    perm: list[int] = []
    used: set[int] = set()
    higher = [s for s in S.signature.symbols if s[1] > 2]

    def row_for(v: int) -> tuple:
        r = [S.unary_mask(v), S.pair_mask(v, v)]
        for q, w in enumerate(perm):
            r.append(S.pair_mask(v, w))
            r.append(S.pair_mask(w, v))
        return tuple(r)

    def rec(pos: int, rows: list[tuple], tied: bool):
        nonlocal best_rows, best_perm
        if pos == n:
            if higher:
                inv = {v: i for i, v in enumerate(perm)}
                tail = tuple(
                    tuple(sorted(tuple(inv[e] for e in t) for t in S.interp[name]))
                    for name, _ in higher
                )
                rows = rows + [tail]
            if best_rows is None or rows < best_rows:
                best_rows = list(rows)
                best_perm = list(perm)
            return
        blk = slots[pos]
        cands = [v for v in blk if v not in used]
        if block_uniform[pos]:
            cands = cands[:1]
        for v in cands:
            row = row_for(v)
            if not tied and best_rows is not None:
                if row > best_rows[pos]:
                    continue
            perm.append(v)
            used.add(v)
            now_tied = tied or best_rows is None or row < best_rows[pos]
            rec(pos + 1, rows + [row], now_tied)
            used.discard(v)
            perm.pop()

    rec(0, [], True)
    assert best_perm is not None
    mapping = {v: i for i, v in enumerate(best_perm)}
    result = (S.relabel(mapping), mapping)
    if len(_CANON_CACHE) > 200000:
        _CANON_CACHE.clear()
    _CANON_CACHE[S] = result
    return result


# ---------------------------------------------------------------------------
# realized quantifier-free types


@dataclass(frozen=True)
class RqfType:
    """A realized quantifier-free type over an anchored finite base.

    Stored as its one-point extension: `extension` lives on
    len(anchor)+1 elements where anchor[i] maps to element i and the new
    point is the last element.
    """

    base: FinStructure
    anchor: tuple[int, ...]
    extension: FinStructure
    nontrivial: bool = True
    equals_anchor: int | None = None
    realized: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        if tuple(sorted(self.anchor)) != self.anchor:
            raise StructureError("anchor must be sorted")
        if self.extension.n != len(self.anchor) + 1:
            raise StructureError("extension must have |anchor|+1 elements")

    @property
    def star(self) -> int:
        return len(self.anchor)

    def check_base_consistency(self) -> bool:
        got, _ = induced_substructure(self.base, self.anchor)
        want, _ = induced_substructure(self.extension, range(len(self.anchor)))
        return got == want

    def key(self):
        return (self.anchor, self.extension._interp_key(), self.equals_anchor)

    def realizes(self, z: int, host: FinStructure | None = None) -> bool:
        """Does element z of `host` (default: base) realize this type?"""
        host = host or self.base
        if z in self.anchor:
            return self.equals_anchor == z
        mapping = {i: x for i, x in enumerate(self.anchor)}
        mapping[self.star] = z
        return is_embedding(self.extension, host, mapping)

    def realizations(self, host: FinStructure | None = None) -> list[int]:
        host = host or self.base
        if not self.nontrivial:
            return [self.equals_anchor] if self.equals_anchor is not None else []
        anchor_set = set(self.anchor)
        return [z for z in range(host.n) if z not in anchor_set and self.realizes(z, host)]


def generic_one_point_extensions(
    S: FinStructure,
    prescribed: dict[str, set] | None = None,
    free=None,
) -> list[FinStructure]:
    """Enumerate every structure on S + one fresh point (no membership filter).

    `prescribed` pins the tuples involving the new point and non-free
    elements; relations between the new point and `free` elements are
    enumerated.  Only usable for small signatures; class oracles override
    this with structured generators.
    """
    n = S.n
    star = n
    pinned = prescribed is not None
    if free is None:
        free = list(range(n))
    free_set = set(free)
    fixed_set = set(range(n)) - free_set
    prescribed = {k: {tuple(t) for t in v} for k, v in (prescribed or {}).items()}

    choice_tuples: list[tuple[str, tuple[int, ...]]] = []
    base_new: dict[str, set] = {name: set() for name in S.signature.names}
    for name, arity in S.signature.symbols:
        for t in itertools.product(range(n + 1), repeat=arity):
            if star not in t:
                continue
            rest = [e for e in t if e != star]
            # tuples whose non-star entries are all fixed are pinned by the
            # prescription; with no prescription everything is enumerated
            if pinned and all(e in fixed_set for e in rest):
                if t in prescribed.get(name, set()):
                    base_new[name].add(t)
            else:
                choice_tuples.append((name, t))
    if len(choice_tuples) > 24:
        raise StructureError(
            f"generic one-point enumeration over {len(choice_tuples)} tuples refused"
        )
    out = []
    for bits in range(1 << len(choice_tuples)):
        new = {name: set(ts) for name, ts in base_new.items()}
        for i, (name, t) in enumerate(choice_tuples):
            if bits >> i & 1:
                new[name].add(t)
        out.append(S.with_point(new))
    return out


def enumerate_rqf_types(
    S: FinStructure,
    anchor,
    oracle,
    nontrivial_only: bool = True,
) -> list[RqfType]:
    """Realized quantifier-free types over `anchor` inside `S`.

    One type per distinct one-point extension of the anchor structure
    accepted by the oracle, in canonical order.  The oracle supplies both
    membership and the extension generator.
    """
    anchor = tuple(sorted(set(anchor)))
    anchored, _ = induced_substructure(S, anchor)
    if not oracle.member(anchored):
        raise StructureError("anchor structure rejected by oracle")
    seen = set()
    types = []
    for ext in oracle.one_point_extensions(anchored):
        key = ext._interp_key()
        if key in seen:
            continue
        seen.add(key)
        types.append(RqfType(base=S, anchor=anchor, extension=ext, nontrivial=True))
    types.sort(key=lambda p: p.key())
    if not nontrivial_only:
        for i, x in enumerate(anchor):
            ext = _trivial_extension(anchored, i)
            types.append(
                RqfType(base=S, anchor=anchor, extension=ext, nontrivial=False, equals_anchor=x)
            )
    return types


def _trivial_extension(anchored: FinStructure, idx: int) -> FinStructure:
    """Extension pattern of the trivial type y = anchor[idx]."""
    new: dict[str, set] = {}
    star = anchored.n
    for name, tuples in anchored.interp.items():
        ts = set()
        for t in tuples:
            if idx in t:
                for pattern in itertools.product(*[(e, star) if e == idx else (e,) for e in t]):
                    if star in pattern:
                        ts.add(pattern)
        new[name] = ts
    return anchored.with_point(new)
