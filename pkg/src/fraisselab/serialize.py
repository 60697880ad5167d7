"""JSON interchange for structures, maps, certificates and bundles.

Structure format (the interchange for every CLI command):
    {"signature": [{"name": "R", "arity": 2}], "n": 3,
     "interp": {"R": [[0, 1], [1, 2]]}}
with tuples sorted lexicographically.  Metric spaces flatten their
matrices as "p/q" strings.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .limits import AbsorbingPartition, LimitApprox
from .splitting import (
    ClassData,
    ControlCertificate,
    DichotomyVerdict,
    SplitVerdict,
    SplitWitness,
)
from .structures import FinStructure, PartialMap, Signature, StructureError

__all__ = [
    "structure_to_dict",
    "structure_from_dict",
    "map_to_dict",
    "map_from_dict",
    "witness_to_dict",
    "witness_from_dict",
    "control_to_dict",
    "control_from_dict",
    "bundle_to_dict",
    "bundle_from_dict",
    "metric_space_to_dict",
    "metric_space_from_dict",
    "split_verdict_to_dict",
    "dichotomy_to_dict",
    "classdata_to_dict",
    "dumps",
    "loads",
]


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def loads(text: str):
    return json.loads(text)


# ---------------------------------------------------------------------------
# structures and maps


def structure_to_dict(S: FinStructure) -> dict:
    return {
        "signature": [{"name": n, "arity": a} for n, a in S.signature.symbols],
        "n": S.n,
        "interp": {name: [list(t) for t in sorted(ts)] for name, ts in S.interp.items() if ts},
    }


def structure_from_dict(data: dict) -> FinStructure:
    sig = Signature(tuple((s["name"], int(s["arity"])) for s in data["signature"]))
    interp = {name: [tuple(t) for t in ts] for name, ts in data.get("interp", {}).items()}
    return FinStructure(sig, int(data["n"]), interp)


def map_to_dict(m: PartialMap) -> dict:
    return {"pairs": m.sorted_pairs(), "kind": m.kind}


def map_from_dict(data: dict, source: FinStructure, target: FinStructure) -> PartialMap:
    return PartialMap(
        source, target, {int(a): int(b) for a, b in data["pairs"]}, kind=data.get("kind", "raw")
    )


# ---------------------------------------------------------------------------
# split witnesses and controls


def witness_to_dict(w: SplitWitness) -> dict:
    return {
        "C": structure_to_dict(w.C),
        "D": structure_to_dict(w.D),
        "i": map_to_dict(w.i),
        "D1": structure_to_dict(w.D1),
        "D2": structure_to_dict(w.D2),
        "j1": map_to_dict(w.j1),
        "j2": map_to_dict(w.j2),
        "f": sorted([a, b] for a, b in w.f.items()),
        "violating": {
            "symbol": w.violating[0],
            "tuple": list(w.violating[1]),
            "holds_in": w.violating[2],
        },
    }


def witness_from_dict(data: dict) -> SplitWitness:
    C = structure_from_dict(data["C"])
    D = structure_from_dict(data["D"])
    D1 = structure_from_dict(data["D1"])
    D2 = structure_from_dict(data["D2"])
    return SplitWitness(
        C=C,
        D=D,
        i=map_from_dict(data["i"], C, D),
        D1=D1,
        D2=D2,
        j1=map_from_dict(data["j1"], D, D1),
        j2=map_from_dict(data["j2"], D, D2),
        f={int(a): int(b) for a, b in data["f"]},
        violating=(
            data["violating"]["symbol"],
            tuple(data["violating"]["tuple"]),
            data["violating"]["holds_in"],
        ),
    )


def control_to_dict(cert: ControlCertificate) -> dict:
    return {
        "stage": structure_to_dict(cert.stage),
        "c": cert.c,
        "K": list(cert.K),
        "verified_bound": cert.verified_bound,
    }


def control_from_dict(data: dict) -> ControlCertificate:
    return ControlCertificate(
        stage=structure_from_dict(data["stage"]),
        c=int(data["c"]),
        K=tuple(int(x) for x in data["K"]),
        verified_bound=int(data["verified_bound"]),
    )


# ---------------------------------------------------------------------------
# approximation bundles


def bundle_to_dict(
    approx: LimitApprox,
    partition: AbsorbingPartition | None = None,
    classes: ClassData | None = None,
) -> dict:
    out = {
        "oracle": approx.oracle.name,
        "k": approx.k,
        "multiplicity": approx.multiplicity,
        "stages": [structure_to_dict(s) for s in approx.stages],
        "inclusions": approx.inclusions(),
    }
    if partition is not None:
        out["partition"] = {"A": sorted(partition.A), "level": partition.level}
    if classes is not None:
        out["classes"] = classdata_to_dict(classes)
    return out


def bundle_from_dict(data: dict):
    from .oracles import get_oracle

    oracle = get_oracle(data["oracle"])
    stages = [structure_from_dict(s) for s in data["stages"]]
    approx = LimitApprox(
        oracle=oracle,
        stages=stages,
        k=int(data["k"]),
        multiplicity=int(data["multiplicity"]),
    )
    partition = None
    if "partition" in data:
        partition = AbsorbingPartition(
            approx, frozenset(int(x) for x in data["partition"]["A"]), int(data["partition"]["level"])
        )
    classes = None
    if "classes" in data:
        classes = classdata_from_dict(data["classes"], approx.top)
    return approx, partition, classes


def classdata_to_dict(cd: ClassData) -> dict:
    return {
        "partition": [list(c) for c in cd.partition],
        "certificates": {str(c): control_to_dict(cert) for c, cert in cd.certificates.items()},
        "k_bound": cd.k_bound,
        "f_bound": cd.f_bound,
    }


def classdata_from_dict(data: dict, stage: FinStructure) -> ClassData:
    certs = {int(c): control_from_dict(d) for c, d in data["certificates"].items()}
    for cert in certs.values():
        if cert.stage != stage:
            raise StructureError("class data certificates disagree with the stage")
    return ClassData(
        stage=stage,
        partition=[list(map(int, c)) for c in data["partition"]],
        certificates=certs,
        k_bound=int(data["k_bound"]),
        f_bound=int(data["f_bound"]),
    )


# ---------------------------------------------------------------------------
# metric spaces: matrices of "p/q" strings


def metric_space_to_dict(space) -> dict:
    return {
        "n": space.n,
        "d": [[str(space.d[i][j]) for j in range(space.n)] for i in range(space.n)],
        "bound": str(space.bound) if space.bound is not None else None,
    }


def metric_space_from_dict(data: dict):
    from .katetov import RationalMetricSpace

    n = int(data["n"])
    d = [[Fraction(x) for x in row] for row in data["d"]]
    bound = Fraction(data["bound"]) if data.get("bound") else None
    return RationalMetricSpace(n, d, bound=bound)


# ---------------------------------------------------------------------------
# verdicts


def split_verdict_to_dict(v: SplitVerdict, embed_witnesses: int | None = 3) -> dict:
    out = {
        "kind": v.kind,
        "oracle": v.oracle,
        "C": structure_to_dict(v.C),
        "size_bound": v.size_bound,
        "slack": v.slack,
        "pair_count": v.pair_count,
    }
    if v.kind == "splits-up-to-bound":
        sample = v.witnesses if embed_witnesses is None else v.witnesses[:embed_witnesses]
        out["witness_count"] = len(v.witnesses)
        out["witnesses"] = [witness_to_dict(w) for w in sample]
    elif v.blocked_at is not None:
        D, i = v.blocked_at
        out["blocked_at"] = {"D": structure_to_dict(D), "i": map_to_dict(i)}
    return out


def dichotomy_to_dict(v: DichotomyVerdict, embed_witnesses: int | None = 3) -> dict:
    out = {
        "oracle": v.oracle,
        "kind": v.kind,
        "size_bound": v.size_bound,
        "slack": v.slack,
        "c_max": v.c_max,
        "detail": v.detail,
    }
    if v.splitting_C is not None:
        out["splitting_C"] = structure_to_dict(v.splitting_C)
    if v.split_verdict is not None:
        out["split_verdict"] = split_verdict_to_dict(v.split_verdict, embed_witnesses)
    if v.blocked:
        out["blocked"] = [split_verdict_to_dict(b, embed_witnesses=0) for b in v.blocked]
    if v.stage is not None:
        out["stage"] = structure_to_dict(v.stage)
    if v.certificates is not None:
        out["certificates"] = {str(c): control_to_dict(cert) for c, cert in v.certificates.items()}
    return out


# ---------------------------------------------------------------------------
# game transcripts


def transcript_to_dict(t) -> dict:
    return {
        "oracle": t.oracle_name,
        "stage": structure_to_dict(t.stage),
        "A": list(t.A),
        "B": list(t.B),
        "C": structure_to_dict(t.C),
        "c_star": list(t.c_star),
        "cap": t.cap,
        "slack": t.slack,
        "policy": t.policy,
        "seed": t.seed,
        "rounds": [r.to_dict() for r in t.rounds],
        "aborted": t.aborted,
        "abort_reason": t.abort_reason,
    }


def transcript_from_dict(data: dict):
    from .game import GameRound, GameTranscript

    rounds = []
    for r in data["rounds"]:
        rounds.append(
            GameRound(
                move={int(a): int(b) for a, b in r["move"]},
                k_n=r["k_n"],
                g_k={int(a): int(b) for a, b in r["g_k"]} if r["g_k"] is not None else None,
                witness=witness_from_dict(r["witness"]) if r["witness"] else None,
                new_a=list(r["new_a"]),
                new_b=list(r["new_b"]),
                reply={int(a): int(b) for a, b in r["reply"]},
                bf_added={int(a): int(b) for a, b in r["bf_added"]},
                certificate=r["certificate"],
            )
        )
    return GameTranscript(
        oracle_name=data["oracle"],
        stage=structure_from_dict(data["stage"]),
        A=tuple(data["A"]),
        B=tuple(data["B"]),
        C=structure_from_dict(data["C"]),
        c_star=tuple(data["c_star"]),
        cap=int(data["cap"]),
        slack=int(data["slack"]),
        policy=data.get("policy"),
        seed=data.get("seed"),
        rounds=rounds,
        aborted=data.get("aborted", False),
        abort_reason=data.get("abort_reason", ""),
    )
