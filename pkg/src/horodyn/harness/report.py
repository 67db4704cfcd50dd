"""Deterministic run reports.

A report is a list of records, each a pass/fail/indeterminate check with an
identifier and a numeric margin.  Serialization is line-delimited JSON with
sorted keys so two runs with the same configuration and seed produce
byte-identical files.  Wall-clock timing stays on the console and never
enters the file.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

SEED_DERIVATION = "philox(seedsequence(seed, spawn_key=(task,)))"

PASS = "pass"
FAIL = "fail"
INDETERMINATE = "indeterminate"


def task_rng(root_seed: int, task_index: int) -> np.random.Generator:
    """Independent stream for one task of a run; stable under reordering."""
    seq = np.random.SeedSequence(root_seed, spawn_key=(task_index,))
    return np.random.Generator(np.random.Philox(seq))


def _plain(value):
    """Coerce numpy scalars and containers to their JSON-safe equivalents.

    Non-finite floats become strings so the output stays strict JSON.
    """
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float):
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.complexfloating):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(config) -> str:
    """Short stable hash of the scenario settings that shape the run."""
    payload = {
        "version": config.version,
        "domain": [config.domain.kind.value, config.domain.dim],
        "suite": config.suite,
        "seed": config.seed,
        "maps": list(config.maps),
        "budgets": vars(config.budgets).copy(),
        "tolerances": vars(config.tolerances).copy(),
        "tol_override": config.tol_override,
    }
    blob = canonical_json(payload).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class Record:
    id: str
    status: str
    margin: float
    note: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"id": self.id, "status": self.status, "margin": _plain(self.margin)}
        if self.note:
            out["note"] = self.note
        if self.extra:
            out["extra"] = _plain(self.extra)
        return out


def passed(rid: str, margin: float, note: str = "", **extra) -> Record:
    return Record(rid, PASS, float(margin), note, dict(extra))


def failed(rid: str, margin: float, note: str = "", **extra) -> Record:
    return Record(rid, FAIL, float(margin), note, dict(extra))


def indeterminate(rid: str, note: str = "", **extra) -> Record:
    return Record(rid, INDETERMINATE, float("nan"), note, dict(extra))


def check(rid: str, ok, margin: float, note: str = "", **extra) -> Record:
    return passed(rid, margin, note, **extra) if ok else failed(rid, margin, note, **extra)


@dataclass
class Report:
    suite: str
    seed: int
    digest: str
    records: list
    runtime: float = 0.0  # console only, never serialized

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if r.status == FAIL)

    @property
    def indeterminates(self) -> int:
        return sum(1 for r in self.records if r.status == INDETERMINATE)

    def lines(self) -> list:
        """Serialized lines: header, sorted records, summary."""
        header = {
            "config_digest": self.digest,
            "records": len(self.records),
            "seed": self.seed,
            "seed_derivation": SEED_DERIVATION,
            "suite": self.suite,
            "version": 1,
        }
        body = sorted(self.records, key=lambda r: r.id)
        summary = {
            "failures": self.failures,
            "indeterminate": self.indeterminates,
            "passes": len(self.records) - self.failures - self.indeterminates,
            "summary": True,
        }
        return ([canonical_json(header)]
                + [canonical_json(r.as_dict()) for r in body]
                + [canonical_json(summary)])

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"


def write_report(report: Report, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.render())


def console_summary(report: Report) -> str:
    tally = (f"{len(report.records)} checks, {report.failures} failed, "
             f"{report.indeterminates} indeterminate")
    return (f"suite={report.suite} seed={report.seed} digest={report.digest}\n"
            f"{tally}\nruntime {report.runtime:.2f}s")
