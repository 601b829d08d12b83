"""Failure-history data model for multi-system competing-risks analyses.

A dataset is a collection of failure times with cause labels, observed on a
common time-truncated window (0, T] over m identical systems subject to K
recurrent causes of failure.  Systems that never failed carry no records and
enter only through m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ObservationDesign",
    "FailureRecord",
    "FailureDataset",
    "CountSummary",
    "DatasetError",
    "ParseError",
    "ingest",
    "summarize",
    "write_dataset",
]


class DatasetError(ValueError):
    """Raised when data violate the observation design."""


class ParseError(DatasetError):
    """Raised for malformed dataset files; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class ObservationDesign:
    """Common observation window and dimensions: horizon T, m systems, K causes."""

    T: float
    m: int
    K: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DatasetError(f"truncation time must be positive and finite, got {self.T}")
        if self.m < 1:
            raise DatasetError(f"need at least one system, got m={self.m}")
        if self.K < 1:
            raise DatasetError(f"need at least one failure cause, got K={self.K}")


@dataclass(frozen=True)
class FailureRecord:
    """One failure event: which system, when, and which cause."""

    system_id: int
    time: float
    cause: int


@dataclass(frozen=True)
class FailureDataset:
    """Validated failure records under a fixed observation design.

    Records are stored sorted by (system_id, time).  Within each system the
    times are strictly increasing; ties and boundary times are rejected.
    Immutable after construction.
    """

    design: ObservationDesign
    records: tuple[FailureRecord, ...]

    def __init__(self, design, records):
        recs = sorted(records, key=lambda r: (r.system_id, r.time))
        for r in recs:
            if not (1 <= r.system_id <= design.m):
                raise DatasetError(f"system_id {r.system_id} outside 1..{design.m}")
            if not (1 <= r.cause <= design.K):
                raise DatasetError(f"cause {r.cause} outside 1..{design.K}")
            if not (0.0 < r.time < design.T):
                raise DatasetError(
                    f"failure time {r.time} outside (0, {design.T}) for system {r.system_id}"
                )
        for a, b in zip(recs, recs[1:]):
            if a.system_id == b.system_id and a.time == b.time:
                raise DatasetError(
                    f"tied failure times {a.time} in system {a.system_id}"
                )
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "records", tuple(recs))

    def __len__(self):
        return len(self.records)

    def system_times(self, system_id):
        """Ordered failure times of one system."""
        return [r.time for r in self.records if r.system_id == system_id]


@dataclass(frozen=True)
class CountSummary:
    """Count statistics feeding the likelihood.

    n_jq is the m-by-K matrix of per-system per-cause failure counts;
    log_ratio_sums[q-1] is the sum of log(T / t) over all cause-q failures.
    """

    n_jq: np.ndarray
    n_j: np.ndarray
    n_q: np.ndarray
    log_ratio_sums: np.ndarray
    design: ObservationDesign = field(compare=False)

    @property
    def n(self):
        return int(self.n_j.sum())


def summarize(data: FailureDataset) -> CountSummary:
    """Tabulate per-system/per-cause counts and the per-cause log-ratio sums."""
    d = data.design
    n_jq = np.zeros((d.m, d.K), dtype=int)
    log_ratio = np.zeros(d.K)
    for r in data.records:
        n_jq[r.system_id - 1, r.cause - 1] += 1
        log_ratio[r.cause - 1] += math.log(d.T / r.time)
    return CountSummary(
        n_jq=n_jq,
        n_j=n_jq.sum(axis=1),
        n_q=n_jq.sum(axis=0),
        log_ratio_sums=log_ratio,
        design=d,
    )


def _parse_metadata(lines):
    meta = {}
    for lineno, raw in lines:
        body = raw.lstrip("#").strip()
        if "=" not in body:
            raise ParseError(f"bad metadata comment {raw!r}", line=lineno)
        key, _, value = body.partition("=")
        meta[key.strip()] = value.strip()
    out = {}
    try:
        if "T" in meta:
            out["T"] = float(meta["T"])
        if "m" in meta:
            out["m"] = int(meta["m"])
        if "K" in meta:
            out["K"] = int(meta["K"])
    except ValueError as exc:
        raise ParseError(f"bad metadata value: {exc}") from None
    return out


def ingest(path, design: ObservationDesign | None = None) -> FailureDataset:
    """Read the canonical CSV format.

    Leading comment lines ``# T=.. / # m=.. / # K=..`` supply the design;
    an explicit `design` argument overrides them.  The header row must be
    ``system_id,cause,time``; each following row is one failure.
    """
    comment_lines = []
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header_idx = None
    for i, raw in enumerate(lines):
        if raw.startswith("#"):
            comment_lines.append((i + 1, raw))
        elif raw.strip():
            header_idx = i
            break
    if header_idx is None:
        raise ParseError("missing header row 'system_id,cause,time'")
    header = [c.strip() for c in lines[header_idx].split(",")]
    if header != ["system_id", "cause", "time"]:
        raise ParseError(f"unexpected header {lines[header_idx]!r}", line=header_idx + 1)

    if design is None:
        meta = _parse_metadata(comment_lines)
        missing = {"T", "m", "K"} - meta.keys()
        if missing:
            raise ParseError(
                f"no design given and metadata lacks {sorted(missing)}"
            )
        design = ObservationDesign(T=meta["T"], m=meta["m"], K=meta["K"])

    for lineno in range(header_idx + 1, len(lines)):
        raw = lines[lineno]
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = [c.strip() for c in raw.split(",")]
        if len(parts) != 3:
            raise ParseError(f"expected 3 columns, got {len(parts)}", line=lineno + 1)
        try:
            rows.append(
                FailureRecord(system_id=int(parts[0]), time=float(parts[2]), cause=int(parts[1]))
            )
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno + 1) from None
    return FailureDataset(design, rows)


def write_dataset(path, data: FailureDataset) -> None:
    """Write the canonical CSV, embedding the design as metadata comments."""
    d = data.design
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# T={d.T!r}\n# m={d.m}\n# K={d.K}\n")
        fh.write("system_id,cause,time\n")
        for r in data.records:
            fh.write(f"{r.system_id},{r.cause},{r.time!r}\n")
