"""Ingestion and cleaning of real recruitment CSV files.

Raw study exports carry three recurring anomalies, repaired here in order:

1. degree floor -- a reported degree below the subject's recruitment-forest
   degree is replaced by that minimum (floored at 1);
2. tie jitter -- when a recruiter and their recruit share an interview
   timestamp, the recruiter is shifted slightly earlier;
3. duplicated coupons -- when more recruits redeemed a subject's coupons
   than the subject was issued (photocopied coupons), the issued count is
   raised to the recruit count.

After cleaning, records are ordered by interview time and assembled into
:class:`~rdsnet.graphs.ObservedData`, which derives the coupon matrix and
validates every invariant.  Cleaning is idempotent: re-ingesting a cleaned
file makes zero repairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .graphs import ObservedData, RecruitmentGraph

_REQUIRED = ("subject_id", "recruiter_id", "interview_time", "reported_degree", "coupons_issued")
_JITTER_FLOOR = 1e-6  # days


@dataclass
class RawRecruitRecord:
    subject_id: str
    recruiter_id: str  # empty string marks a seed
    interview_time: float  # days
    reported_degree: int
    coupons_issued: int
    coupon_id_redeemed: str = ""


@dataclass
class CleaningReport:
    degree_floor: int = 0
    tie_jitter: int = 0
    duplicated_coupon: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def total_repairs(self) -> int:
        return self.degree_floor + self.tie_jitter + self.duplicated_coupon

    def as_dict(self) -> dict:
        return {
            "degree_floor": self.degree_floor,
            "tie_jitter": self.tie_jitter,
            "duplicated_coupon": self.duplicated_coupon,
            "notes": list(self.notes),
        }


def parse_time(raw: str) -> float:
    """Interview time as days: plain real numbers or ISO timestamps."""
    text = raw.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValueError(f"cannot parse interview time {raw!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.timestamp() / 86400.0


def read_recruitment_csv(path) -> list[RawRecruitRecord]:
    records: list[RawRecruitRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        missing = [c for c in _REQUIRED if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = RawRecruitRecord(
                    subject_id=row["subject_id"].strip(),
                    recruiter_id=(row["recruiter_id"] or "").strip(),
                    interview_time=parse_time(row["interview_time"]),
                    reported_degree=int(row["reported_degree"]),
                    coupons_issued=int(row["coupons_issued"]),
                    coupon_id_redeemed=(row.get("coupon_id_redeemed") or "").strip(),
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if not rec.subject_id:
                raise ValueError(f"{path}:{lineno}: empty subject_id")
            records.append(rec)
    if not records:
        raise ValueError(f"{path}: no records")
    ids = [r.subject_id for r in records]
    if len(set(ids)) != len(ids):
        dupes = sorted({x for x in ids if ids.count(x) > 1})
        raise ValueError(f"{path}: duplicate subject ids {dupes}")
    return records


def clean_records(
    records: list[RawRecruitRecord],
) -> tuple[list[RawRecruitRecord], CleaningReport]:
    """Apply the three standard repairs; raises on structurally bad data."""
    report = CleaningReport()
    recs = [RawRecruitRecord(**r.__dict__) for r in records]
    by_id = {r.subject_id: r for r in recs}
    recruits: dict[str, list[RawRecruitRecord]] = {r.subject_id: [] for r in recs}
    for r in recs:
        if not r.recruiter_id:
            continue
        if r.recruiter_id not in by_id:
            raise ValueError(f"subject {r.subject_id}: unknown recruiter {r.recruiter_id!r}")
        if r.recruiter_id == r.subject_id:
            raise ValueError(f"subject {r.subject_id} recruited itself")
        recruits[r.recruiter_id].append(r)

    # 1. degree floor
    for r in recs:
        min_degree = max(1, len(recruits[r.subject_id]) + (1 if r.recruiter_id else 0))
        if r.reported_degree < min_degree:
            r.reported_degree = min_degree
            report.degree_floor += 1

    # 2. tie jitter: shift a recruiter sharing its recruit's timestamp earlier
    eps = _jitter_epsilon([r.interview_time for r in recs])
    for _ in range(len(recs) + 1):
        shifted = False
        for r in recs:
            if not r.recruiter_id:
                continue
            rec = by_id[r.recruiter_id]
            if rec.interview_time == r.interview_time:
                rec.interview_time -= eps
                report.tie_jitter += 1
                shifted = True
        if not shifted:
            break
    else:
        raise ValueError("could not resolve timestamp ties by jittering")

    # 3. duplicated coupons: issued count below observed redemptions
    for r in recs:
        used = len(recruits[r.subject_id])
        if used > r.coupons_issued:
            report.duplicated_coupon += used - r.coupons_issued
            report.notes.append(
                f"subject {r.subject_id}: raised coupons from {r.coupons_issued} to {used}"
            )
            r.coupons_issued = used

    return recs, report


def _jitter_epsilon(times: list[float]) -> float:
    uniq = np.unique(np.asarray(times, dtype=np.float64))
    gaps = np.diff(uniq)
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        return _JITTER_FLOOR
    return max(float(gaps.min()) / 2.0, _JITTER_FLOOR)


def assemble_observed(records: list[RawRecruitRecord]) -> tuple[ObservedData, list[str]]:
    """Order cleaned records by time and build the validated observation object.

    Returns the data plus the subject ids in recruitment order.
    """
    order = sorted(records, key=lambda r: (r.interview_time, r.subject_id))
    index = {r.subject_id: k for k, r in enumerate(order)}
    times = np.array([r.interview_time for r in order], dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise ValueError("interview times are not strictly increasing after cleaning")
    edges = []
    seeds = set()
    for k, r in enumerate(order):
        if not r.recruiter_id:
            seeds.add(k)
            continue
        i = index[r.recruiter_id]
        if i >= k:
            raise ValueError(
                f"subject {r.subject_id} was interviewed before its recruiter "
                f"{r.recruiter_id}"
            )
        edges.append((i, k))
    graph = RecruitmentGraph(n=len(order), edges=tuple(edges), seeds=frozenset(seeds))
    observed = ObservedData.assemble(
        graph,
        [r.reported_degree for r in order],
        times,
        [r.coupons_issued for r in order],
    )
    return observed, [r.subject_id for r in order]


def ingest_recruitment_csv(
    path, *, compress_idle_days: bool = False
) -> tuple[ObservedData, CleaningReport, list[str]]:
    """Read, repair, and validate a recruitment CSV.

    ``compress_idle_days`` optionally removes calendar days on which no
    interview happened (weekends, breaks) before waits are computed; this
    changes the unit of the recruitment rate to active days.
    """
    records = read_recruitment_csv(path)
    cleaned, report = clean_records(records)
    if compress_idle_days:
        times = compress_calendar([r.interview_time for r in cleaned])
        for r, t in zip(cleaned, times):
            r.interview_time = t
        report.notes.append("idle calendar days removed from the time axis")
    observed, ids = assemble_observed(cleaned)
    return observed, report, ids


def compress_calendar(times: list[float]) -> list[float]:
    """Map times so that only days containing interviews count.

    The integer day of each timestamp is replaced by that day's rank among
    all observed days; fractional parts are preserved.
    """
    days = np.floor(np.asarray(times, dtype=np.float64)).astype(np.int64)
    rank = {d: k for k, d in enumerate(sorted(set(days.tolist())))}
    return [float(rank[int(d)]) + (t - float(d)) for d, t in zip(days, times)]


def write_recruitment_csv(path, observed: ObservedData, subject_ids: Optional[list[str]] = None) -> None:
    """Inverse of ingestion; writes a file that re-ingests with zero repairs."""
    n = observed.n
    ids = subject_ids or [f"S{k:04d}" for k in range(n)]
    rec = observed.graph.recruiter
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_REQUIRED))
        for k in range(n):
            writer.writerow(
                [
                    ids[k],
                    ids[rec[k]] if rec[k] >= 0 else "",
                    repr(float(observed.times[k])),
                    int(observed.degrees[k]),
                    int(observed.coupons_issued[k]),
                ]
            )
