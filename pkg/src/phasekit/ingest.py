"""Incident CSV parsing, filtering and monthly aggregation.

Input schema (UTF-8, comma-separated, ISO-8601 dates), one row per
(incident, report) pair::

    incident_id, incident_date, report_date, subdomain, severity, group, description

Rows sharing an incident_id are merged into one record with the union of
report dates. Malformed rows are collected into a rejects report instead
of aborting the load.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Iterable, Literal, TextIO

import numpy as np

from .core import MonthlyPanel, SeverityScale, severity_sum
from .errors import EmptyAfterFilter, SchemaMismatch, UnknownGroup
from .months import MonthIndex, month_range, parse_iso_date

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("incident_id", "incident_date", "report_date")
OPTIONAL_COLUMNS = ("subdomain", "severity", "group", "description")

MIN_PLAUSIBLE_DATE = dt.date(1900, 1, 1)

CountBasis = Literal["incident-date", "first-report-date"]


@dataclass
class IncidentRecord:
    incident_id: str
    incident_date: dt.date
    report_dates: list[dt.date]
    subdomain_tags: set[str] = field(default_factory=set)
    severity: str | None = None
    group: str | None = None
    description: str = ""

    @property
    def first_report_date(self) -> dt.date:
        return min(self.report_dates)


@dataclass(frozen=True)
class CorpusFilter:
    subdomain: str | None = None
    date_min: dt.date | None = None
    date_max: dt.date | None = None
    keyword_includes: tuple[str, ...] = ()
    keyword_excludes: tuple[str, ...] = ()
    group: str | None = None

    def __post_init__(self):
        if self.date_min and self.date_max and self.date_min > self.date_max:
            raise ValueError("date_min must not exceed date_max")

    def accepts(self, rec: IncidentRecord, basis_date: dt.date) -> bool:
        if self.subdomain is not None and self.subdomain not in rec.subdomain_tags:
            return False
        if self.date_min is not None and basis_date < self.date_min:
            return False
        if self.date_max is not None and basis_date > self.date_max:
            return False
        if self.group is not None and rec.group != self.group:
            return False
        text = rec.description.lower()
        if self.keyword_includes and not any(k.lower() in text for k in self.keyword_includes):
            return False
        if any(k.lower() in text for k in self.keyword_excludes):
            return False
        return True


@dataclass
class RejectedRow:
    line: int
    reason: str


@dataclass
class LoadResult:
    records: list[IncidentRecord]
    rejects: list[RejectedRow]


def load_incidents(stream: TextIO) -> LoadResult:
    """Parse an incident CSV stream into merged records plus a rejects report."""
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise SchemaMismatch(f"missing required columns: {missing}")

    by_id: dict[str, IncidentRecord] = {}
    rejects: list[RejectedRow] = []
    for lineno, row in enumerate(reader, start=2):
        inc_id = (row.get("incident_id") or "").strip()
        if not inc_id:
            rejects.append(RejectedRow(lineno, "empty incident_id"))
            continue
        try:
            inc_date = parse_iso_date(row["incident_date"])
            rep_date = parse_iso_date(row["report_date"])
        except (ValueError, KeyError) as exc:
            rejects.append(RejectedRow(lineno, f"unparseable date: {exc}"))
            continue
        if inc_date < MIN_PLAUSIBLE_DATE or rep_date < MIN_PLAUSIBLE_DATE:
            rejects.append(RejectedRow(lineno, "date before 1900"))
            continue

        subdomain = (row.get("subdomain") or "").strip()
        severity = (row.get("severity") or "").strip() or None
        group = (row.get("group") or "").strip() or None
        description = (row.get("description") or "").strip()

        rec = by_id.get(inc_id)
        if rec is None:
            by_id[inc_id] = IncidentRecord(
                incident_id=inc_id, incident_date=inc_date, report_dates=[rep_date],
                subdomain_tags={subdomain} if subdomain else set(),
                severity=severity, group=group, description=description)
            continue

        rec.report_dates.append(rep_date)
        if subdomain:
            rec.subdomain_tags.add(subdomain)
        if severity and rec.severity is None:
            rec.severity = severity
        if group and rec.group is None:
            rec.group = group
        if description and not rec.description:
            rec.description = description
        if inc_date != rec.incident_date:
            # conflicting duplicates: keep the earliest occurrence
            if inc_date < rec.incident_date:
                rec.incident_date = inc_date
            log.warning("incident %s has conflicting incident dates; keeping %s",
                        inc_id, rec.incident_date)

    return LoadResult(records=list(by_id.values()), rejects=rejects)


def _basis_date(rec: IncidentRecord, basis: CountBasis) -> dt.date:
    return rec.incident_date if basis == "incident-date" else rec.first_report_date


def aggregate_monthly(records: Iterable[IncidentRecord],
                      corpus_filter: CorpusFilter | None = None,
                      basis: CountBasis = "incident-date",
                      scale: SeverityScale | None = None) -> MonthlyPanel:
    """Count filtered records per month under the chosen basis, zero-filling gaps.

    The month axis spans min..max observed basis month. Severity sums are
    attached when any record carries a severity level.
    """
    flt = corpus_filter or CorpusFilter()
    kept = [r for r in records if flt.accepts(r, _basis_date(r, basis))]
    if not kept:
        raise EmptyAfterFilter("no records pass the corpus filter")

    basis_months = [MonthIndex.from_date(_basis_date(r, basis)) for r in kept]
    months = month_range(min(basis_months), max(basis_months))
    start = months[0]

    counts = np.zeros(len(months), dtype=int)
    sev = np.zeros(len(months), dtype=float)
    any_severity = False
    for rec, m in zip(kept, basis_months):
        pos = m - start
        counts[pos] += 1
        if rec.severity is not None:
            any_severity = True
            sev[pos] += severity_sum([rec.severity], scale)

    return MonthlyPanel(
        months=tuple(months),
        raw_count=counts,
        nowcast_count=counts.astype(float),
        severity_sum=sev if any_severity else None,
    )


def group_decompose(records: Iterable[IncidentRecord],
                    group_values: list[str],
                    corpus_filter: CorpusFilter | None = None,
                    basis: CountBasis = "incident-date") -> dict[str, MonthlyPanel]:
    """Split the corpus into per-group panels plus a residual 'other' panel.

    All panels share the total panel's month axis so they sum to the
    ungrouped aggregation month-wise.
    """
    flt = corpus_filter or CorpusFilter()
    kept = [r for r in records if flt.accepts(r, _basis_date(r, basis))]
    if not kept:
        raise EmptyAfterFilter("no records pass the corpus filter")
    present = {r.group for r in kept if r.group}
    unknown = [g for g in group_values if g not in present]
    if unknown:
        raise UnknownGroup(f"groups not present in corpus: {unknown}")

    basis_months = [MonthIndex.from_date(_basis_date(r, basis)) for r in kept]
    months = tuple(month_range(min(basis_months), max(basis_months)))
    start = months[0]

    panels: dict[str, MonthlyPanel] = {}
    for name in [*group_values, "other"]:
        counts = np.zeros(len(months), dtype=int)
        for rec, m in zip(kept, basis_months):
            bucket = rec.group if rec.group in group_values else "other"
            if bucket == name:
                counts[m - start] += 1
        panels[name] = MonthlyPanel(months=months, raw_count=counts,
                                    nowcast_count=counts.astype(float))
    return panels


def load_month_value_csv(stream: TextIO, value_column: str) -> dict[MonthIndex, float]:
    """Read a (month, value) CSV such as the exposure or media inputs."""
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    if "month" not in header or value_column not in header:
        raise SchemaMismatch(f"expected columns ('month', {value_column!r}), got {header}")
    out: dict[MonthIndex, float] = {}
    for row in reader:
        out[MonthIndex.parse(row["month"])] = float(row[value_column])
    return out
