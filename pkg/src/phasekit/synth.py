"""Synthetic incident corpora with known ground truth.

Two generator families mirror the structural patterns the toolkit is
built to detect: a step-function domain (long dormancy, then an
irreversible jump to an elevated plateau) and an oscillatory sparse
domain (rare counts with crisis bumps, long reporting delays, partial
exposure coverage). Both write the standard input CSVs so the full
pipeline can run against them.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .months import MonthIndex, month_range


@dataclass(frozen=True)
class SyntheticCorpus:
    incidents_csv: Path
    stars_csv: Path | None
    media_csv: Path | None
    exposure_csv: Path | None
    interventions_csv: Path | None
    start: MonthIndex
    n_months: int
    true_break: int | None  # month position of the injected regime step


def _mid_month_date(m: MonthIndex, rng: np.random.Generator) -> dt.date:
    return dt.date(m.year, m.month, int(rng.integers(1, 28)))


def _write_incidents(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "incident_id", "incident_date", "report_date", "subdomain",
            "severity", "group", "description"])
        writer.writeheader()
        writer.writerows(rows)


def write_step_corpus(out_dir: Path, seed: int = 0, n_months: int = 103,
                      break_month: int = 60,
                      start: MonthIndex = MonthIndex(2017, 3)) -> SyntheticCorpus:
    """Step-function domain: dormant baseline, then a persistent 3.5x
    excess jump at `break_month` that exposure and media cannot explain.

    Counts follow Poisson(mu_t) with mu_t proportional to a growing
    depreciated-installed-base exposure and a media covariate, times the
    injected step. Reporting delays are near-real-time (median one day)
    with a thin long tail.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    months = month_range(start, start.shift(n_months - 1))

    # adoption events: steady early growth plus a tool-release surge just
    # before the break, sustaining the installed base afterwards
    star_rows = []
    repos = [f"repo-{i}" for i in range(8)]
    for t, m in enumerate(months):
        base = 40.0 * (1.0 + t / 24.0)
        if break_month - 6 <= t < break_month + 18:
            base *= 3.0
        for r in range(2 + (t > 30) + (t > break_month)):
            star_rows.append({
                "repo": repos[(t + r) % len(repos)],
                "event_month": str(m),
                "stars_added": round(float(base * rng.uniform(0.6, 1.4)), 1),
            })
    stars_csv = out_dir / "stars.csv"
    with stars_csv.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["repo", "event_month", "stars_added"])
        writer.writeheader()
        writer.writerows(star_rows)

    # media attention: hype cycles, not a trend — episodic spikes over a
    # mildly elevated post-break baseline, so attention cannot proxy for time
    t_axis = np.arange(n_months)
    media = 18.0 + rng.normal(0, 5.0, n_months)
    media[break_month:] += 8.0
    for spike in rng.choice(n_months, size=10, replace=False):
        width = rng.integers(2, 5)
        media[spike:spike + width] += rng.uniform(25, 55)
    media = np.clip(media, 0.0, 100.0)
    media_csv = out_dir / "media.csv"
    with media_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "index"])
        for m, v in zip(months, media):
            writer.writerow([str(m), f"{v:.2f}"])

    # reconstruct the exposure trajectory the star events imply, then draw
    # counts whose only unexplained structure is the injected step
    from .exposure import StarEvent, depreciated_installed_base, scale_range
    events = [StarEvent(r["repo"], MonthIndex.parse(r["event_month"]),
                        float(r["stars_added"])) for r in star_rows]
    index = scale_range(depreciated_installed_base(events, 24.0, months[0], months[-1]))
    media_std = (media - media.mean()) / media.std()
    step = np.where(t_axis >= break_month, np.log(12.0), 0.0)
    mu = index.value / 120.0 * np.exp(0.15 * media_std + step)

    inc_rows = []
    serial = 0
    for t, m in enumerate(months):
        count = int(rng.poisson(mu[t]))
        if t in (0, n_months - 1):
            count = max(count, 1)  # pin the observed month span
        for _ in range(count):
            serial += 1
            inc_date = _mid_month_date(m, rng)
            n_reports = 1 + int(rng.integers(0, 3))
            for _ in range(n_reports):
                lag = float(rng.lognormal(mean=0.2, sigma=1.1))
                inc_rows.append({
                    "incident_id": f"step-{serial:05d}",
                    "incident_date": inc_date.isoformat(),
                    "report_date": (inc_date + dt.timedelta(days=int(lag))).isoformat(),
                    "subdomain": "step-domain",
                    "severity": "",
                    "group": "",
                    "description": f"synthetic incident {serial}",
                })
    incidents_csv = out_dir / "incidents.csv"
    _write_incidents(incidents_csv, inc_rows)

    interventions_csv = out_dir / "interventions.csv"
    with interventions_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "month", "type", "expected_effect", "wave"])
        writer.writerow(["platform-policy", str(months[max(break_month - 20, 6)]),
                         "platform", "mitigation", "wave-1"])
        writer.writerow(["framework-act", str(months[min(break_month + 12, n_months - 7)]),
                         "regulatory", "mitigation", "wave-2"])

    return SyntheticCorpus(incidents_csv=incidents_csv, stars_csv=stars_csv,
                           media_csv=media_csv, exposure_csv=None,
                           interventions_csv=interventions_csv,
                           start=start, n_months=n_months, true_break=break_month)


def write_oscillatory_corpus(out_dir: Path, seed: int = 0, n_months: int = 128,
                             start: MonthIndex = MonthIndex(2014, 7)) -> SyntheticCorpus:
    """Sparse oscillatory domain: near-zero baseline with two crisis bumps,
    long heavy-tailed reporting delays (around 10% invalid), severity
    levels, operator groups, and exposure covering only a late sub-range.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    months = month_range(start, start.shift(n_months - 1))
    t_axis = np.arange(n_months)

    mu = 0.25 + 0.9 * t_axis / n_months
    for center, height, width in ((22, 2.2, 3.0), (44, 2.8, 3.0)):
        mu = mu + height * np.exp(-0.5 * ((t_axis - center) / width) ** 2)

    groups = ["alpha-fleet", "beta-fleet", "other-fleet"]
    severities = ["Negligible", "Minor", "Substantial"]
    inc_rows = []
    serial = 0
    for t, m in enumerate(months):
        for _ in range(int(rng.poisson(mu[t]))):
            serial += 1
            inc_date = _mid_month_date(m, rng)
            severity = severities[int(rng.choice(3, p=[0.45, 0.51, 0.04]))]
            group = groups[int(rng.choice(3, p=[0.5, 0.35, 0.15]))]
            for _ in range(1 + int(rng.integers(0, 8))):
                roll = rng.uniform()
                if roll < 0.05:
                    lag = -float(rng.integers(1, 40))          # invalid: negative
                elif roll < 0.10:
                    lag = float(rng.integers(1900, 2600))      # invalid: > 5 years
                else:
                    lag = float(rng.lognormal(mean=4.55, sigma=1.05))
                    lag = min(lag, 1800.0)
                inc_rows.append({
                    "incident_id": f"osc-{serial:05d}",
                    "incident_date": inc_date.isoformat(),
                    "report_date": (inc_date + dt.timedelta(days=int(lag))).isoformat(),
                    "subdomain": "osc-domain",
                    "severity": severity,
                    "group": group,
                    "description": f"synthetic oscillatory incident {serial}",
                })
    incidents_csv = out_dir / "incidents.csv"
    _write_incidents(incidents_csv, inc_rows)

    # exposure (e.g. fleet miles) covering only the last third of the window
    expo_csv = out_dir / "exposure.csv"
    cover_start = int(n_months * 0.6)
    with expo_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "exposure"])
        for t in range(cover_start, n_months):
            miles = 1e5 * (1.0 + (t - cover_start) / 10.0) * rng.uniform(0.85, 1.15)
            writer.writerow([str(months[t]), f"{miles:.0f}"])

    interventions_csv = out_dir / "interventions.csv"
    with interventions_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "month", "type", "expected_effect", "wave"])
        writer.writerow(["crisis-1-response", str(months[24]), "regulatory", "mitigation", ""])
        writer.writerow(["crisis-2-response", str(months[46]), "company", "mitigation", ""])
        writer.writerow(["deployment-surge", str(months[90]), "deployment", "shock", ""])

    return SyntheticCorpus(incidents_csv=incidents_csv, stars_csv=None,
                           media_csv=None, exposure_csv=expo_csv,
                           interventions_csv=interventions_csv,
                           start=start, n_months=n_months, true_break=None)
