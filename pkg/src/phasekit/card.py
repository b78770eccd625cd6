"""Meta-reporting card: the governance-facing run summary.

Every numeric field on the card is copied from a pipeline artifact (no
recomputation), so card/artifact consistency is checkable field by
field. Expert phase declarations live in an append-only JSONL log next
to the sealed artifacts and are surfaced on the card.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path
from typing import Any

DECLARATIONS_FILE = "declarations.jsonl"


def _last_transitions(months: list, labels: list, limit: int = 3) -> list[dict[str, str]]:
    out = []
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            out.append({"month": str(months[i]),
                        "from": str(labels[i - 1]), "to": str(labels[i])})
    return out[-limit:]


def build_card(ctx: dict[str, Any], cfg: dict[str, Any]) -> dict[str, Any]:
    tl = ctx["timeline"]
    risk = ctx["risk"]
    six, three = tl.current()
    card: dict[str, Any] = {
        "domain": cfg["domain"],
        "as_of": str(tl.months[-1]),
        "current_phase": {"six": six.value, "three": three.value},
        "risk": {
            "level_sigma": float(risk.z[-1]),
            "trend_per_month": float(risk.slope[-1]),
            "signal": ctx.get("signal_kind", "unknown"),
        },
        "phase_distribution": {
            "six": {k: {"months": v[0], "pct": v[1]}
                    for k, v in tl.distribution_six.items()},
            "three": {k: {"months": v[0], "pct": v[1]}
                      for k, v in tl.distribution_three.items()},
        },
        "last_transitions": {
            "six": _last_transitions(tl.months, [p.value for p in tl.six_phase]),
            "three": _last_transitions(tl.months, [p.value for p in tl.three_phase]),
        },
        "thresholds": {
            "theta_low": tl.thresholds.theta_low,
            "theta_high": tl.thresholds.theta_high,
            "rapid_cut": tl.thresholds.rapid_cut,
            "spc_epidemic": tl.thresholds.spc_epidemic,
        },
    }

    if "forecast_band" in ctx:
        band = ctx["forecast_band"]
        card["forecast"] = {
            "order": list(ctx["forecast_fit"].order),
            "horizon": len(band.horizons),
            "mean_point": float(band.point.mean()),
            "final_point": float(band.point[-1]),
            "final_lower95": float(band.lower95[-1]),
            "final_upper95": float(band.upper95[-1]),
            "projected_final_phase": band.projected_phase[-1].value,
            "negative_lower_warning": band.negative_lower_warning,
        }

    if "agreement" in ctx:
        card["triangulation"] = ctx["agreement"]

    flags: list[str] = []
    nowcast = ctx.get("nowcast")
    if nowcast is not None:
        card["nowcast_window_months"] = nowcast.window_months
        if nowcast.window_months > 0:
            flags.append(f"last {nowcast.window_months} months are "
                         "nowcast-inflated and provisional")
    panel = ctx.get("panel")
    if panel is not None and panel.exposure_mask is not None:
        gaps = int((~panel.exposure_mask).sum())
        if gaps:
            flags.append(f"{gaps} months lack exposure coverage")
    delay_model = ctx.get("delay_model")
    if delay_model is not None and delay_model.degenerate:
        flags.append("delay model fit is degenerate")
    if "hmm_fit" in ctx and ctx["hmm_fit"].degenerate:
        flags.append("HMM emission densities are degenerate on this data")
    if ctx.get("signal_kind") == "standardized-counts":
        flags.append("risk signal is count-based (no exposure offset); "
                     "interpret as reporting dynamics")
    card["data_quality_flags"] = flags
    card["declarations"] = []
    return card


def render_card_text(card: dict[str, Any]) -> str:
    lines = [
        "================================================================",
        f"META-REPORTING CARD -- {card['domain']}",
        f"as of {card['as_of']}",
        "================================================================",
        "",
        f"Current phase (six-framework):   {card['current_phase']['six']}",
        f"Current phase (three-framework): {card['current_phase']['three']}",
        f"Risk level: {card['risk']['level_sigma']:+.2f} sigma   "
        f"Trend: {card['risk']['trend_per_month']:+.3f} sigma/month",
        f"Signal: {card['risk']['signal']}",
        "",
        "Phase distribution (three-framework):",
    ]
    for name, row in card["phase_distribution"]["three"].items():
        lines.append(f"  {name:<22} {row['months']:>4} months  {row['pct']:5.1f}%")
    lines.append("")
    lines.append("Recent transitions:")
    trans = card["last_transitions"]["three"] or [{"month": "-", "from": "-", "to": "-"}]
    for t in trans:
        lines.append(f"  {t['month']}: {t['from']} -> {t['to']}")
    if "forecast" in card:
        fc = card["forecast"]
        lines += [
            "",
            f"Forecast: ARIMA{tuple(fc['order'])}, {fc['horizon']} months ahead",
            f"  final point {fc['final_point']:.1f} "
            f"[{fc['final_lower95']:.1f}, {fc['final_upper95']:.1f}] "
            f"-> {fc['projected_final_phase']}",
        ]
    if card.get("triangulation", {}).get("pelt_vs_kmeans"):
        tri = card["triangulation"]["pelt_vs_kmeans"]
        lines.append(f"Triangulation: PELT vs K-means ARI {tri['ari']:.3f}, "
                     f"NMI {tri['nmi']:.3f}")
    if card["data_quality_flags"]:
        lines.append("")
        lines.append("Data-quality flags:")
        for f in card["data_quality_flags"]:
            lines.append(f"  - {f}")
    if card.get("declarations"):
        lines.append("")
        lines.append("Expert declarations:")
        for d in card["declarations"]:
            lines.append(f"  [{d['timestamp']}] {d['analyst']}: {d['phase']} "
                         f"-- {d['rationale']}")
    lines.append("")
    return "\n".join(lines)


def append_declaration(run_dir: Path, analyst: str, domain: str, phase: str,
                       parameters: dict[str, Any], rationale: str) -> dict[str, Any]:
    """Append one expert determination to the run's append-only log."""
    if not rationale.strip():
        raise ValueError("a declaration requires a non-empty rationale")
    entry = {
        "analyst": analyst,
        "domain": domain,
        "phase": phase,
        "parameters": parameters,
        "rationale": rationale,
        "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    path = Path(run_dir) / DECLARATIONS_FILE
    with path.open("a") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return entry


def read_declarations(run_dir: Path) -> list[dict[str, Any]]:
    path = Path(run_dir) / DECLARATIONS_FILE
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def card_with_declarations(run_dir: Path) -> dict[str, Any]:
    card = json.loads((Path(run_dir) / "card.json").read_text())
    card["declarations"] = read_declarations(run_dir)
    return card
