"""Pipeline orchestration and run persistence.

A run executes the staged pipeline (ingest -> delay -> exposure -> glm
-> regimes -> phases -> forecast -> impact -> agreement -> sweeps ->
card -> figures) from a single JSON config, writing every artifact as a
plain JSON/CSV/PNG file under a content-addressed run directory. The
run id is a digest of the merged config plus input file digests, so
identical inputs always map to the same sealed, reproducible run.

Stage failures abort with the failing stage named; artifacts written by
earlier stages are retained for inspection.
"""

from __future__ import annotations

import copy
import csv
import datetime as dt
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import agreement as agree_mod
from . import card as card_mod
from . import figures
from .core import MonthlyPanel, RiskSeries, risk_series, rolling_slope, standardize
from .delay import apply_nowcast, build_nowcast, compute_lags, select_delay_model
from .errors import ConfigError, StageError, WindowTooShort, ZeroVariance
from .exposure import (attach_index, depreciated_installed_base, exposure_adjusted_rate,
                       load_star_events, merge_external, scale_range)
from .glm import (CountFormula, alpha_grid_search, dispersion_diagnostics, excess_risk,
                  fit_count_model, likelihood_ratio_poisson_vs_nb)
from .hmm import hmm_fit, hmm_select
from .impact import analyze_events, expected_vs_actual, load_interventions, wave_impact
from .ingest import CorpusFilter, aggregate_monthly, load_incidents, load_month_value_csv
from .kmeans import kmeans_fit, kmeans_select, macro_bands
from .months import MonthIndex
from .pelt import pelt_detect, penalty_sweep, segment_stats, select_by_plateau
from .phases import (PhaseThresholds, calibrate_thresholds, classify_segments,
                     rapid_cut, timeline)
from .forecast import DEFAULT_ORDER_GRID, arima_select, forecast as arima_forecast
from .sensitivity import (dispersion_sweep, halflife_sweep, main_break,
                          threshold_sweep, two_threshold_sweep)

STAGES = ("ingest", "delay", "exposure", "glm", "regimes", "phases",
          "forecast", "impact", "agreement", "sweeps", "card", "figures")

DEFAULT_CONFIG: dict[str, Any] = {
    "domain": "domain",
    "seed": 0,
    "as_of": None,
    "inputs": {
        "incidents": None,
        "exposure": None,
        "stars": None,
        "media": None,
        "interventions": None,
        "reference": None,
    },
    "ingest": {
        "subdomain": None,
        "basis": "incident-date",
        "date_min": None,
        "date_max": None,
        "keyword_includes": [],
        "keyword_excludes": [],
        "group": None,
    },
    "delay": {"percentile": 0.95, "cap": 5.0},
    "exposure": {"half_life_months": 24.0, "scale_to": [10.0, 100.0], "rate_per": 1e6},
    "glm": {
        "family": "negbin",
        "alpha": 1.5,
        "alpha_grid": [],
        "offset": True,
        "formula": {"time_linear": True, "time_quadratic": True, "media": True},
    },
    "risk_signal": "auto",  # excess-risk | standardized-counts | auto
    "pelt": {"grid": [round(0.5 * k, 1) for k in range(1, 21)], "penalty": None,
             "min_segment": 2},
    "hmm": {"enabled": False, "n_states": 6, "restarts": 5, "select_range": []},
    "kmeans": {"k": None, "k_range": [3, 4, 5, 6], "trend_weight": 2.0, "restarts": 10},
    "phases": {"theta_low": None, "theta_high": None, "baseline_end": None},
    "forecast": {"enabled": True, "horizon": 12, "grid": None},
    "impact": {"enabled": True, "window": 3, "wave_window": 6, "method": "bh"},
    "agreement": {"enabled": True, "max_lag": 6},
    "sweeps": {"enabled": True, "threshold_grid": [], "threshold_grid_high": [],
               "halflives": [], "alphas": []},
}


def merge_config(user: dict[str, Any]) -> dict[str, Any]:
    """Deep-merge a user config over the defaults."""
    def merge(base: dict, over: dict) -> dict:
        out = copy.deepcopy(base)
        for key, val in over.items():
            if key in out and isinstance(out[key], dict) and isinstance(val, dict):
                out[key] = merge(out[key], val)
            else:
                out[key] = copy.deepcopy(val)
        return out
    cfg = merge(DEFAULT_CONFIG, user)
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg["inputs"]["incidents"] is None:
        raise ConfigError("config requires inputs.incidents")
    return cfg


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def compute_run_id(cfg: dict[str, Any]) -> tuple[str, dict[str, str]]:
    digests = {}
    for name, path in cfg["inputs"].items():
        if path:
            # a missing input is the ingest stage's error to raise, not ours
            digests[name] = (_sha256_file(Path(path)) if Path(path).exists()
                             else f"missing:{path}")
    h = hashlib.sha256()
    h.update(canonical_json(cfg).encode())
    h.update(canonical_json(digests).encode())
    return h.hexdigest()[:16], digests


class ArtifactStore:
    """Writes artifacts under the run directory and tracks their digests."""

    def __init__(self, run_dir: Path):
        self.run_dir = run_dir
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.index: dict[str, dict[str, str]] = {}

    def _record(self, name: str, path: Path) -> None:
        self.index[name] = {
            "path": str(path.relative_to(self.run_dir)),
            "sha256": _sha256_file(path),
        }

    def write_json(self, name: str, obj: Any) -> Path:
        path = self.run_dir / f"{name}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonify)
            fh.write("\n")
        self._record(name, path)
        return path

    def write_csv(self, name: str, header: list[str], rows: list[list[Any]]) -> Path:
        path = self.run_dir / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        self._record(name, path)
        return path

    def record_file(self, name: str, path: Path) -> None:
        self._record(name, path)


def _jsonify(obj: Any) -> Any:
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, MonthIndex):
        return str(obj)
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj)}")


@dataclass
class RunManifest:
    run_id: str
    run_dir: Path
    config: dict[str, Any]
    input_digests: dict[str, str]
    artifacts: dict[str, dict[str, str]]
    status: str
    failed_stage: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "domain": self.config.get("domain"),
            "config": self.config,
            "input_digests": self.input_digests,
            "seeds": {"seed": self.config.get("seed", 0)},
            "artifacts": self.artifacts,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
        }


class _Context(dict):
    """Mutable bag of intermediate stage products."""


def _panel_rows(panel: MonthlyPanel) -> tuple[list[str], list[list[Any]]]:
    header = ["month", "raw_count", "nowcast_count", "exposure", "exposure_mask",
              "media_index", "severity_sum"]
    rows = []
    for i, m in enumerate(panel.months):
        rows.append([
            str(m),
            int(panel.raw_count[i]),
            f"{panel.nowcast_count[i]:.6f}",
            f"{panel.exposure[i]:.6f}" if panel.exposure is not None else "",
            int(panel.exposure_mask[i]) if panel.exposure_mask is not None else "",
            f"{panel.media_index[i]:.6f}" if panel.media_index is not None else "",
            f"{panel.severity_sum[i]:.6f}" if panel.severity_sum is not None else "",
        ])
    return header, rows


def _segmentation_json(seg, months) -> dict[str, Any]:
    return {
        "penalty": seg.penalty,
        "changepoints": list(seg.changepoints),
        "changepoint_months": [str(months[cp]) for cp in seg.changepoints],
        "total_cost": seg.total_cost,
        "segments": [{
            "start": s.start, "end": s.end, "n_months": s.n_months,
            "start_month": str(months[s.start]),
            "end_month": str(months[s.end - 1]),
            "mean": s.mean, "within_slope": s.within_slope,
            "mean_count": s.mean_count,
        } for s in seg.segments],
    }


def _timeline_json(tl) -> dict[str, Any]:
    return {
        "months": [str(m) for m in tl.months],
        "six_phase": [p.value for p in tl.six_phase],
        "three_phase": [p.value for p in tl.three_phase],
        "thresholds": {
            "theta_low": tl.thresholds.theta_low,
            "theta_high": tl.thresholds.theta_high,
            "trend_cut": tl.thresholds.trend_cut,
            "rapid_cut": tl.thresholds.rapid_cut,
            "spc_mean": tl.thresholds.spc_mean,
            "spc_sd": tl.thresholds.spc_sd,
            "spc_epidemic": tl.thresholds.spc_epidemic,
            "spc_acute": tl.thresholds.spc_acute,
        },
        "distribution_six": {k: {"months": v[0], "pct": v[1]}
                             for k, v in tl.distribution_six.items()},
        "distribution_three": {k: {"months": v[0], "pct": v[1]}
                               for k, v in tl.distribution_three.items()},
        "transitions_six": tl.transitions_six.tolist(),
        "transitions_three": tl.transitions_three.tolist(),
    }


# --------------------------------------------------------------------------
# stages

def _stage_ingest(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    icfg = cfg["ingest"]
    with open(cfg["inputs"]["incidents"], newline="") as fh:
        loaded = load_incidents(fh)
    ctx["records"] = loaded.records
    flt = CorpusFilter(
        subdomain=icfg["subdomain"],
        date_min=dt.date.fromisoformat(icfg["date_min"]) if icfg["date_min"] else None,
        date_max=dt.date.fromisoformat(icfg["date_max"]) if icfg["date_max"] else None,
        keyword_includes=tuple(icfg["keyword_includes"]),
        keyword_excludes=tuple(icfg["keyword_excludes"]),
        group=icfg["group"],
    )
    panel = aggregate_monthly(loaded.records, flt, icfg["basis"])
    ctx["panel"] = panel
    store.write_json("rejects", [{"line": r.line, "reason": r.reason}
                                 for r in loaded.rejects])
    header, rows = _panel_rows(panel)
    store.write_csv("panel", header, rows)


def _stage_delay(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    lags = compute_lags(ctx["records"])
    best, table = select_delay_model(lags.lag_days, lags.excluded_fraction)
    adj = build_nowcast(lags.lag_days, cfg["delay"]["percentile"], cfg["delay"]["cap"])
    as_of = (MonthIndex.parse(cfg["as_of"]) if cfg["as_of"]
             else ctx["panel"].months[-1])
    ctx["panel"] = apply_nowcast(ctx["panel"], adj, as_of)
    ctx["nowcast"] = adj
    ctx["delay_model"] = best
    store.write_json("delay_model", {
        "selected": best.family,
        "excluded_fraction": lags.excluded_fraction,
        "n_valid": best.n_valid,
        "empirical_mean_days": best.empirical_mean_days,
        "models": {fam: {"params": m.params, "loglik": m.loglik, "aic": m.aic,
                         "degenerate": m.degenerate,
                         "model_mean_days": m.model_mean_days}
                   for fam, m in table.items()},
    })
    store.write_json("nowcast", {
        "window_months": adj.window_months,
        "cdf": adj.cdf.tolist(),
        "cap": adj.cap,
        "as_of": str(as_of),
        "inflation_factors": [adj.inflation_factor(h)
                              for h in range(adj.window_months + 1)],
    })
    header, rows = _panel_rows(ctx["panel"])
    store.write_csv("panel", header, rows)


def _stage_exposure(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    inputs = cfg["inputs"]
    ecfg = cfg["exposure"]
    panel = ctx["panel"]
    meta: dict[str, Any] = {"source": None}
    if inputs["stars"]:
        with open(inputs["stars"], newline="") as fh:
            events = load_star_events(fh)
        ctx["star_events"] = events
        index = depreciated_installed_base(events, ecfg["half_life_months"],
                                           panel.months[0], panel.months[-1])
        index = scale_range(index, *ecfg["scale_to"])
        panel = attach_index(panel, index)
        meta = {"source": "depreciated-installed-base",
                "half_life_months": ecfg["half_life_months"],
                "scale_to": ecfg["scale_to"]}
    elif inputs["exposure"]:
        with open(inputs["exposure"], newline="") as fh:
            series = load_month_value_csv(fh, "exposure")
        panel = merge_external(panel, series)
        meta = {"source": "external",
                "covered_months": int(panel.exposure_mask.sum()),
                "flagged_months": int((~panel.exposure_mask).sum())}
    if inputs["media"]:
        with open(inputs["media"], newline="") as fh:
            series = load_month_value_csv(fh, "index")
        media = np.array([series.get(m, np.nan) for m in panel.months])
        if np.isnan(media).any():
            media = np.nan_to_num(media, nan=float(np.nanmean(media)))
        panel = panel.with_media(media)
        meta["media"] = True
    ctx["panel"] = panel
    if panel.exposure is not None:
        rate = exposure_adjusted_rate(panel, ecfg["rate_per"])
        meta["rate"] = {
            "per": rate.per,
            "aggregate_rate": rate.aggregate_rate,
            "mean_monthly_rate": rate.mean_monthly_rate,
            "trend_slope": rate.trend_slope,
            "trend_p": rate.trend_p,
        }
    store.write_json("exposure_meta", meta)
    header, rows = _panel_rows(panel)
    store.write_csv("panel", header, rows)


def _resolve_signal(cfg: dict, panel: MonthlyPanel) -> str:
    mode = cfg["risk_signal"]
    if mode != "auto":
        return mode
    return ("excess-risk" if panel.exposure is not None and cfg["glm"]["offset"]
            else "standardized-counts")


def _stage_glm(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    panel = ctx["panel"]
    gcfg = cfg["glm"]
    signal_kind = _resolve_signal(cfg, panel)
    formula = CountFormula(
        time_linear=gcfg["formula"]["time_linear"],
        time_quadratic=gcfg["formula"]["time_quadratic"],
        media=gcfg["formula"]["media"] and panel.media_index is not None,
    )
    use_offset = gcfg["offset"] and panel.exposure is not None

    pois = fit_count_model(panel, formula, "poisson", offset=use_offset)
    fits = {"poisson": pois}
    primary = pois
    if gcfg["family"] == "negbin":
        nb = fit_count_model(panel, formula, "negbin", gcfg["alpha"], offset=use_offset)
        fits["negbin"] = nb
        primary = nb
    ctx["glm_fit"] = primary

    doc: dict[str, Any] = {
        "family": primary.family,
        "alpha": primary.alpha,
        "offset": use_offset,
        "signal": signal_kind,
        "coefficients": primary.coefficient_table(),
        "loglik": primary.loglik,
        "converged": primary.converged,
        "design_meta": primary.design_meta,
        "dispersion": {
            name: {"pearson_ratio": dispersion_diagnostics(f).pearson_ratio,
                   "overdispersed": dispersion_diagnostics(f).overdispersion_flag,
                   "loglik": f.loglik}
            for name, f in fits.items()
        },
    }
    if "negbin" in fits:
        lr = likelihood_ratio_poisson_vs_nb(fits["poisson"], fits["negbin"])
        doc["likelihood_ratio"] = {"statistic": lr.statistic, "p": lr.p_value}
    if gcfg["alpha_grid"]:
        grid = alpha_grid_search(panel, formula, list(gcfg["alpha_grid"]), use_offset)
        doc["alpha_grid"] = {"alpha_star": grid.alpha_star,
                             "loglik": {str(k): v for k, v in grid.logliks.items()}}
    store.write_json("glm_fit", doc)

    if signal_kind == "excess-risk":
        signal = excess_risk(panel, primary)
        if signal.degenerate or signal.standardized is None:
            raise ZeroVariance("excess-risk signal is degenerate")
        risk = signal.standardized
        excess = signal.excess
    else:
        try:
            risk = risk_series(panel.months, panel.nowcast_count)
        except ZeroVariance as exc:
            raise ZeroVariance(f"count signal is degenerate: {exc}") from exc
        excess = panel.nowcast_count.astype(float)
    ctx["risk"] = risk
    ctx["signal_kind"] = signal_kind
    store.write_csv("risk", ["month", "signal", "z", "slope"],
                    [[str(m), f"{excess[i]:.10f}", f"{risk.z[i]:.10f}",
                      f"{risk.slope[i]:.10f}"]
                     for i, m in enumerate(risk.months)])
    store.write_json("risk_meta", {
        "signal": signal_kind,
        "window_mean": risk.window_mean,
        "window_sd": risk.window_sd,
        "sd_convention": risk.sd_convention,
    })


def _risk_counts(ctx: _Context) -> np.ndarray:
    """Raw counts aligned to the risk series months."""
    panel: MonthlyPanel = ctx["panel"]
    risk: RiskSeries = ctx["risk"]
    counts = {m: c for m, c in zip(panel.months, panel.raw_count)}
    return np.array([counts[m] for m in risk.months], dtype=float)


def _stage_regimes(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    risk: RiskSeries = ctx["risk"]
    counts = _risk_counts(ctx)
    pcfg = cfg["pelt"]
    sweep = penalty_sweep(risk.z, list(pcfg["grid"]), pcfg["min_segment"])
    rho = pcfg["penalty"] if pcfg["penalty"] else select_by_plateau(sweep)
    seg = segment_stats(risk.z, pelt_detect(risk.z, rho, pcfg["min_segment"]), counts)
    ctx["segmentation"] = seg
    ctx["pelt_sweep"] = sweep
    store.write_json("pelt_sweep", {
        "grid": list(sweep.grid),
        "segment_counts": list(sweep.segment_counts),
        "plateaus": [{"n_segments": p.n_segments, "appearances": p.appearances,
                      "rho_lo": p.rho_lo, "rho_hi": p.rho_hi}
                     for p in sweep.plateaus],
        "selected_penalty": rho,
        "penalty_source": "config" if pcfg["penalty"] else "plateau-stability",
    })
    store.write_json("segmentation", _segmentation_json(seg, risk.months))

    hcfg = cfg["hmm"]
    if hcfg["enabled"]:
        if hcfg["select_range"]:
            sel = hmm_select(risk.z, hcfg["select_range"], hcfg["restarts"],
                             cfg["seed"])
            n_states = sel.n_states_star
            selection = {"bic": {str(k): v for k, v in sel.bic.items()},
                         "degenerate": {str(k): v for k, v in sel.degenerate.items()}}
        else:
            n_states = hcfg["n_states"]
            selection = None
        fit = hmm_fit(risk.z, n_states, cfg["seed"], hcfg["restarts"])
        ctx["hmm_fit"] = fit
        store.write_json("hmm", {
            "n_states": fit.n_states,
            "means": fit.means.tolist(),
            "variances": fit.variances.tolist(),
            "transition": fit.transition.tolist(),
            "initial": fit.initial.tolist(),
            "loglik": fit.loglik,
            "states": fit.states.tolist(),
            "occupancy": fit.occupancy().tolist(),
            "degenerate": fit.degenerate,
            "selection": selection,
        })

    kcfg = cfg["kmeans"]
    if kcfg["k"]:
        k = int(kcfg["k"])
        selection = None
    else:
        sel = kmeans_select(risk, kcfg["k_range"], kcfg["trend_weight"], cfg["seed"])
        k = sel.k_star
        selection = {"silhouettes": {str(i): v for i, v in sel.silhouettes.items()},
                     "calinski_harabasz": {str(i): v
                                           for i, v in sel.calinski_harabasz.items()}}
    kfit = macro_bands(kmeans_fit(risk, k, kcfg["trend_weight"], cfg["seed"],
                                  kcfg["restarts"]))
    ctx["kmeans_fit"] = kfit
    store.write_json("kmeans", {
        "k": kfit.n_clusters,
        "centroids": kfit.centroids.tolist(),
        "centroid_risk": kfit.centroid_risk().tolist(),
        "labels": kfit.labels.tolist(),
        "silhouette": kfit.silhouette,
        "calinski_harabasz": kfit.calinski_harabasz,
        "trend_weight": kfit.trend_weight,
        "macro_bands": {str(kk): v for kk, v in (kfit.macro_bands or {}).items()},
        "selection": selection,
    })


def _dormant_reference(ctx: _Context) -> np.ndarray:
    """Risk z over the dormant reference window (months before the main break)."""
    risk: RiskSeries = ctx["risk"]
    pos = main_break(ctx["segmentation"])
    if pos is not None and pos >= 6:
        return risk.z[:pos]
    return risk.z


def _stage_phases(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    risk: RiskSeries = ctx["risk"]
    pcfg = cfg["phases"]
    reference = _dormant_reference(ctx)
    if pcfg["theta_low"] is not None and pcfg["theta_high"] is not None:
        theta_low, theta_high = float(pcfg["theta_low"]), float(pcfg["theta_high"])
        threshold_source = "config"
    else:
        try:
            theta_low, theta_high = calibrate_thresholds(reference)
        except WindowTooShort:
            theta_low, theta_high = calibrate_thresholds(risk.z)
        threshold_source = "calibrated"

    # SPC control limits sit on the standardized scale (mean 0, sd 1)
    # unless a baseline window is configured, matching the convention that
    # +2 sigma marks the epidemic threshold on the z-scored signal.
    if pcfg["baseline_end"]:
        cutoff = MonthIndex.parse(pcfg["baseline_end"])
        mask = np.array([m < cutoff for m in risk.months])
        base = risk.z[mask] if mask.sum() >= 6 else risk.z
        spc_mean, spc_sd = float(np.mean(base)), float(np.std(base))
        if spc_sd == 0:
            spc_sd = 1.0
    else:
        spc_mean, spc_sd = 0.0, 1.0

    seg = ctx["segmentation"]
    tau_rapid = rapid_cut([s.within_slope for s in seg.segments])
    th = PhaseThresholds(theta_low=theta_low, theta_high=theta_high,
                         rapid_cut=tau_rapid, spc_mean=spc_mean, spc_sd=spc_sd)
    ctx["thresholds"] = th
    tl = timeline(ctx["panel"], risk, th)
    ctx["timeline"] = tl
    seg_three = classify_segments(seg, th, "three")
    seg_six = classify_segments(seg, th, "six")
    ctx["segment_phases"] = {"three": seg_three, "six": seg_six}

    doc = _timeline_json(tl)
    doc["threshold_source"] = threshold_source
    doc["segment_classification"] = {
        "three": {"segment_phases": list(seg_three.segment_phases),
                  "month_labels": list(seg_three.month_labels),
                  "distribution": {k: {"months": v[0], "pct": v[1]}
                                   for k, v in seg_three.distribution().items()}},
        "six": {"segment_phases": list(seg_six.segment_phases),
                "month_labels": list(seg_six.month_labels),
                "distribution": {k: {"months": v[0], "pct": v[1]}
                                 for k, v in seg_six.distribution().items()}},
    }
    store.write_json("phases", doc)


def _stage_forecast(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    if not cfg["forecast"]["enabled"]:
        return
    panel: MonthlyPanel = ctx["panel"]
    series = panel.nowcast_count.astype(float)
    grid = cfg["forecast"]["grid"]
    selection = arima_select(series, tuple(tuple(o) for o in grid) if grid
                             else DEFAULT_ORDER_GRID)
    mean, sd = float(series.mean()), float(series.std())
    band = arima_forecast(selection.best, cfg["forecast"]["horizon"],
                          ctx.get("thresholds"), risk_mean=mean,
                          risk_sd=sd if sd > 0 else 1.0)
    ctx["forecast_band"] = band
    ctx["forecast_fit"] = selection.best
    store.write_json("forecast", {
        "selected_order": list(selection.best.order),
        "constant": selection.best.constant,
        "ar": selection.best.ar.tolist(),
        "ma": selection.best.ma.tolist(),
        "sigma2": selection.best.sigma2,
        "loglik": selection.best.loglik,
        "aic": selection.best.aic,
        "aic_table": {str(k): v for k, v in sorted(selection.table.items())},
        "failures": {str(k): v for k, v in selection.failures.items()},
        "horizon": cfg["forecast"]["horizon"],
        "point": band.point.tolist(),
        "lower95": band.lower95.tolist(),
        "upper95": band.upper95.tolist(),
        "projected_phase": [p.value for p in band.projected_phase],
        "negative_lower_warning": band.negative_lower_warning,
    })


def _stage_impact(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    path = cfg["inputs"]["interventions"]
    if not (cfg["impact"]["enabled"] and path):
        return
    with open(path, newline="") as fh:
        events = load_interventions(fh)
    risk: RiskSeries = ctx["risk"]
    results = analyze_events(risk, events, cfg["impact"]["window"],
                             cfg["impact"]["method"])
    waves = wave_impact(risk, events, cfg["impact"]["wave_window"],
                        cfg["impact"]["method"]) if any(e.wave for e in events) else []
    ctx["impact_results"] = results

    def row(r):
        return {"name": r.event.name, "month": str(r.event.month),
                "type": r.event.type, "expected": r.event.expected_effect,
                "pre_mean": r.pre_mean, "post_mean": r.post_mean,
                "delta": r.delta, "t": r.t_stat, "p_raw": r.p_raw,
                "p_fdr": r.p_fdr, "direction": r.direction,
                "truncated": r.truncated}

    store.write_json("impact", {
        "window": cfg["impact"]["window"],
        "method": cfg["impact"]["method"],
        "events": [row(r) for r in results],
        "waves": [row(r) for r in waves],
        "expected_vs_actual": expected_vs_actual(results),
    })


def _stage_agreement(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    if not cfg["agreement"]["enabled"]:
        return
    risk: RiskSeries = ctx["risk"]
    doc: dict[str, Any] = {}

    seg_labels = ctx["segmentation"].labels(len(risk.months))
    klabels = ctx["kmeans_fit"].labels
    part = agree_mod.partition_agreement(seg_labels.tolist(), klabels.tolist())
    doc["pelt_vs_kmeans"] = {"ari": part.ari, "nmi": part.nmi}
    if "hmm_fit" in ctx:
        part2 = agree_mod.partition_agreement(ctx["hmm_fit"].states.tolist(),
                                              klabels.tolist())
        doc["hmm_vs_kmeans"] = {"ari": part2.ari, "nmi": part2.nmi}

    ref_path = cfg["inputs"]["reference"]
    if ref_path:
        # accepts either a bare (month, count) file or a full panel CSV
        with open(ref_path, newline="") as fh:
            header = fh.readline().strip().split(",")
            fh.seek(0)
            column = "count" if "count" in header else "raw_count"
            ref = load_month_value_csv(fh, column)
        panel: MonthlyPanel = ctx["panel"]
        shared = [(i, m) for i, m in enumerate(panel.months) if m in ref]
        if len(shared) >= 6:
            idx = [i for i, _ in shared]
            months = [m for _, m in shared]
            a = panel.nowcast_count[idx].astype(float)
            b = np.array([ref[m] for m in months], dtype=float)
            if np.ptp(a) == 0 or np.ptp(b) == 0:
                raise ZeroVariance("reference comparison needs non-constant series")
            ccf = agree_mod.lagged_ccf(a, b, cfg["agreement"]["max_lag"])
            ref_z, _, _ = standardize(b)
            ref_risk = RiskSeries(tuple(months), ref_z, rolling_slope(ref_z),
                                  float(b.mean()), float(b.std()))
            ref_tl = timeline(panel, ref_risk, ctx["thresholds"])
            own_six = {m: p for m, p in zip(ctx["timeline"].months,
                                            ctx["timeline"].six_phase)}
            shared_pairs = [(own_six[m].value, q.value)
                            for m, q in zip(ref_tl.months, ref_tl.six_phase)
                            if m in own_six]
            p1 = [a_ for a_, _ in shared_pairs]
            p2 = [b_ for _, b_ in shared_pairs]
            pa_all = agree_mod.phase_agreement(p1, p2)
            doc["reference"] = {
                "n_overlap": len(shared),
                "months": [str(m) for m in months],
                "pearson_r": agree_mod.pearson(a, b) if len(a) >= 3 else None,
                "overlay_a": agree_mod.minmax_scale(a).tolist(),
                "overlay_b": agree_mod.minmax_scale(b).tolist(),
                "ccf": {str(k): v for k, v in ccf.r.items()},
                "best_lag": ccf.best_lag,
                "best_r": ccf.best_r,
                "kappa_all_months": {
                    "raw": pa_all.raw_agreement, "chance": pa_all.chance_agreement,
                    "kappa": pa_all.kappa},
                "confusion": {f"{a_}|{b_}": n
                              for (a_, b_), n in pa_all.confusion.items()},
            }
            try:
                pa_drop = agree_mod.phase_agreement(
                    p1, p2, drop_label="NoEvidencedOccurrence")
                doc["reference"]["kappa_excluding_no_evidence"] = {
                    "raw": pa_drop.raw_agreement, "chance": pa_drop.chance_agreement,
                    "kappa": pa_drop.kappa}
            except ValueError:
                pass
    ctx["agreement"] = doc
    store.write_json("agreement", doc)


def _stage_sweeps(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    scfg = cfg["sweeps"]
    if not scfg["enabled"]:
        return
    th: PhaseThresholds = ctx["thresholds"]
    seg = ctx["segmentation"]

    grid = scfg["threshold_grid"] or [round(-0.8 + 0.1 * i, 2) for i in range(14)]
    sweep = threshold_sweep(seg, th, grid, "three")
    ctx["threshold_sweep"] = sweep
    store.write_json("sweeps/threshold", {
        "axis": sweep.axis,
        "grid": list(sweep.grid),
        "outcomes": [dict(o, segment_phases=list(o["segment_phases"]))
                     for o in sweep.outcomes],
        "invariant_zones": [list(z) for z in sweep.invariant_zones],
    })

    if scfg["threshold_grid_high"]:
        two = two_threshold_sweep(ctx["panel"], ctx["risk"], th,
                                  scfg["threshold_grid"] or [th.theta_low],
                                  scfg["threshold_grid_high"])
        store.write_json("sweeps/two_threshold", {
            "axis": two.axis,
            "outcomes": list(two.outcomes),
            "flat_axes": list(two.flat_axes),
        })

    formula = CountFormula(
        time_linear=cfg["glm"]["formula"]["time_linear"],
        time_quadratic=cfg["glm"]["formula"]["time_quadratic"],
        media=cfg["glm"]["formula"]["media"] and ctx["panel"].media_index is not None)
    if scfg["halflives"] and "star_events" in ctx:
        hl = halflife_sweep(ctx["star_events"], ctx["panel"], scfg["halflives"],
                            formula, cfg["glm"]["alpha"], seg.penalty,
                            tuple(cfg["exposure"]["scale_to"]))
        store.write_json("sweeps/halflife", {
            "axis": hl.axis, "grid": list(hl.grid), "outcomes": list(hl.outcomes)})
    if scfg["alphas"] and cfg["glm"]["family"] == "negbin" and \
            ctx["panel"].exposure is not None:
        ds = dispersion_sweep(ctx["panel"], scfg["alphas"], formula, seg.penalty)
        store.write_json("sweeps/dispersion", {
            "axis": ds.axis, "grid": list(ds.grid), "outcomes": list(ds.outcomes)})


def _stage_card(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    card = card_mod.build_card(ctx, cfg)
    ctx["card"] = card
    store.write_json("card", card)
    path = store.run_dir / "card.txt"
    path.write_text(card_mod.render_card_text(card))
    store.record_file("card_text", path)


def _stage_figures(ctx: _Context, cfg: dict, store: ArtifactStore) -> None:
    fig_dir = store.run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    risk: RiskSeries = ctx["risk"]
    p1 = fig_dir / "risk_overview.png"
    figures.render_risk_overview(p1, risk, ctx["segmentation"], ctx["timeline"])
    store.record_file("figures/risk_overview", p1)
    p2 = fig_dir / "phase_distribution.png"
    figures.render_phase_distribution(p2, ctx["timeline"])
    store.record_file("figures/phase_distribution", p2)
    if "forecast_band" in ctx:
        p3 = fig_dir / "forecast.png"
        figures.render_forecast(p3, ctx["panel"].nowcast_count,
                                ctx["panel"].months, ctx["forecast_band"])
        store.record_file("figures/forecast", p3)
    if "threshold_sweep" in ctx:
        p4 = fig_dir / "threshold_sweep.png"
        figures.render_threshold_sweep(p4, ctx["threshold_sweep"])
        store.record_file("figures/threshold_sweep", p4)


_STAGE_FUNCS: dict[str, Callable[[_Context, dict, ArtifactStore], None]] = {
    "ingest": _stage_ingest,
    "delay": _stage_delay,
    "exposure": _stage_exposure,
    "glm": _stage_glm,
    "regimes": _stage_regimes,
    "phases": _stage_phases,
    "forecast": _stage_forecast,
    "impact": _stage_impact,
    "agreement": _stage_agreement,
    "sweeps": _stage_sweeps,
    "card": _stage_card,
    "figures": _stage_figures,
}


def run_pipeline(user_config: dict[str, Any], out_root: Path,
                 until: str | None = None) -> RunManifest:
    """Execute the pipeline and persist a sealed, content-addressed run.

    `until` stops after the named stage (inclusive), retaining only that
    prefix's artifacts; later stages are simply not run.
    """
    cfg = merge_config(user_config)
    if until is not None and until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}; stages: {STAGES}")
    run_id, digests = compute_run_id(cfg if until is None
                                     else {**cfg, "_until": until})
    run_dir = Path(out_root) / "runs" / run_id
    store = ArtifactStore(run_dir)
    ctx = _Context()

    manifest = RunManifest(run_id=run_id, run_dir=run_dir, config=cfg,
                           input_digests=digests, artifacts=store.index,
                           status="running")
    stages = STAGES[:STAGES.index(until) + 1] if until else STAGES
    for stage in stages:
        try:
            _STAGE_FUNCS[stage](ctx, cfg, store)
        except Exception as exc:
            manifest.status = "failed"
            manifest.failed_stage = stage
            _write_manifest(manifest)
            raise StageError(stage, exc) from exc
    manifest.status = "sealed"
    _write_manifest(manifest)
    return manifest


def _write_manifest(manifest: RunManifest) -> None:
    path = manifest.run_dir / "manifest.json"
    with path.open("w") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=True, default=_jsonify)
        fh.write("\n")


def load_manifest(out_root: Path, run_id: str) -> dict[str, Any]:
    path = Path(out_root) / "runs" / run_id / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no run {run_id} under {out_root}")
    return json.loads(path.read_text())
