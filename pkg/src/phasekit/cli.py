"""Command-line interface.

Stage verbs run the pipeline up to the named stage and print a short
summary; `run` executes everything, `card` prints the governance card,
`serve` starts the HTTP service, and `synth` writes demo corpora.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

from .card import card_with_declarations, render_card_text
from .errors import PhasekitError
from .pipeline import RunManifest, run_pipeline
from .service import serve
from .synth import write_oscillatory_corpus, write_step_corpus


def _load_config(args: argparse.Namespace) -> dict:
    if not args.config:
        raise SystemExit("error: --config <path> is required for this command")
    cfg = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _run(args: argparse.Namespace, until: str | None,
         mutate=None) -> RunManifest:
    cfg = _load_config(args)
    if mutate:
        cfg = mutate(copy.deepcopy(cfg))
    manifest = run_pipeline(cfg, Path(args.out), until=until)
    print(f"run {manifest.run_id} [{manifest.status}] -> {manifest.run_dir}")
    return manifest


def _artifact(manifest: RunManifest, name: str) -> dict:
    entry = manifest.artifacts[name]
    return json.loads((manifest.run_dir / entry["path"]).read_text())


def cmd_ingest(args):
    m = _run(args, "ingest")
    rejects = _artifact(m, "rejects")
    print(f"panel written ({m.artifacts['panel']['path']}); "
          f"{len(rejects)} rejected rows")


def cmd_fit_delay(args):
    m = _run(args, "delay")
    doc = _artifact(m, "delay_model")
    print(f"selected {doc['selected']} (n={doc['n_valid']}, "
          f"excluded {doc['excluded_fraction']:.1%}); "
          f"empirical mean lag {doc['empirical_mean_days']:.1f} days")
    for fam, row in doc["models"].items():
        print(f"  {fam:<12} aic {row['aic']:.1f}  params {row['params']}")


def cmd_nowcast(args):
    m = _run(args, "delay")
    doc = _artifact(m, "nowcast")
    print(f"window {doc['window_months']} months, cap {doc['cap']}x, "
          f"as of {doc['as_of']}")
    for h, (f, infl) in enumerate(zip(doc["cdf"], doc["inflation_factors"])):
        print(f"  horizon {h}: F={f:.3f} inflation x{infl:.2f}")


def cmd_exposure(args):
    m = _run(args, "exposure")
    doc = _artifact(m, "exposure_meta")
    print(json.dumps(doc, indent=2))


def cmd_fit_glm(args):
    m = _run(args, "glm")
    doc = _artifact(m, "glm_fit")
    print(f"family {doc['family']} (alpha={doc['alpha']}), "
          f"offset={doc['offset']}, loglik {doc['loglik']:.2f}")
    print(f"{'term':<16}{'estimate':>10}{'se':>10}{'rate_ratio':>12}{'p':>10}")
    for row in doc["coefficients"]:
        print(f"{row['term']:<16}{row['estimate']:>10.3f}{row['se']:>10.3f}"
              f"{row['rate_ratio']:>12.3f}{row['p']:>10.3f}")


def cmd_detect(args):
    def mutate(cfg):
        if args.method == "hmm":
            cfg.setdefault("hmm", {})["enabled"] = True
        return cfg

    m = _run(args, "regimes", mutate)
    if args.method == "pelt":
        doc = _artifact(m, "segmentation")
        print(f"penalty {doc['penalty']:.2f}; "
              f"changepoints at {doc['changepoint_months']}")
        for s in doc["segments"]:
            print(f"  {s['start_month']}..{s['end_month']}  "
                  f"mean {s['mean']:+.2f}  slope {s['within_slope']:+.3f}  "
                  f"count/mo {s['mean_count']:.2f}")
    elif args.method == "hmm":
        doc = _artifact(m, "hmm")
        print(f"{doc['n_states']} states, loglik {doc['loglik']:.2f}, "
              f"degenerate={doc['degenerate']}")
        for k, (mu, occ) in enumerate(zip(doc["means"], doc["occupancy"])):
            print(f"  state {k}: mean {mu:+.2f}, {occ} months")
    else:
        doc = _artifact(m, "kmeans")
        print(f"K={doc['k']}, silhouette {doc['silhouette']:.3f}, "
              f"CH {doc['calinski_harabasz']:.1f}")
        for k, (risk, band) in enumerate(zip(doc["centroid_risk"],
                                             doc["macro_bands"].values())):
            print(f"  cluster {k}: risk {risk:+.2f} ({band} band)")


def cmd_classify(args):
    m = _run(args, "phases")
    doc = _artifact(m, "phases")
    th = doc["thresholds"]
    print(f"thresholds: theta_low {th['theta_low']:+.3f}, "
          f"theta_high {th['theta_high']:+.3f} ({doc['threshold_source']})")
    print("three-phase distribution:")
    for name, row in doc["distribution_three"].items():
        print(f"  {name:<20}{row['months']:>5} months {row['pct']:>6.1f}%")
    print(f"current: {doc['six_phase'][-1]} / {doc['three_phase'][-1]}")


def cmd_forecast(args):
    m = _run(args, "forecast")
    doc = _artifact(m, "forecast")
    print(f"ARIMA{tuple(doc['selected_order'])}, aic {doc['aic']:.2f}")
    for h, (pt, lo, hi, ph) in enumerate(zip(doc["point"], doc["lower95"],
                                             doc["upper95"], doc["projected_phase"]),
                                         start=1):
        print(f"  +{h:>2}m  {pt:6.1f}  [{lo:6.1f}, {hi:6.1f}]  {ph}")


def cmd_impact(args):
    m = _run(args, "impact")
    doc = _artifact(m, "impact")
    print(f"{len(doc['events'])} events, window {doc['window']}m, "
          f"FDR {doc['method']}")
    for row in doc["events"]:
        print(f"  {row['name']:<28}{row['month']}  d={row['delta']:+.2f} "
              f"p_fdr={row['p_fdr']:.3f}  {row['direction']}")
    for row in doc["waves"]:
        print(f"  [wave] {row['name']:<21}{row['month']}  d={row['delta']:+.2f} "
              f"p_fdr={row['p_fdr']:.3f}  {row['direction']}")


def cmd_agree(args):
    m = _run(args, "agreement")
    print(json.dumps(_artifact(m, "agreement"), indent=2))


def cmd_sweep(args):
    m = _run(args, "sweeps")
    doc = _artifact(m, "sweeps/threshold")
    print("theta_low sweep:")
    for o in doc["outcomes"]:
        print(f"  {o['theta_low']:+.2f}  dormant {o['dormant_pct']:5.1f}%  "
              f"endemic {o['endemic_pct']:5.1f}%")
    print(f"invariant zones: {doc['invariant_zones']}")


def cmd_card(args):
    if args.run_id:
        run_dir = Path(args.out) / "runs" / args.run_id
        if not run_dir.exists():
            raise SystemExit(f"error: no run {args.run_id} under {args.out}")
        card = card_with_declarations(run_dir)
    else:
        m = _run(args, None)
        card = card_with_declarations(m.run_dir)
    print(render_card_text(card))


def cmd_run(args):
    m = _run(args, None)
    print(f"{len(m.artifacts)} artifacts sealed")
    for name in sorted(m.artifacts):
        print(f"  {name:<28} {m.artifacts[name]['sha256'][:12]}")


def cmd_serve(args):
    serve(Path(args.out), args.host, args.port)


def cmd_synth(args):
    out = Path(args.dir)
    if args.kind == "step":
        corpus = write_step_corpus(out, seed=args.seed or 0)
    else:
        corpus = write_oscillatory_corpus(out, seed=args.seed or 0)
    print(f"wrote {args.kind} corpus under {out} "
          f"({corpus.n_months} months from {corpus.start})")
    for name in ("incidents_csv", "stars_csv", "media_csv", "exposure_csv",
                 "interventions_csv"):
        path = getattr(corpus, name)
        if path:
            print(f"  {name[:-4]}: {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasekit",
        description="incident surveillance: risk signals, regimes, phases")
    parser.add_argument("--config", help="path to the run config JSON")
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="parse incidents into a monthly panel").set_defaults(func=cmd_ingest)
    sub.add_parser("fit-delay", help="fit reporting-delay models").set_defaults(func=cmd_fit_delay)
    sub.add_parser("nowcast", help="show the nowcast window and factors").set_defaults(func=cmd_nowcast)
    sub.add_parser("exposure", help="attach exposure denominators").set_defaults(func=cmd_exposure)
    sub.add_parser("fit-glm", help="fit the count regression").set_defaults(func=cmd_fit_glm)

    detect = sub.add_parser("detect", help="run a regime detector")
    detect.add_argument("method", choices=["pelt", "hmm", "kmeans"])
    detect.set_defaults(func=cmd_detect)

    sub.add_parser("classify", help="phase classification").set_defaults(func=cmd_classify)
    sub.add_parser("forecast", help="ARIMA forecast").set_defaults(func=cmd_forecast)
    sub.add_parser("impact", help="intervention impact tests").set_defaults(func=cmd_impact)
    sub.add_parser("agree", help="agreement metrics").set_defaults(func=cmd_agree)
    sub.add_parser("sweep", help="sensitivity sweeps").set_defaults(func=cmd_sweep)

    card = sub.add_parser("card", help="print the meta-reporting card")
    card.add_argument("--run-id", help="read an existing run instead of running")
    card.set_defaults(func=cmd_card)

    sub.add_parser("run", help="full pipeline").set_defaults(func=cmd_run)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8765)
    srv.set_defaults(func=cmd_serve)

    synth = sub.add_parser("synth", help="write a synthetic demo corpus")
    synth.add_argument("kind", choices=["step", "oscillatory"])
    synth.add_argument("--dir", default="data", help="output directory")
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except PhasekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
