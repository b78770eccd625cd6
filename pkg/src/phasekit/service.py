"""JSON-over-HTTP service for sealed runs and expert what-if exploration.

Endpoints::

    POST /runs                         config -> run_id (runs the pipeline)
    GET  /runs/{id}                    manifest
    GET  /runs/{id}/artifacts/{name}   artifact payload (JSON or CSV)
    GET  /runs/{id}/classify?theta_low=&theta_high=&framework=
    GET  /runs/{id}/segments?penalty=
    GET  /runs/{id}/sweeps/{axis}
    GET  /runs/{id}/card
    GET  /runs/{id}/declarations
    POST /runs/{id}/declarations

Runs are immutable once sealed: reclassification endpoints are pure
reads plus cheap recomputation over cached artifacts, declarations go to
an append-only log, and any attempt to mutate sealed artifacts is
refused with 409.
"""

from __future__ import annotations

import csv
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import card as card_mod
from .errors import PhasekitError
from .months import MonthIndex
from .pelt import pelt_detect, segment_stats
from .phases import (SIX_PHASE_ORDER, THREE_PHASE_ORDER, PhaseThresholds,
                     classify_segments, classify_six, classify_three)
from .pipeline import (_jsonify, _segmentation_json, compute_run_id,
                       merge_config, run_pipeline)

VALID_PHASES = {p.value for p in SIX_PHASE_ORDER} | {p.value for p in THREE_PHASE_ORDER}


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class RunRepository:
    """Disk-backed access to sealed runs plus the cheap recomputations
    behind the what-if endpoints."""

    def __init__(self, out_root: Path):
        self.out_root = Path(out_root)
        self._declaration_lock = threading.Lock()

    # -- lookups ------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        path = self.out_root / "runs" / run_id
        if not (path / "manifest.json").exists():
            raise ApiError(404, f"unknown run {run_id}")
        return path

    def manifest(self, run_id: str) -> dict[str, Any]:
        return json.loads((self.run_dir(run_id) / "manifest.json").read_text())

    def artifact(self, run_id: str, name: str) -> tuple[bytes, str]:
        run_dir = self.run_dir(run_id)
        manifest = self.manifest(run_id)
        entry = manifest["artifacts"].get(name)
        if entry is None:
            raise ApiError(404, f"run {run_id} has no artifact {name!r}")
        path = run_dir / entry["path"]
        ctype = {"json": "application/json", "csv": "text/csv",
                 "png": "image/png", "txt": "text/plain"}.get(
                     path.suffix.lstrip("."), "application/octet-stream")
        return path.read_bytes(), ctype

    # -- cached series ------------------------------------------------

    def _risk(self, run_id: str) -> tuple[list[MonthIndex], np.ndarray, np.ndarray]:
        path = self.run_dir(run_id) / "risk.csv"
        if not path.exists():
            raise ApiError(404, f"run {run_id} has no risk artifact")
        months, z, slope = [], [], []
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                months.append(MonthIndex.parse(row["month"]))
                z.append(float(row["z"]))
                slope.append(float(row["slope"]))
        return months, np.array(z), np.array(slope)

    def _counts(self, run_id: str) -> dict[str, float]:
        path = self.run_dir(run_id) / "panel.csv"
        counts: dict[str, float] = {}
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                counts[row["month"]] = float(row["raw_count"])
        return counts

    def _phases_doc(self, run_id: str) -> dict[str, Any]:
        path = self.run_dir(run_id) / "phases.json"
        if not path.exists():
            raise ApiError(404, f"run {run_id} has no phases artifact")
        return json.loads(path.read_text())

    # -- operations ----------------------------------------------------

    def launch(self, config: dict[str, Any]) -> tuple[dict[str, Any], bool]:
        try:
            merged = merge_config(config)
        except PhasekitError as exc:
            raise ApiError(422, str(exc)) from exc
        run_id, _ = compute_run_id(merged)
        existing = self.out_root / "runs" / run_id / "manifest.json"
        if existing.exists():
            doc = json.loads(existing.read_text())
            if doc.get("status") == "sealed":
                return {"run_id": run_id, "status": "sealed"}, False
        try:
            manifest = run_pipeline(config, self.out_root)
        except PhasekitError as exc:
            raise ApiError(422, str(exc)) from exc
        return {"run_id": manifest.run_id, "status": manifest.status}, True

    def classify(self, run_id: str, theta_low: float, theta_high: float,
                 framework: str) -> dict[str, Any]:
        if framework not in ("six", "three"):
            raise ApiError(422, "framework must be 'six' or 'three'")
        if not theta_low < theta_high:
            raise ApiError(422, "theta_low must be below theta_high")
        months, z, slope = self._risk(run_id)
        counts = self._counts(run_id)
        doc = self._phases_doc(run_id)
        base = doc["thresholds"]
        th = PhaseThresholds(
            theta_low=theta_low, theta_high=theta_high,
            trend_cut=base["trend_cut"], rapid_cut=base["rapid_cut"],
            spc_mean=base["spc_mean"], spc_sd=base["spc_sd"])

        labels = []
        for m, zz, ss in zip(months, z, slope):
            c = counts.get(str(m), 0.0)
            if framework == "six":
                labels.append(classify_six(c, float(zz), float(ss), th).value)
            else:
                labels.append(classify_three(c, float(zz), float(ss), th).value)
        n = len(labels)
        distribution = {lab: {"months": labels.count(lab),
                              "pct": 100.0 * labels.count(lab) / n}
                        for lab in sorted(set(labels))}

        seg_doc = json.loads((self.run_dir(run_id) / "segmentation.json").read_text())
        seg = self._rebuild_segmentation(run_id, seg_doc["penalty"])
        seg_cls = classify_segments(seg, th, framework)
        seg_dist = seg_cls.distribution()

        zone = self._containing_zone(run_id, theta_low)
        return {
            "run_id": run_id,
            "theta_low": theta_low,
            "theta_high": theta_high,
            "framework": framework,
            "months": [str(m) for m in months],
            "labels": labels,
            "distribution": distribution,
            "segment_phases": list(seg_cls.segment_phases),
            "segment_month_labels": list(seg_cls.month_labels),
            "segment_distribution": {k: {"months": v[0], "pct": v[1]}
                                     for k, v in seg_dist.items()},
            "invariant_zone": list(zone) if zone else None,
        }

    def _containing_zone(self, run_id: str, theta_low: float) -> tuple[float, float] | None:
        path = self.run_dir(run_id) / "sweeps" / "threshold.json"
        if not path.exists():
            return None
        for lo, hi in json.loads(path.read_text()).get("invariant_zones", []):
            if lo < theta_low < hi:
                return (lo, hi)
        return None

    def _rebuild_segmentation(self, run_id: str, penalty: float):
        months, z, _ = self._risk(run_id)
        counts_map = self._counts(run_id)
        counts = np.array([counts_map.get(str(m), 0.0) for m in months])
        return segment_stats(z, pelt_detect(z, penalty), counts)

    def segments_at(self, run_id: str, penalty: float) -> dict[str, Any]:
        if penalty <= 0:
            raise ApiError(422, "penalty must be positive")
        months, _, _ = self._risk(run_id)
        seg = self._rebuild_segmentation(run_id, penalty)
        return _segmentation_json(seg, months)

    def sweep(self, run_id: str, axis: str) -> dict[str, Any]:
        path = self.run_dir(run_id) / "sweeps" / f"{axis}.json"
        if not path.exists():
            raise ApiError(404, f"run {run_id} has no sweep axis {axis!r}")
        return json.loads(path.read_text())

    def card(self, run_id: str) -> dict[str, Any]:
        run_dir = self.run_dir(run_id)
        if not (run_dir / "card.json").exists():
            raise ApiError(404, f"run {run_id} has no card artifact")
        return card_mod.card_with_declarations(run_dir)

    def declarations(self, run_id: str) -> list[dict[str, Any]]:
        return card_mod.read_declarations(self.run_dir(run_id))

    def declare(self, run_id: str, body: dict[str, Any]) -> dict[str, Any]:
        run_dir = self.run_dir(run_id)
        manifest = self.manifest(run_id)
        if manifest.get("status") != "sealed":
            raise ApiError(409, "declarations require a sealed run")
        analyst = (body.get("analyst") or "").strip()
        phase = (body.get("phase") or "").strip()
        rationale = (body.get("rationale") or "").strip()
        if not analyst:
            raise ApiError(422, "analyst is required")
        if phase not in VALID_PHASES:
            raise ApiError(422, f"phase must be one of {sorted(VALID_PHASES)}")
        if not rationale:
            raise ApiError(422, "rationale must be non-empty")
        parameters = body.get("parameters") or {}
        with self._declaration_lock:
            entry = card_mod.append_declaration(
                run_dir, analyst, manifest.get("domain", ""), phase,
                parameters, rationale)
        return entry


class _Handler(BaseHTTPRequestHandler):
    repo: RunRepository  # set by server factory

    # silence default stderr access logging
    def log_message(self, fmt, *args):  # noqa: A003
        pass

    def _send(self, status: int, payload: bytes, ctype: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, obj: Any) -> None:
        self._send(status, json.dumps(obj, default=_jsonify).encode())

    def _body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b"{}"
        try:
            return json.loads(raw or b"{}")
        except json.JSONDecodeError as exc:
            raise ApiError(422, f"invalid JSON body: {exc}") from exc

    def _route(self, method: str) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        query = {k: v[0] for k, v in parse_qs(url.query).items()}
        try:
            self._dispatch(method, parts, query)
        except ApiError as exc:
            self._send_json(exc.status, {"error": exc.message})
        except PhasekitError as exc:
            self._send_json(422, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json(500, {"error": f"internal error: {exc}"})

    def _dispatch(self, method: str, parts: list[str], query: dict[str, str]) -> None:
        repo = self.repo
        if not parts or parts[0] != "runs":
            raise ApiError(404, "unknown endpoint")

        if len(parts) == 1:
            if method == "POST":
                result, created = repo.launch(self._body())
                self._send_json(201 if created else 200, result)
                return
            raise ApiError(404, "list endpoint not provided; GET /runs/{id}")

        run_id = parts[1]
        rest = parts[2:]
        if method == "POST":
            if rest == ["declarations"]:
                entry = repo.declare(run_id, self._body())
                self._send_json(201, entry)
                return
            # everything else under a run is sealed
            repo.run_dir(run_id)
            raise ApiError(409, "run is sealed; only declarations accept writes")
        if method != "GET":
            repo.run_dir(run_id)
            raise ApiError(409, "runs are immutable once sealed")

        if not rest:
            self._send_json(200, repo.manifest(run_id))
        elif rest[0] == "artifacts" and len(rest) >= 2:
            payload, ctype = repo.artifact(run_id, "/".join(rest[1:]))
            self._send(200, payload, ctype)
        elif rest == ["classify"]:
            try:
                theta_low = float(query["theta_low"])
                theta_high = float(query["theta_high"])
            except (KeyError, ValueError) as exc:
                raise ApiError(422, "theta_low and theta_high must be numbers") from exc
            framework = query.get("framework", "three")
            self._send_json(200, repo.classify(run_id, theta_low, theta_high, framework))
        elif rest == ["segments"]:
            try:
                penalty = float(query["penalty"])
            except (KeyError, ValueError) as exc:
                raise ApiError(422, "penalty must be a number") from exc
            self._send_json(200, repo.segments_at(run_id, penalty))
        elif rest[0] == "sweeps" and len(rest) == 2:
            self._send_json(200, repo.sweep(run_id, rest[1]))
        elif rest == ["card"]:
            self._send_json(200, repo.card(run_id))
        elif rest == ["declarations"]:
            self._send_json(200, repo.declarations(run_id))
        else:
            raise ApiError(404, f"unknown endpoint /{'/'.join(parts)}")

    def do_GET(self):  # noqa: N802
        self._route("GET")

    def do_POST(self):  # noqa: N802
        self._route("POST")

    def do_PUT(self):  # noqa: N802
        self._route("PUT")

    def do_DELETE(self):  # noqa: N802
        self._route("DELETE")


def make_server(out_root: Path, host: str = "127.0.0.1",
                port: int = 8765) -> ThreadingHTTPServer:
    repo = RunRepository(out_root)
    handler = type("BoundHandler", (_Handler,), {"repo": repo})
    return ThreadingHTTPServer((host, port), handler)


def serve(out_root: Path, host: str = "127.0.0.1", port: int = 8765) -> None:
    server = make_server(out_root, host, port)
    print(f"phasekit service on http://{host}:{server.server_address[1]} "
          f"(runs under {out_root})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
