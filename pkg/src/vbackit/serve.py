"""HTTP prediction service for a loaded model bundle.

Endpoints (JSON bodies, snake_case fields matching the logical predictor
names): POST /predict, POST /whatif, GET /metadata, GET /healthz. The
bundle is immutable shared state; the threading server handles concurrent
requests without locking. Unseen categorical levels are a client error
(422), never silently imputed. Optionally serves a static UI directory at
the root path.
"""

from __future__ import annotations

import json
import mimetypes
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .bundle import ModelBundle, field_domains
from .records import DeliveryRecord


class RequestError(Exception):
    def __init__(self, status: int, body: dict):
        super().__init__(body.get("message", "request error"))
        self.status = status
        self.body = body


def _missing(field: str) -> RequestError:
    return RequestError(400, {"error": "missing_field", "field": field,
                              "message": f"required field {field!r} is missing"})


def _unknown(field: str) -> RequestError:
    return RequestError(400, {"error": "unknown_field", "field": field,
                              "message": f"unknown field {field!r}"})


def _unseen(field: str, level, allowed: list[str]) -> RequestError:
    return RequestError(422, {"error": "unseen_level", "field": field, "level": level,
                              "allowed": allowed,
                              "message": f"level {level!r} not seen in training for {field!r}"})


def _out_of_range(field: str, value, lo: float, hi: float) -> RequestError:
    return RequestError(400, {"error": "out_of_range", "field": field, "value": value,
                              "min": lo, "max": hi,
                              "message": f"{field!r} must be within [{lo}, {hi}]"})


@dataclass
class PredictionService:
    """Request validation + encoding + prediction on top of a bundle."""

    bundle: ModelBundle

    def __post_init__(self):
        self._fields = {d["name"]: d for d in field_domains(self.bundle)}

    def _record_from(self, fields: dict) -> DeliveryRecord:
        if not isinstance(fields, dict):
            raise RequestError(400, {"error": "bad_request", "message": "fields must be an object"})
        for name in fields:
            if name not in self._fields:
                raise _unknown(name)
        values = {}
        for name, domain in self._fields.items():
            if name not in fields or fields[name] is None:
                raise _missing(name)
            raw = fields[name]
            if domain["kind"] == "numeric":
                try:
                    value = float(raw)
                except (TypeError, ValueError):
                    raise RequestError(400, {"error": "invalid_value", "field": name,
                                             "message": f"{name!r} must be numeric"}) from None
                if not domain["min"] <= value <= domain["max"]:
                    raise _out_of_range(name, value, domain["min"], domain["max"])
                values[name] = value
            else:
                level = str(raw)
                if level not in domain["levels"]:
                    raise _unseen(name, level, domain["levels"])
                values[name] = level
        return DeliveryRecord(**values)

    def predict(self, fields: dict) -> dict:
        record = self._record_from(fields)
        probability = float(self.bundle.predict_records([record])[0])
        return {
            "probability": probability,
            "predicted_class": int(probability >= self.bundle.threshold),
            "threshold": self.bundle.threshold,
            "model": {
                "family": self.bundle.family,
                "config_hash": self.bundle.metadata.get("config_hash"),
            },
        }

    def whatif(self, fields: dict, sweep_field: str, grid: list) -> dict:
        if sweep_field not in self._fields:
            raise _unknown(sweep_field)
        domain = self._fields[sweep_field]
        base = dict(fields)
        base.setdefault(sweep_field, grid[0] if grid else None)
        self._record_from(base)  # validate everything else first
        if not isinstance(grid, list) or not grid:
            raise RequestError(400, {"error": "bad_request", "message": "grid must be a non-empty list"})

        records = []
        for value in grid:
            point = dict(base)
            point[sweep_field] = value
            records.append(self._record_from(point))
        probs = self.bundle.predict_records(records)
        return {
            "field": sweep_field,
            "kind": domain["kind"],
            "results": [
                {"value": v, "probability": float(p)} for v, p in zip(grid, probs)
            ],
        }

    def metadata(self) -> dict:
        return {
            "family": self.bundle.family,
            "threshold": self.bundle.threshold,
            "fields": field_domains(self.bundle),
            "training": self.bundle.metadata,
        }


def _make_handler(service: PredictionService, static_dir: str | None):
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # no clinical fields in logs
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                parsed = json.loads(raw.decode() or "{}")
            except json.JSONDecodeError:
                raise RequestError(400, {"error": "bad_request", "message": "body is not valid JSON"}) from None
            if not isinstance(parsed, dict):
                raise RequestError(400, {"error": "bad_request", "message": "body must be a JSON object"})
            return parsed

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            if self.path == "/healthz":
                self._send_json(200, {"status": "ok"})
            elif self.path == "/metadata":
                self._send_json(200, service.metadata())
            elif static_root is not None:
                self._serve_static()
            else:
                self._send_json(404, {"error": "not_found", "message": self.path})

        def _serve_static(self):
            rel = self.path.lstrip("/") or "index.html"
            target = (static_root / rel).resolve()
            if not str(target).startswith(str(static_root)) or not target.is_file():
                self._send_json(404, {"error": "not_found", "message": self.path})
                return
            body = target.read_bytes()
            ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            try:
                payload = self._read_json()
                if self.path == "/predict":
                    self._send_json(200, service.predict(payload.get("fields", payload)))
                elif self.path == "/whatif":
                    fields = payload.get("fields")
                    if fields is None:
                        raise RequestError(400, {"error": "bad_request", "message": "missing 'fields'"})
                    sweep_field = payload.get("field")
                    if not sweep_field:
                        raise RequestError(400, {"error": "bad_request", "message": "missing 'field'"})
                    self._send_json(200, service.whatif(fields, sweep_field, payload.get("grid")))
                else:
                    self._send_json(404, {"error": "not_found", "message": self.path})
            except RequestError as exc:
                self._send_json(exc.status, exc.body)
            except Exception as exc:  # pragma: no cover - defensive
                self._send_json(500, {"error": "internal", "message": str(exc)})

    return Handler


class ModelServer:
    """Threading HTTP server wrapper; use .port after start() for port 0."""

    def __init__(self, bundle: ModelBundle, host: str = "127.0.0.1", port: int = 8000,
                 static_dir: str | None = None):
        self.service = PredictionService(bundle)
        self.httpd = ThreadingHTTPServer(
            (host, port), _make_handler(self.service, static_dir)
        )
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self.httpd.serve_forever()
