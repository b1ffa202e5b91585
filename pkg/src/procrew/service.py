"""Stateless JSON-over-HTTP scoring service for training pipelines.

Endpoints: POST /v1/reward/batch, POST /v1/metrics/corpus, POST /v1/validate,
GET /healthz. Responses are produced by the same code paths as the CLI, so
outputs are byte-identical for identical inputs and configs.
"""

from __future__ import annotations

import dataclasses
import logging
import signal
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import __version__
from .grammar import ProcedureSyntaxError, parse_procedure
from .jsonio import canonical_json_bytes
from .metrics import EmptyCorpusError, evaluate_corpus
from .rewards import DEFAULT_REWARD, RewardConfig, batch_reward
from .schema import DEFAULT_SCHEMA, SchemaConfig
from .validation import validate_text

log = logging.getLogger(__name__)

MIN_BODY_LIMIT = 1 << 20  # 1 MiB


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    max_body: int = 64 << 20
    workers: int = 8
    batch_cap: int = 4096
    keepalive_timeout: float = 5.0  # idle connections drop so shutdown can drain
    schema_config: SchemaConfig = DEFAULT_SCHEMA
    reward_config: RewardConfig = DEFAULT_REWARD

    def __post_init__(self):
        # port 0 asks the OS for an ephemeral port (test servers)
        if not 0 <= self.port <= 65535:
            raise ValueError("port must be in [1, 65535]")
        if self.max_body < MIN_BODY_LIMIT:
            raise ValueError("max_body must be at least 1 MiB")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


_REWARD_OVERRIDE_KEYS = {
    "theta",
    "exceeding_mode",
    "quantity_rel_tol",
    "whole_response_format_penalty",
    "sequence_aggregation",
}


def _reward_config_with_overrides(base: RewardConfig, overrides: dict) -> RewardConfig:
    unknown = set(overrides) - _REWARD_OVERRIDE_KEYS
    if unknown:
        raise ServiceError(400, "bad_config", f"unknown config_overrides: {sorted(unknown)}")
    try:
        return dataclasses.replace(base, **overrides)
    except (TypeError, ValueError) as exc:
        raise ServiceError(400, "bad_config", str(exc))


def handle_reward_batch(body: dict, cfg: ServiceConfig) -> dict:
    items = body.get("items")
    if not isinstance(items, list) or not items:
        raise ServiceError(400, "bad_request", "body must carry a non-empty 'items' list")
    if len(items) > cfg.batch_cap:
        raise ServiceError(413, "batch_too_large", f"batch of {len(items)} exceeds cap {cfg.batch_cap}")
    reward_cfg = _reward_config_with_overrides(cfg.reward_config, body.get("config_overrides") or {})
    refs, preds = [], []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "reference" not in item or "prediction_raw" not in item:
            raise ServiceError(400, "bad_request", f"item {i} must carry 'reference' and 'prediction_raw'")
        try:
            refs.append(parse_procedure(item["reference"], cfg.schema_config))
        except ProcedureSyntaxError as exc:
            raise ServiceError(400, "bad_reference", f"item {i}: {exc}")
        preds.append(item["prediction_raw"])
    result = batch_reward(refs, preds, cfg.schema_config, reward_cfg)
    return result.to_json_dict()


def handle_metrics_corpus(body: dict, cfg: ServiceConfig) -> dict:
    pairs = body.get("pairs")
    if not isinstance(pairs, list) or not pairs:
        raise ServiceError(400, "bad_request", "body must carry a non-empty 'pairs' list")
    if len(pairs) > cfg.batch_cap:
        raise ServiceError(413, "batch_too_large", f"{len(pairs)} pairs exceeds cap {cfg.batch_cap}")
    corpus = []
    for i, pair in enumerate(pairs):
        if not isinstance(pair, dict) or "reference" not in pair or "prediction" not in pair:
            raise ServiceError(400, "bad_request", f"pair {i} must carry 'reference' and 'prediction'")
        corpus.append((pair["reference"], pair["prediction"]))
    try:
        report = evaluate_corpus(corpus, config=cfg.schema_config)
    except EmptyCorpusError as exc:
        raise ServiceError(400, "empty_corpus", str(exc))
    return report.to_json_dict()


def handle_validate(body: dict, cfg: ServiceConfig) -> dict:
    if "procedure" not in body:
        raise ServiceError(400, "bad_request", "body must carry 'procedure'")
    return validate_text(body["procedure"], cfg.schema_config).to_json_dict()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    config: ServiceConfig
    gate: threading.BoundedSemaphore

    def log_message(self, fmt, *args):  # default stderr chatter off
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload_bytes: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload_bytes)))
        self.end_headers()
        self.wfile.write(payload_bytes)

    def _send_error_json(self, status: int, code: str, message: str) -> None:
        self._send(status, canonical_json_bytes({"error": {"code": code, "message": message}}))

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, canonical_json_bytes({"status": "ok", "version": __version__}))
        else:
            self._send_error_json(404, "not_found", f"no route {self.path}")

    def do_POST(self):
        import json

        routes = {
            "/v1/reward/batch": handle_reward_batch,
            "/v1/metrics/corpus": handle_metrics_corpus,
            "/v1/validate": handle_validate,
        }
        handler = routes.get(self.path)
        if handler is None:
            self._send_error_json(404, "not_found", f"no route {self.path}")
            return
        length = int(self.headers.get("Content-Length") or 0)
        if length > self.config.max_body:
            self._send_error_json(413, "body_too_large", f"body of {length} bytes exceeds limit")
            return
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as exc:
            self._send_error_json(400, "bad_json", str(exc))
            return
        try:
            with self.gate:
                result = handler(body, self.config)
        except ServiceError as exc:
            self._send_error_json(exc.status, exc.code, str(exc))
        except Exception as exc:  # noqa: BLE001 - nothing may crash the worker
            log.exception("unhandled service error")
            self._send_error_json(500, "internal", str(exc))
        else:
            self._send(200, canonical_json_bytes(result))


def make_server(cfg: ServiceConfig) -> ThreadingHTTPServer:
    handler = type(
        "BoundHandler",
        (_Handler,),
        {"config": cfg, "gate": threading.BoundedSemaphore(cfg.workers), "timeout": cfg.keepalive_timeout},
    )
    server = ThreadingHTTPServer((cfg.host, cfg.port), handler)
    server.daemon_threads = False  # drain in-flight requests on shutdown
    return server


def serve(cfg: ServiceConfig) -> None:
    """Run until SIGINT/SIGTERM; in-flight requests drain before exit."""
    server = make_server(cfg)

    def _shutdown(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    try:
        signal.signal(signal.SIGINT, _shutdown)
        signal.signal(signal.SIGTERM, _shutdown)
    except ValueError:
        pass  # not the main thread; caller manages lifetime
    log.info("serving on %s:%s", cfg.host, cfg.port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
