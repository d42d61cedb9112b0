"""HTTP/JSON prediction service.

POST /v1/predict decodes one request against a model loaded at startup;
GET /v1/health and GET /v1/config report liveness and effective defaults.
Malformed requests return 400 with {code, message, field}; pinyin the
lexicon cannot resolve, and requests that exceed the model's position
budget, return 422 with the same error shape. The model and lexicon are
immutable after startup, so concurrent requests share them freely and
identical bodies always produce identical candidate lists.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from pinyinlm.decoder import CapacityError, DecodeError, Decoder, TokenResolutionError
from pinyinlm.lexicon import MODES, default_lexicon_path, load_lexicon
from pinyinlm.model import load_model

logger = logging.getLogger("pinyinlm.service")


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent service configuration."""


@dataclass(frozen=True)
class AppConfig:
    model_path: Path
    lexicon_path: Path | None = None  # None = bundled lexicon
    host: str = "127.0.0.1"
    port: int = 8756
    beam_size: int = 16
    top_k: int = 10
    log_level: str = "info"
    cors_origins: tuple[str, ...] = ("*",)

    def __post_init__(self):
        if self.beam_size < 1 or not 1 <= self.top_k <= self.beam_size:
            raise ConfigError(
                f"need 1 <= top_k <= beam_size; got top_k={self.top_k}, "
                f"beam_size={self.beam_size}"
            )
        if not 0 < self.port < 65536:
            raise ConfigError(f"port {self.port} out of range")


_CONFIG_KEYS = {
    "model": "model_path",
    "lexicon": "lexicon_path",
    "host": "host",
    "port": "port",
    "beam_size": "beam_size",
    "top_k": "top_k",
    "log_level": "log_level",
    "cors_origins": "cors_origins",
}


def parse_config_text(text: str, where: str = "config") -> dict:
    """JSON object or `key=value` lines (# comments allowed)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{where}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"{where}: top level must be an object")
        return obj
    obj = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{where}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        obj[key.strip()] = value.strip()
    return obj


def load_app_config(
    config_path: str | Path | None = None, **overrides
) -> AppConfig:
    """Precedence: defaults < config file < environment < explicit overrides.
    PINYINLM_BIND ("host:port") and PINYINLM_LOG_LEVEL are honored."""
    raw: dict = {}
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        for key, value in parse_config_text(text, where=str(config_path)).items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{config_path}: unknown key {key!r}")
            raw[_CONFIG_KEYS[key]] = value

    bind = os.environ.get("PINYINLM_BIND")
    if bind:
        host, _, port = bind.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"PINYINLM_BIND must be host:port; got {bind!r}")
        raw["host"], raw["port"] = host, port
    level = os.environ.get("PINYINLM_LOG_LEVEL")
    if level:
        raw["log_level"] = level

    for key, value in overrides.items():
        if key not in set(_CONFIG_KEYS.values()):
            raise ConfigError(f"unknown config override {key!r}")
        if value is not None:
            raw[key] = value

    if "model_path" not in raw:
        raise ConfigError("a model path is required (config key 'model')")
    if isinstance(raw.get("cors_origins"), str):
        raw["cors_origins"] = tuple(
            origin.strip() for origin in raw["cors_origins"].split(",") if origin.strip()
        )
    elif isinstance(raw.get("cors_origins"), list):
        raw["cors_origins"] = tuple(raw["cors_origins"])
    for int_key in ("port", "beam_size", "top_k"):
        if int_key in raw:
            try:
                raw[int_key] = int(raw[int_key])
            except (TypeError, ValueError):
                raise ConfigError(f"config key {int_key!r} must be an integer") from None
    raw["model_path"] = Path(raw["model_path"])
    if raw.get("lexicon_path") is not None:
        raw["lexicon_path"] = Path(raw["lexicon_path"])
    return AppConfig(**raw)


def checkpoint_id(path: str | Path) -> str:
    """Stable model identifier: file stem plus content digest prefix."""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"{Path(path).stem}@{digest[:8]}"


class _ApiError(Exception):
    def __init__(
        self, status: int, code: str, message: str, field: str | None,
        position: int | None = None,
    ):
        self.status = status
        self.code = code
        self.message = message
        self.field = field
        self.position = position


class PredictBody(BaseModel):
    context: str = ""
    pinyin: list[str]
    mode: str = "perfect"
    top_k: int | None = None
    beam_size: int | None = None


def create_app(config: AppConfig) -> FastAPI:
    """Loads the model and lexicon once and serves them read-only."""
    logging.basicConfig(level=config.log_level.upper())
    lexicon_path = config.lexicon_path or default_lexicon_path()
    lexicon = load_lexicon(lexicon_path)
    model, vocab = load_model(config.model_path)
    decoder = Decoder(model, lexicon, vocab)
    model_id = checkpoint_id(config.model_path)
    started = time.monotonic()

    app = FastAPI(title="pinyin prediction service", docs_url=None, redoc_url=None)
    app.state.config = config
    app.state.model_id = model_id
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def error_response(
        status: int, code: str, message: str, field: str | None,
        position: int | None = None,
    ):
        content: dict = {"code": code, "message": message, "field": field}
        if position is not None:
            content["position"] = position
        return JSONResponse(status_code=status, content=content)

    @app.exception_handler(_ApiError)
    async def on_api_error(request: Request, exc: _ApiError):
        return error_response(
            exc.status, exc.code, exc.message, exc.field, exc.position
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        field = None
        if errors and errors[0].get("loc"):
            loc = [str(part) for part in errors[0]["loc"] if part != "body"]
            field = ".".join(loc) or None
        message = errors[0].get("msg", "invalid request") if errors else "invalid request"
        return error_response(400, "invalid_request", message, field)

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        logger.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "ms": round((time.perf_counter() - start) * 1000.0, 3),
                }
            )
        )
        return response

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok",
            "model_id": model_id,
            "lexicon": lexicon.stats(),
            "uptime_s": round(time.monotonic() - started, 3),
        }

    @app.get("/v1/config")
    async def config_view():
        return {
            "model_id": model_id,
            "beam_size": config.beam_size,
            "top_k": config.top_k,
            "modes": list(MODES),
            "variant": model.config.variant,
            "n_layers": model.config.n_layers,
            "max_positions": model.config.max_positions,
        }

    @app.post("/v1/predict")
    async def predict(body: PredictBody):
        beam_size = body.beam_size if body.beam_size is not None else config.beam_size
        top_k = body.top_k if body.top_k is not None else min(config.top_k, beam_size)
        if body.mode not in MODES:
            raise _ApiError(400, "invalid_request", f"mode must be one of {MODES}", "mode")
        if not body.pinyin:
            raise _ApiError(400, "invalid_request", "pinyin must be non-empty", "pinyin")
        if beam_size < 1:
            raise _ApiError(400, "invalid_request", "beam_size must be positive", "beam_size")
        if top_k < 1 or top_k > beam_size:
            raise _ApiError(
                400, "invalid_request",
                f"top_k must be in [1, beam_size]; got {top_k} with beam_size {beam_size}",
                "top_k",
            )
        start = time.perf_counter()
        try:
            result = decoder.predict(
                body.context, body.pinyin, body.mode, beam_size=beam_size, top_k=top_k
            )
        except TokenResolutionError as exc:
            raise _ApiError(
                422, "unknown_pinyin", str(exc), "pinyin", position=exc.position
            ) from exc
        except CapacityError as exc:
            raise _ApiError(422, "too_long", str(exc), "context") from exc
        except DecodeError as exc:
            raise _ApiError(400, "invalid_request", str(exc), None) from exc
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return {
            "candidates": [{"text": c.text, "score": c.score} for c in result.candidates],
            "model_id": model_id,
            "elapsed_ms": round(elapsed_ms, 3),
        }

    return app


def run(config: AppConfig) -> None:
    """Blocking uvicorn server; drains in-flight requests on shutdown."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level)
