"""Run configuration loaded from a TOML file, overridable from the command line.

Grammar (every key optional; relative paths resolve against the file's
directory)::

    mode = "concat"                  # baseline | concat | llm
    index_path = "index.jsonl"
    embedder = "hashed-bow-v1"       # or "remote:<name>"
    dim = 256
    k = 5
    jobs = 1
    duplicate_table_text = false

    [chunking]    max_chars, overlap
    [detection]   row_tol, col_tol, min_support, min_table_rows, header_rows, line_tol
    [prompts]     enrich, answer     # template file paths
    [gateways.enrichment] / [gateways.generator]
                  backend, endpoint, token_env, timeout, max_retries,
                  backoff_base, max_in_flight, model_id, max_tokens,
                  mock_rule, transcript
    [embedders.<name>]  endpoint, dim, model, token_env, timeout
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .enrich import PromptTemplate
from .index import DEFAULT_DIM, HASHED_BOW, make_embedder
from .llm_gateway import GatewayConfig
from .rag import AnswerTemplate, IngestOptions, PipelineMode
from .table_detect import DetectParams


class ConfigError(ValueError):
    pass


TOP_KEYS = {"mode", "index_path", "embedder", "dim", "k", "jobs", "duplicate_table_text"}
SECTIONS = {"chunking", "detection", "prompts", "gateways", "embedders"}
GATEWAY_KEYS = {f.name for f in dataclasses.fields(GatewayConfig)}


def default_generator() -> GatewayConfig:
    return GatewayConfig(backend="mock", mock_rule="extract", model_id="llama-2-chat")


def default_enrichment() -> GatewayConfig:
    return GatewayConfig(backend="mock", mock_rule="sentences", max_tokens=1024)


@dataclass(frozen=True)
class RunConfig:
    mode: PipelineMode = PipelineMode.CONCAT
    index_path: Path = Path("index.jsonl")
    embedder: str = HASHED_BOW
    dim: int = DEFAULT_DIM
    k: int = 5
    jobs: int = 1
    max_chars: int = 1000
    overlap: int = 150
    line_tol: float = 3.0
    detection: DetectParams = field(default_factory=DetectParams)
    duplicate_table_text: bool = False
    enrich_prompt: Path | None = None
    answer_prompt: Path | None = None
    enrichment: GatewayConfig = field(default_factory=default_enrichment)
    generator: GatewayConfig = field(default_factory=default_generator)
    embedders: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.max_chars > self.overlap >= 0:
            raise ConfigError("chunking needs max_chars > overlap >= 0")
        if self.line_tol <= 0:
            raise ConfigError("line_tol must be positive")

    def ingest_options(self) -> IngestOptions:
        return IngestOptions(
            max_chars=self.max_chars,
            overlap=self.overlap,
            line_tol=self.line_tol,
            detect=self.detection,
            duplicate_table_text=self.duplicate_table_text,
            enrich_template=PromptTemplate.load(self.enrich_prompt),
            enrich_model=self.enrichment.model_id,
            enrich_max_tokens=self.enrichment.max_tokens,
            enrich_jobs=self.enrichment.max_in_flight,
        )

    def answer_template(self) -> AnswerTemplate:
        return AnswerTemplate.load(self.answer_prompt)

    def make_embedder(self):
        return make_embedder(self.embedder, self.dim, self.embedders)


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _gateway(raw: dict, base: Path, default: GatewayConfig, where: str) -> GatewayConfig:
    unknown = set(raw) - GATEWAY_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    values = dict(raw)
    if "transcript" in values:
        values["transcript"] = str(_resolve(base, values["transcript"]))
    try:
        return dataclasses.replace(default, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(data: dict, base: Path = Path(".")) -> RunConfig:
    unknown = set(data) - TOP_KEYS - SECTIONS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kw: dict = {}
    try:
        if "mode" in data:
            kw["mode"] = PipelineMode.parse(data["mode"])
        if "index_path" in data:
            kw["index_path"] = _resolve(base, data["index_path"])
        for key in ("embedder", "dim", "k", "jobs", "duplicate_table_text"):
            if key in data:
                kw[key] = data[key]
        chunking = data.get("chunking", {})
        if set(chunking) - {"max_chars", "overlap"}:
            raise ConfigError(f"[chunking]: unknown keys {sorted(set(chunking) - {'max_chars', 'overlap'})}")
        kw.update(chunking)
        detection = dict(data.get("detection", {}))
        if "line_tol" in detection:
            kw["line_tol"] = detection.pop("line_tol")
        kw["detection"] = DetectParams(**detection)
        prompts = data.get("prompts", {})
        if set(prompts) - {"enrich", "answer"}:
            raise ConfigError("[prompts]: only 'enrich' and 'answer' are allowed")
        kw["enrich_prompt"] = _resolve(base, prompts.get("enrich"))
        kw["answer_prompt"] = _resolve(base, prompts.get("answer"))
        gateways = data.get("gateways", {})
        if set(gateways) - {"enrichment", "generator"}:
            raise ConfigError("[gateways]: only 'enrichment' and 'generator' are allowed")
        kw["enrichment"] = _gateway(gateways.get("enrichment", {}), base, default_enrichment(), "[gateways.enrichment]")
        kw["generator"] = _gateway(gateways.get("generator", {}), base, default_generator(), "[gateways.generator]")
        kw["embedders"] = dict(data.get("embedders", {}))
        return RunConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path.parent)
