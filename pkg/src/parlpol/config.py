"""Pipeline configuration: one TOML or JSON file, flags override fields.

Relative paths inside the file are resolved against the file's directory so
a generated corpus folder is runnable from anywhere.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class BackendSettings:
    kind: str = "mock"  # mock | http
    id: str = "mock"
    fixture: str | None = None
    prose_fraction: float = 0.0
    corrupt_fraction: float = 0.0
    wrap_fraction: float = 0.25
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "PARLPOL_API_KEY"
    timeout: float = 120.0


@dataclass
class ValidationSettings:
    k: int = 300
    seed: int = 7
    gold_path: str | None = None
    truth_path: str | None = None
    auto_confirm: bool = False


@dataclass
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8765


@dataclass
class PipelineConfig:
    corpus_manifest: str = ""
    corpus_path: str = ""
    registry_path: str = ""
    workdir: str = "run"
    vocatives_path: str | None = None
    prompt_template_path: str | None = None
    country: str = ""
    country_name: str | None = None
    year_start: int = 0
    year_end: int = 0
    granularity: str = "quarter"
    fuzzy_threshold: float = 0.85
    min_out_references: int = 30
    reprocess_cap: int = 3
    max_in_flight: int = 4
    max_attempts: int = 5
    truncate_chars: int = 60_000
    government_as_party: bool = False
    seed: int = 0
    backend: BackendSettings = field(default_factory=BackendSettings)
    verifier_backend: BackendSettings | None = None
    validation: ValidationSettings = field(default_factory=ValidationSettings)
    service: ServiceSettings = field(default_factory=ServiceSettings)

    def validate(self) -> None:
        problems: list[str] = []
        for name in ("corpus_manifest", "corpus_path", "registry_path"):
            value = getattr(self, name)
            if not value:
                problems.append(f"{name}: required")
            elif not Path(value).exists():
                problems.append(f"{name}: file not found: {value}")
        for name in ("vocatives_path", "prompt_template_path"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                problems.append(f"{name}: file not found: {value}")
        if not _COUNTRY_RE.match(self.country or ""):
            problems.append(f"country: must be ISO-3166 alpha-2, got {self.country!r}")
        if self.year_end < self.year_start:
            problems.append("year_end: before year_start")
        if self.granularity not in ("quarter", "year"):
            problems.append(f"granularity: must be quarter or year, got {self.granularity!r}")
        if not (0.0 < self.fuzzy_threshold <= 1.0):
            problems.append("fuzzy_threshold: must be in (0, 1]")
        if self.backend.kind not in ("mock", "http"):
            problems.append(f"backend.kind: must be mock or http, got {self.backend.kind!r}")
        if self.backend.kind == "mock":
            if not self.backend.fixture:
                problems.append("backend.fixture: required for the mock backend")
            elif not Path(self.backend.fixture).exists():
                problems.append(f"backend.fixture: file not found: {self.backend.fixture}")
        if self.backend.kind == "http" and not self.backend.endpoint:
            problems.append("backend.endpoint: required for the http backend")
        if self.validation.k <= 0:
            problems.append("validation.k: must be positive")
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        return asdict(self)


def _resolve(base: Path, value: str | None) -> str | None:
    if value is None or value == "":
        return value
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    return str(path)


def _backend_from_dict(data: dict | None, base: Path) -> BackendSettings | None:
    if data is None:
        return None
    settings = BackendSettings(**data)
    settings.fixture = _resolve(base, settings.fixture)
    return settings


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Read TOML or JSON config, apply overrides, resolve relative paths."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if path.suffix == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib  # type: ignore[no-redef]
        data = tomllib.loads(raw)
    else:
        data = json.loads(raw)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, leaf = key.split(".", 1)
            data.setdefault(section, {})[leaf] = value
        else:
            data[key] = value

    base = path.parent.resolve()
    backend = _backend_from_dict(data.pop("backend", None), base) or BackendSettings()
    verifier = _backend_from_dict(data.pop("verifier_backend", None), base)
    validation = ValidationSettings(**data.pop("validation", {}))
    service = ServiceSettings(**data.pop("service", {}))

    try:
        cfg = PipelineConfig(
            backend=backend, verifier_backend=verifier, validation=validation,
            service=service, **data,
        )
    except TypeError as exc:
        raise ConfigError([f"config: {exc}"]) from exc

    for name in ("corpus_manifest", "corpus_path", "registry_path", "vocatives_path",
                 "prompt_template_path", "workdir"):
        setattr(cfg, name, _resolve(base, getattr(cfg, name)))
    cfg.validation.gold_path = _resolve(base, cfg.validation.gold_path)
    cfg.validation.truth_path = _resolve(base, cfg.validation.truth_path)
    cfg.validate()
    return cfg


class RunPaths:
    """Derived artifact locations under the working directory."""

    def __init__(self, workdir: str | Path):
        self.workdir = Path(workdir)

    def __getattr__(self, name: str) -> Path:
        files = {
            "speeches": "speeches.jsonl",
            "rejects": "rejects.jsonl",
            "journal": "journal.jsonl",
            "responses": "responses.jsonl",
            "mentions": "mentions.jsonl",
            "reprocess_queue": "reprocess_queue.jsonl",
            "parked": "reprocess_parked.jsonl",
            "run_report": "run_report.json",
            "resolved": "resolved.jsonl",
            "review_queue": "review_queue.jsonl",
            "classify_cache": "classify_cache.jsonl",
            "eps_records": "eps_records.jsonl",
            "eps_csv": "eps_series.csv",
            "eps_json": "eps_series.json",
            "dyads_csv": "dyads.csv",
            "matchset": "matchset.json",
            "supergold": "supergold.jsonl",
            "gold_out": "gold.jsonl",
            "validation_json": "validation_report.json",
            "validation_txt": "validation_report.txt",
            "run_manifest": "run_manifest.json",
            "service_journal": "service_journal.jsonl",
            "lock": ".lock",
        }
        if name in files:
            return self.workdir / files[name]
        raise AttributeError(name)

    # The deterministic artifact set digested into the run manifest.
    DIGEST_ARTIFACTS = (
        "speeches", "rejects", "mentions", "reprocess_queue", "parked",
        "run_report", "resolved", "review_queue", "classify_cache",
        "eps_records", "eps_csv", "eps_json", "dyads_csv", "matchset",
        "supergold", "gold_out", "validation_json", "validation_txt",
    )
