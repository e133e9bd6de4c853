"""Operator configuration: .env file, process environment, flag overrides.

Precedence, lowest to highest: built-in defaults, the .env file, the process
environment, explicit --set KEY=VALUE flags. Secrets are masked everywhere
configuration is echoed.
"""

from __future__ import annotations

import datetime as _dt
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Mapping, Optional

from schemaloom import SchemaloomError
from schemaloom.gateway import ModelConfig
from schemaloom.pipeline import utc_now


class ConfigError(SchemaloomError):
    pass


_SECRET_KEYS = {"LLM_API_KEY", "SERVE_TOKEN"}


def parse_env_file(path: Path) -> dict[str, str]:
    """KEY=VALUE lines; '#' comments and blank lines ignored; quotes stripped."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
        key, _, value = stripped.partition("=")
        value = value.split(" #", 1)[0].strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key.strip()] = value
    return values


@dataclass
class EnvConfig:
    llm_api_key: str = ""
    llm_base_url: str = "http://localhost:11434/v1"
    llm_model: str = "llama3.1"
    llm_temperature: float = 0.3
    llm_context_tokens: int = 128000
    llm_completion_reserve: int = 8000
    llm_max_repair_attempts: int = 3
    llm_timeout: float = 120.0
    llm_retry_base_delay: float = 1.0
    embed_base_url: str = ""
    embed_model: str = ""
    ols_base_url: str = "https://www.ebi.ac.uk/ols4/api"
    ontology_allowlist: str = ""
    grounding_top_k: int = 5
    data_dir: str = "data"
    runs_dir: str = "runs"
    templates_dir: str = ""
    pdf_converter: str = ""
    fixed_clock: str = ""
    serve_host: str = "127.0.0.1"
    serve_port: int = 8787
    serve_token: str = ""
    serve_static: str = ""

    @classmethod
    def resolve(
        cls,
        env_file: Optional[Path] = None,
        environ: Optional[Mapping[str, str]] = None,
        overrides: Optional[Mapping[str, str]] = None,
    ) -> "EnvConfig":
        merged: dict[str, str] = {}
        if env_file is not None and Path(env_file).is_file():
            merged.update(parse_env_file(env_file))
        known = {f.name.upper() for f in fields(cls)}
        if environ:
            merged.update({k: v for k, v in environ.items() if k in known})
        if overrides:
            merged.update(overrides)

        cfg = cls()
        for key, raw in merged.items():
            name = key.lower()
            if name not in {f.name for f in fields(cls)}:
                continue
            current = getattr(cfg, name)
            try:
                if isinstance(current, bool):
                    value: object = raw.lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    value = int(raw)
                elif isinstance(current, float):
                    value = float(raw)
                else:
                    value = raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
            setattr(cfg, name, value)
        return cfg

    def masked_dict(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            key = f.name.upper()
            value = getattr(self, f.name)
            if key in _SECRET_KEYS and value:
                value = "***"
            out[key] = value
        return out

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            base_url=self.llm_base_url,
            api_key=self.llm_api_key,
            model_name=self.llm_model,
            temperature=self.llm_temperature,
            context_limit=self.llm_context_tokens,
            completion_reserve=self.llm_completion_reserve,
            max_repair_attempts=self.llm_max_repair_attempts,
            request_timeout=self.llm_timeout,
            retry_base_delay=self.llm_retry_base_delay,
        )

    def clock(self) -> Callable[[], str]:
        if self.fixed_clock:
            # validate once; replay runs freeze provenance timestamps
            _dt.datetime.fromisoformat(self.fixed_clock.replace("Z", "+00:00"))
            frozen = self.fixed_clock
            return lambda: frozen
        return utc_now


ENV_EXAMPLE = """\
# schemaloom configuration. Process environment overrides this file;
# command-line --set KEY=VALUE overrides both.

# Chat-completion endpoint (any OpenAI-compatible server)
LLM_API_KEY=
LLM_BASE_URL=http://localhost:11434/v1
LLM_MODEL=llama3.1
LLM_TEMPERATURE=0.3
LLM_CONTEXT_TOKENS=128000
LLM_COMPLETION_RESERVE=8000
LLM_MAX_REPAIR_ATTEMPTS=3

# Embedding endpoint used for grounding and schema comparison
EMBED_BASE_URL=
EMBED_MODEL=

# Ontology lookup service
OLS_BASE_URL=https://www.ebi.ac.uk/ols4/api
ONTOLOGY_ALLOWLIST=data/ontology-allowlist.txt
GROUNDING_TOP_K=5

# Knowledge base and run storage
DATA_DIR=data
RUNS_DIR=runs
TEMPLATES_DIR=
PDF_CONVERTER=pdftotext {input} {output}

# Review service
SERVE_HOST=127.0.0.1
SERVE_PORT=8787
SERVE_TOKEN=
SERVE_STATIC=frontend/dist
"""
