"""Pipeline configuration: a YAML key/value tree resolved against the config
file's own directory, validated at load time so runs fail before the first
stage rather than in the middle of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from chaingen.errors import ConfigError
from chaingen.llm_gateway import ProviderConfig
from chaingen.retrieval import DEFAULT_DIM

DEFAULT_K = 32
DEFAULT_CHUNK_BUDGET = 6000


@dataclass(frozen=True)
class DeployTarget:
    host: str = "zone-ecu"
    user: str = "ecu"
    remote_path: str = "/opt/adas/app"


@dataclass(frozen=True)
class PipelineConfig:
    catalog_path: Path
    output_dir: Path
    topics: tuple[str, ...]
    model: str = "local-model"
    k: int = DEFAULT_K
    chunk_budget: int = DEFAULT_CHUNK_BUDGET
    kb_path: Path | None = None
    expansion_table_path: Path | None = None
    embedding_backend: str = "builtin"  # builtin | external
    embedding_url: str | None = None
    embedding_dim: int = DEFAULT_DIM
    templates_dir: Path | None = None
    code_template_path: Path | None = None
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    deploy: DeployTarget = field(default_factory=DeployTarget)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.chunk_budget < 1:
            raise ConfigError("chunk_budget must be >= 1")
        if self.embedding_backend not in ("builtin", "external"):
            raise ConfigError(f"unknown embedding_backend: {self.embedding_backend!r}")
        if self.embedding_backend == "external" and not self.embedding_url:
            raise ConfigError("embedding_backend=external needs embedding_url")
        try:
            # Fails here, at load time, rather than mid-run in codegen.
            from chaingen.codegen import TopicRegistry

            TopicRegistry(topics=self.topics)
        except ValueError as exc:
            raise ConfigError(f"bad topics: {exc}") from exc
        if not (self.deploy.host and self.deploy.user and self.deploy.remote_path):
            raise ConfigError("deploy host, user, and remote_path must be non-empty")

    def resolved_kb_path(self) -> Path:
        return self.kb_path if self.kb_path is not None else self.output_dir / "kb.txt"


def _resolve(base: Path, value) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path) -> PipelineConfig:
    """Load and validate a pipeline config file.

    Relative paths are resolved against the config file's directory. Input
    paths must exist now; output locations only need writable parents.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    base = path.parent

    try:
        catalog_path = _resolve(base, data["catalog_path"])
        output_dir = _resolve(base, data.get("output_dir", "out"))
        topics = tuple(str(t) for t in data.get("topics", []))
    except KeyError as exc:
        raise ConfigError(f"config is missing required key {exc}") from exc

    provider_data = data.get("provider", {})
    if not isinstance(provider_data, dict):
        raise ConfigError("provider must be a mapping")
    fixtures_dir = provider_data.get("fixtures_dir")
    try:
        provider = ProviderConfig(
            base_url=str(provider_data.get("base_url", ProviderConfig.base_url)),
            api_key_env=str(provider_data.get("api_key_env", ProviderConfig.api_key_env)),
            timeout_s=int(provider_data.get("timeout_s", ProviderConfig.timeout_s)),
            max_retries=int(provider_data.get("max_retries", ProviderConfig.max_retries)),
            mode=str(provider_data.get("mode", ProviderConfig.mode)),
            fixtures_dir=_resolve(base, fixtures_dir) if fixtures_dir else None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    deploy_data = data.get("deploy", {})
    deploy = DeployTarget(
        host=str(deploy_data.get("host", DeployTarget.host)),
        user=str(deploy_data.get("user", DeployTarget.user)),
        remote_path=str(deploy_data.get("remote_path", DeployTarget.remote_path)),
    )

    expansion = data.get("expansion_table_path")
    templates_dir = data.get("templates_dir")
    code_template = data.get("code_template_path")
    kb_path = data.get("kb_path")

    config = PipelineConfig(
        catalog_path=catalog_path,
        output_dir=output_dir,
        topics=topics,
        model=str(data.get("model", PipelineConfig.model)),
        k=int(data.get("k", DEFAULT_K)),
        chunk_budget=int(data.get("chunk_budget", DEFAULT_CHUNK_BUDGET)),
        kb_path=_resolve(base, kb_path) if kb_path else None,
        expansion_table_path=_resolve(base, expansion) if expansion else None,
        embedding_backend=str(data.get("embedding_backend", "builtin")),
        embedding_url=data.get("embedding_url"),
        embedding_dim=int(data.get("embedding_dim", DEFAULT_DIM)),
        templates_dir=_resolve(base, templates_dir) if templates_dir else None,
        code_template_path=_resolve(base, code_template) if code_template else None,
        provider=provider,
        deploy=deploy,
    )

    if not config.catalog_path.is_file():
        raise ConfigError(f"catalog_path does not exist: {config.catalog_path}")
    for label, candidate in (
        ("expansion_table_path", config.expansion_table_path),
        ("code_template_path", config.code_template_path),
    ):
        if candidate is not None and not candidate.is_file():
            raise ConfigError(f"{label} does not exist: {candidate}")
    if config.templates_dir is not None and not config.templates_dir.is_dir():
        raise ConfigError(f"templates_dir does not exist: {config.templates_dir}")
    if config.provider.mode == "replay":
        if config.provider.fixtures_dir is None or not config.provider.fixtures_dir.is_dir():
            raise ConfigError("replay mode needs an existing provider.fixtures_dir")
    return config
