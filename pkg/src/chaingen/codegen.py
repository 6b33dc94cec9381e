"""Code-generation context assembly, invocation, and whitelist linting.

The generation prompt binds three things: the MQTT topics the module may
subscribe to, the catalog-validated VSS signals it may actuate, and an opaque
code template showing the target structure (the prompt itself carries the
worked signal-mapping pattern as an in-context example). The lint pass is a
lexical whitelist scan over the generated source — no C++ parsing — catching
exactly the two hallucination classes that matter here: signal paths outside
the validated set and topic literals outside the registry.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass
from pathlib import Path

from chaingen.errors import ChainGenError
from chaingen.event_chain import EventChain
from chaingen.llm_gateway import LlmGateway
from chaingen.prompt_forge import (
    CODE_GEN,
    MissingAsset,
    RenderedPrompt,
    load_template,
    read_asset,
    render,
)
from chaingen.vss_catalog import VssEntry, format_prompt_line

SIGNAL_PATH_PATTERN = re.compile(r"\bVehicle(?:\.[A-Za-z_][A-Za-z0-9_]*)+\b")
DEFAULT_TOPIC_PATTERN = r"[a-z0-9]+(?:-[a-z0-9]+)+"
_STRING_LITERAL_RE = re.compile(r'"((?:[^"\\]|\\.)*)"')


class EmptySignalSet(ChainGenError):
    """Code generation needs at least one validated signal to actuate."""


@dataclass(frozen=True)
class TopicRegistry:
    topics: tuple[str, ...]

    def __post_init__(self) -> None:
        seen = set()
        for topic in self.topics:
            if not topic or any(ch.isspace() for ch in topic):
                raise ValueError(f"topic names must be non-empty without whitespace: {topic!r}")
            if topic in seen:
                raise ValueError(f"duplicate topic name: {topic}")
            seen.add(topic)

    def __contains__(self, topic: str) -> bool:
        return topic in self.topics


@dataclass(frozen=True)
class GenerationContext:
    topics: TopicRegistry
    signals: tuple[VssEntry, ...]
    mapping_example: str
    code_template: str
    chain: EventChain


@dataclass(frozen=True)
class LintViolation:
    kind: str  # "unknown_signal" | "unknown_topic"
    token: str
    line: int


@dataclass(frozen=True)
class LintReport:
    signal_refs_found: tuple[str, ...]
    topic_refs_found: tuple[str, ...]
    violations: tuple[LintViolation, ...]

    @property
    def clean(self) -> bool:
        return not self.violations


def assemble_context(
    chain: EventChain,
    valid_signals,
    topics: TopicRegistry,
    code_template_path: Path | None = None,
    templates_dir: Path | None = None,
) -> GenerationContext:
    """Gather everything the generation prompt needs.

    ``valid_signals`` must already have passed catalog validation; an empty
    set is refused rather than silently producing actuation-free code.
    """
    signals = tuple(valid_signals)
    if not signals:
        raise EmptySignalSet("no validated signals to generate against")
    if code_template_path is not None:
        path = Path(code_template_path)
        if not path.is_file():
            raise MissingAsset(f"code template not found: {path}")
        code_template = path.read_text(encoding="utf-8")
    else:
        code_template = read_asset("code_template.cpp")
    # Loaded here so the in-context pattern travels with the context even
    # though the prompt template embeds the same text.
    mapping_example = read_asset("mapping_example.txt")
    # Touch the prompt template now so a missing asset fails at assembly
    # time, not mid-generation.
    load_template(CODE_GEN, templates_dir)
    return GenerationContext(
        topics=topics,
        signals=signals,
        mapping_example=mapping_example,
        code_template=code_template,
        chain=chain,
    )


def render_code_prompt(context: GenerationContext, templates_dir: Path | None = None) -> RenderedPrompt:
    template = load_template(CODE_GEN, templates_dir)
    return render(
        template,
        {
            "system-topics": "\n".join(context.topics.topics),
            "Extracted VSS signals": "\n".join(format_prompt_line(s) for s in context.signals),
            "code-template": context.code_template,
        },
    )


def strip_code_fences(text: str) -> str:
    """Remove one surrounding markdown code fence pair, if present.

    Chat models routinely fence code even when told not to; the inner text is
    returned byte-identical.
    """
    stripped = text.strip()
    lines = stripped.split("\n")
    if len(lines) >= 2 and lines[0].startswith("```") and lines[-1].strip() == "```":
        return "\n".join(lines[1:-1])
    return text


def generate_code(
    context: GenerationContext, gateway: LlmGateway, templates_dir: Path | None = None
) -> str:
    """Render the generation prompt, execute it, and normalize the reply."""
    rendered = render_code_prompt(context, templates_dir)
    return strip_code_fences(gateway.ask(rendered.text))


def lint_generated(
    source: str, context: GenerationContext, topic_pattern: str = DEFAULT_TOPIC_PATTERN
) -> LintReport:
    """Token-level whitelist scan of generated source.

    Every dot-separated ``Vehicle.*`` path token must be one of the validated
    signals, and every string literal shaped like a topic name (lowercase
    hyphenated words by default) must be in the topic registry. Accessor
    identifiers of validated signals are recorded alongside path hits.
    Violations are data, not errors.
    """
    valid_paths = {s.path for s in context.signals}
    accessor_names = {a.name for s in context.signals for a in s.accessors}
    accessor_res = {name: re.compile(rf"\b{re.escape(name)}\b") for name in accessor_names}
    topic_re = re.compile(rf"{topic_pattern}\Z")

    signal_refs: list[str] = []
    topic_refs: list[str] = []
    violations: list[LintViolation] = []

    for lineno, line in enumerate(source.splitlines(), start=1):
        for m in SIGNAL_PATH_PATTERN.finditer(line):
            token = m.group(0)
            if token in valid_paths:
                signal_refs.append(token)
            else:
                violations.append(LintViolation(kind="unknown_signal", token=token, line=lineno))
        for name, pattern in accessor_res.items():
            if pattern.search(line):
                signal_refs.append(name)
        for m in _STRING_LITERAL_RE.finditer(line):
            literal = m.group(1)
            if not topic_re.fullmatch(literal):
                continue
            if literal in context.topics:
                topic_refs.append(literal)
            else:
                violations.append(LintViolation(kind="unknown_topic", token=literal, line=lineno))

    return LintReport(
        signal_refs_found=tuple(signal_refs),
        topic_refs_found=tuple(topic_refs),
        violations=tuple(violations),
    )


def lint_report_json(report: LintReport) -> str:
    import json

    payload = {
        "clean": report.clean,
        "signal_refs_found": list(report.signal_refs_found),
        "topic_refs_found": list(report.topic_refs_found),
        "violations": [
            {"kind": v.kind, "token": v.token, "line": v.line} for v in report.violations
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def emit_deploy_script(host: str, user: str, remote_path: str, artifact_paths) -> str:
    """Emit the over-the-air deployment script: copy artifacts to the target
    controller and rebuild there. Text output only — nothing is executed or
    connected from here."""
    if not host or not user or not remote_path:
        raise ValueError("host, user, and remote_path must be non-empty")
    target = f"{user}@{host}"
    quoted_remote = shlex.quote(remote_path)
    lines = [
        "#!/bin/sh",
        "# Transfer generated artifacts to the target controller and rebuild.",
        "set -eu",
        "",
    ]
    for artifact in artifact_paths:
        lines.append(f"scp {shlex.quote(str(artifact))} {shlex.quote(target + ':' + remote_path + '/')}")
    lines.append(f"ssh {shlex.quote(target)} {shlex.quote(f'cd {quoted_remote} && make')}")
    return "\n".join(lines) + "\n"
