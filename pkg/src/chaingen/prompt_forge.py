"""Prompt templates as external text assets, rendered by placeholder
substitution.

Four templates drive the pipeline: VSS signal selection, event-chain
generation/update, validation-rule script generation, and testbench code
generation. Placeholders are square-bracket names (``[scenario]``); only the
names a template declares are ever substituted, so bracketed text that is
part of the prompt wording (e.g. the ``[time_budget]`` inside the rule
grammar description) passes through untouched.

Substitution is a single pass: binding values containing placeholder-like
text are not re-expanded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from chaingen.errors import ChainGenError

SIGNAL_SELECTION = "SignalSelection"
EVENT_CHAIN_GEN = "EventChainGen"
RULE_SCRIPT_GEN = "RuleScriptGen"
CODE_GEN = "CodeGen"

# Template id -> (asset file name, declared placeholder names).
TEMPLATE_SPECS: dict[str, tuple[str, tuple[str, ...]]] = {
    SIGNAL_SELECTION: ("signal_selection.txt", ("scenario/diagram", "VSS candidate signals")),
    EVENT_CHAIN_GEN: ("event_chain_gen.txt", ("current-event-chain", "scenario")),
    RULE_SCRIPT_GEN: ("rule_script_gen.txt", ("constraint rule",)),
    CODE_GEN: ("code_gen.txt", ("system-topics", "Extracted VSS signals", "code-template")),
}

# Bound to the current-event-chain placeholder on the first iteration, before
# any chain exists.
EMPTY_CHAIN_BINDING = "(none)"


class MissingAsset(ChainGenError):
    """A template or code-template asset file is absent."""


class MissingBinding(ChainGenError):
    """render() was called without a value for a declared placeholder."""


class UnknownBinding(ChainGenError):
    """render() was given a binding for a placeholder the template does not declare."""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    placeholders: tuple[str, ...]


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    text: str
    bindings: dict[str, str]


def read_asset(name: str) -> str:
    """Read a packaged asset file (templates, code template, defaults)."""
    ref = resources.files("chaingen").joinpath("assets", name)
    try:
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise MissingAsset(f"packaged asset not found: {name}") from exc


def load_template(template_id: str, templates_dir: Path | None = None) -> PromptTemplate:
    """Load a template body byte-for-byte from its asset file.

    ``templates_dir`` overrides the packaged assets, letting deployments pin
    their own wording without a rebuild.
    """
    if template_id not in TEMPLATE_SPECS:
        raise MissingAsset(f"unknown template id: {template_id}")
    filename, placeholders = TEMPLATE_SPECS[template_id]
    if templates_dir is not None:
        path = Path(templates_dir) / filename
        if not path.is_file():
            raise MissingAsset(f"template asset not found: {path}")
        body = path.read_text(encoding="utf-8")
    else:
        body = read_asset(filename)
    for name in placeholders:
        if f"[{name}]" not in body:
            raise MissingAsset(f"template {template_id} lost its [{name}] placeholder")
    return PromptTemplate(id=template_id, body=body, placeholders=placeholders)


def render(template: PromptTemplate, bindings: dict[str, str]) -> RenderedPrompt:
    """Substitute every declared placeholder with its binding.

    Bindings must cover the declared placeholder set exactly. The replacement
    happens in one pass over the body, so nothing a binding introduces is
    expanded again.
    """
    declared = set(template.placeholders)
    for name in template.placeholders:
        if name not in bindings:
            raise MissingBinding(f"no binding for placeholder [{name}]")
    for name in bindings:
        if name not in declared:
            raise UnknownBinding(f"template {template.id} declares no placeholder [{name}]")
    pattern = re.compile("|".join(re.escape(f"[{name}]") for name in template.placeholders))
    text = pattern.sub(lambda m: bindings[m.group(0)[1:-1]], template.body)
    return RenderedPrompt(template_id=template.id, text=text, bindings=dict(bindings))
