"""Command-line interface.

Every workflow stage is its own subcommand so a run can be restarted from any
point; ``run`` chains them all. Exit codes follow one contract everywhere:
0 success / all rules pass, 1 a rule or whitelist check failed, 2 an error
(bad input, unresolvable term, stage failure, abort) — so generated validator
scripts compose with ordinary shell conjunction.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from chaingen import chain_rules, codegen, retrieval
from chaingen.chain_executor import check_reaction_budget, parse_trace, simulate
from chaingen.config import load_config
from chaingen.errors import ChainGenError
from chaingen.event_chain import from_json, parse_plantuml, to_json_model, to_plantuml
from chaingen.llm_gateway import LlmGateway
from chaingen.pipeline import (
    EXIT_ERROR,
    EXIT_OK,
    EXIT_RULE_FAILURE,
    build_embedding_backend,
    generate_chain,
    load_catalog,
    load_expansion_table,
    run_pipeline,
    select_signals,
)
from chaingen.vss_catalog import flatten_catalog, parse_vss_json


def _fail(message: str, code: int = EXIT_ERROR) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _write_or_print(text: str, out: Path | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="\n")


@click.group()
def main() -> None:
    """Scenario-to-code toolchain for event-chain constrained vehicle logic."""


# --- vss -------------------------------------------------------------------

@main.group()
def vss() -> None:
    """VSS catalog operations."""


@vss.command("parse")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None, help="KB file (stdout if omitted).")
def vss_parse(catalog_path: Path, out: Path | None) -> None:
    """Flatten a VSS JSON tree into the knowledge-base line format."""
    try:
        catalog = parse_vss_json(catalog_path.read_text(encoding="utf-8"))
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print("\n".join(flatten_catalog(catalog)) + "\n", out)


# --- retrieve ----------------------------------------------------------------

@main.command("retrieve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--scenario", required=True)
@click.option("-k", "k_override", type=int, default=None)
def retrieve_cmd(config_path: Path, scenario: str, k_override: int | None) -> None:
    """Print the top-k re-ranked catalog entries for a scenario."""
    try:
        config = load_config(config_path)
        catalog = load_catalog(config)
        backend = build_embedding_backend(config)
        candidates = retrieval.retrieve_top_k(scenario, catalog, k_override or config.k, backend)
        candidates = retrieval.rerank(candidates, scenario, load_expansion_table(config))
    except ChainGenError as exc:
        _fail(str(exc))
    for cand in candidates:
        click.echo(f"{cand.rerank_score:.4f}  {cand.entry.path}")


# --- signals -----------------------------------------------------------------

@main.group()
def signals() -> None:
    """Signal selection and validation."""


@signals.command("select")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--scenario", required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
def signals_select(config_path: Path, scenario: str, out: Path | None) -> None:
    """Run retrieval plus per-chunk selection prompts; print validated paths."""
    try:
        config = load_config(config_path)
        catalog = load_catalog(config)
        gateway = LlmGateway(config.provider, config.model)
        selection = select_signals(config, scenario, catalog, gateway)
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print("".join(f"{p}\n" for p in selection.valid), out)
    for rejected in selection.rejected:
        click.echo(f"rejected: {rejected}", err=True)


@signals.command("validate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--path", "paths", multiple=True, help="Signal path (repeatable).")
@click.option("--from-file", "from_file", type=click.Path(exists=True, path_type=Path), default=None)
def signals_validate(config_path: Path, paths: tuple[str, ...], from_file: Path | None) -> None:
    """Check selected signal paths against the catalog; exit 1 on any reject."""
    selected = list(paths)
    if from_file is not None:
        selected.extend(
            line.strip() for line in from_file.read_text(encoding="utf-8").splitlines() if line.strip()
        )
    try:
        config = load_config(config_path)
        catalog = load_catalog(config)
    except ChainGenError as exc:
        _fail(str(exc))
    outcome = retrieval.validate_signals(selected, catalog)
    for path in outcome["valid"]:
        click.echo(f"valid: {path}")
    for path in outcome["rejected"]:
        click.echo(f"rejected: {path}", err=True)
    sys.exit(EXIT_OK if not outcome["rejected"] else EXIT_RULE_FAILURE)


# --- chain -------------------------------------------------------------------

@main.group()
def chain() -> None:
    """Event-chain generation and model transformation."""


@chain.command("generate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--scenario", required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
def chain_generate(config_path: Path, scenario: str, out: Path | None) -> None:
    """Generate an event chain from a scenario (canonical diagram text out)."""
    try:
        config = load_config(config_path)
        gateway = LlmGateway(config.provider, config.model)
        result = generate_chain(config, scenario, gateway)
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print(to_plantuml(result), out)


@chain.command("transform")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None)
def chain_transform(in_path: Path, out: Path | None) -> None:
    """Transform diagram text into the JSON event-chain model."""
    try:
        parsed = parse_plantuml(in_path.read_text(encoding="utf-8"))
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print(to_json_model(parsed), out)


# --- validate ----------------------------------------------------------------

@main.command("validate")
@click.option("--json", "json_path", required=True, type=click.Path(path_type=Path))
@click.option("--rule", "rule_strings", multiple=True, required=True)
def validate_cmd(json_path: Path, rule_strings: tuple[str, ...]) -> None:
    """Check order/time rules against an event-chain JSON model.

    Exit 0 if every rule passes, 1 if any fails, 2 on errors.
    """
    if not json_path.is_file():
        _fail(f"no such file: {json_path}")
    try:
        model = from_json(json_path.read_text(encoding="utf-8"))
        rules = [chain_rules.parse_rule(r) for r in rule_strings]
    except ChainGenError as exc:
        _fail(str(exc))
    report = chain_rules.validate_all(model, rules)
    for result in report.results:
        suffix = f" ({result.detail})" if result.detail else ""
        click.echo(f"{result.status.upper()}: {chain_rules.format_rule(result.rule)}{suffix}")
    if report.overall == "error":
        sys.exit(EXIT_ERROR)
    sys.exit(EXIT_OK if report.overall == "pass" else EXIT_RULE_FAILURE)


# --- rules -------------------------------------------------------------------

@main.group()
def rules() -> None:
    """Validation-rule script generation."""


@rules.command("gen")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--constraints", required=True, help="Freeform constraint text.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
def rules_gen(config_path: Path, constraints: str, out: Path | None) -> None:
    """Generate the shell script that replays each rule against the validator."""
    try:
        config = load_config(config_path)
        gateway = LlmGateway(config.provider, config.model)
        script = chain_rules.generate_rule_script(constraints, gateway, config.templates_dir)
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print(script if script.endswith("\n") else script + "\n", out)


# --- codegen -----------------------------------------------------------------

def _load_context(config, chain_path: Path, signals_path: Path):
    catalog = load_catalog(config)
    model = from_json(chain_path.read_text(encoding="utf-8"))
    paths = [
        line.strip()
        for line in signals_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    entries = [catalog.lookup(p) for p in paths]
    unknown = [p for p, e in zip(paths, entries) if e is None]
    if unknown:
        raise ChainGenError(f"signals file contains non-catalog paths: {unknown}")
    return codegen.assemble_context(
        model,
        [e for e in entries if e is not None],
        codegen.TopicRegistry(topics=config.topics),
        code_template_path=config.code_template_path,
        templates_dir=config.templates_dir,
    )


@main.group("codegen")
def codegen_group() -> None:
    """Decision-logic code generation and linting."""


@codegen_group.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--chain", "chain_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--signals", "signals_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None)
def codegen_run(config_path: Path, chain_path: Path, signals_path: Path, out: Path | None) -> None:
    """Generate the decision-logic source for a validated chain."""
    try:
        config = load_config(config_path)
        context = _load_context(config, chain_path, signals_path)
        gateway = LlmGateway(config.provider, config.model)
        source = codegen.generate_code(context, gateway, config.templates_dir)
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print(source if source.endswith("\n") else source + "\n", out)


@codegen_group.command("lint")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--chain", "chain_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--signals", "signals_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--source", "source_path", required=True, type=click.Path(exists=True, path_type=Path))
def codegen_lint(config_path: Path, chain_path: Path, signals_path: Path, source_path: Path) -> None:
    """Whitelist-lint generated source; exit 1 when violations are found."""
    try:
        config = load_config(config_path)
        context = _load_context(config, chain_path, signals_path)
    except ChainGenError as exc:
        _fail(str(exc))
    report = codegen.lint_generated(source_path.read_text(encoding="utf-8"), context)
    click.echo(codegen.lint_report_json(report), nl=False)
    sys.exit(EXIT_OK if report.clean else EXIT_RULE_FAILURE)


# --- sim ---------------------------------------------------------------------

@main.group()
def sim() -> None:
    """Simulated execution of event chains."""


@sim.command("run")
@click.option("--chain", "chain_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--catalog", "catalog_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--limit", "limit_ms", type=int, default=None, help="Reaction budget in ms.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
def sim_run(chain_path, trace_path, catalog_path, limit_ms, out) -> None:
    """Execute a chain against a message trace on the simulated clock."""
    try:
        model = from_json(chain_path.read_text(encoding="utf-8"))
        trace = parse_trace(trace_path.read_text(encoding="utf-8"))
        catalog = (
            parse_vss_json(catalog_path.read_text(encoding="utf-8")) if catalog_path else None
        )
        log = simulate(model, trace, catalog)
    except ChainGenError as exc:
        _fail(str(exc))
    _write_or_print(log.to_json(), out)
    if limit_ms is not None:
        try:
            check = check_reaction_budget(log, limit_ms)
        except ChainGenError as exc:
            _fail(str(exc))
        click.echo(f"reaction: {check.reaction_ms} ms (limit {limit_ms} ms)")
        sys.exit(EXIT_OK if check.passed else EXIT_RULE_FAILURE)


# --- deploy ------------------------------------------------------------------

@main.group()
def deploy() -> None:
    """Deployment script emission."""


@deploy.command("script")
@click.option("--host", required=True)
@click.option("--user", required=True)
@click.option("--remote-path", "remote_path", required=True)
@click.option("--artifact", "artifacts", multiple=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
def deploy_script(host, user, remote_path, artifacts, out) -> None:
    """Emit the copy-and-rebuild script for a target controller."""
    try:
        script = codegen.emit_deploy_script(host, user, remote_path, list(artifacts))
    except ValueError as exc:
        _fail(str(exc))
    _write_or_print(script, out)


# --- run ---------------------------------------------------------------------

@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--scenario", required=True)
@click.option("--rule", "rule_strings", multiple=True)
@click.option("--interactive", is_flag=True, default=False)
@click.option("--output-dir", "output_dir", type=click.Path(path_type=Path), default=None)
def run_cmd(config_path, scenario, rule_strings, interactive, output_dir) -> None:
    """Run the whole pipeline: catalog to deploy script."""
    try:
        config = load_config(config_path)
    except ChainGenError as exc:
        _fail(str(exc))
    if output_dir is not None:
        from dataclasses import replace

        config = replace(config, output_dir=output_dir)
    code = run_pipeline(
        config,
        scenario,
        list(rule_strings),
        mode="interactive" if interactive else "batch",
    )
    sys.exit(code)


if __name__ == "__main__":
    main()
