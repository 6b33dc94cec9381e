"""End-to-end pipeline orchestration.

Stages run in workflow order — parse catalog, retrieve, select signals,
validate signals, generate the event chain, transform it to JSON, check the
rules, generate code, lint it, emit the deploy script — and every stage
writes its artifact before the next one reads anything, so each stage is
independently restartable through the CLI subcommands.

Interactive mode pauses once the chain has been transformed, shows the
diagram, and accepts accept / refine <feedback> / abort. Refinement feeds the
latest chain back into the chain-generation prompt with the feedback appended
to the scenario, mirroring how the prompt is phrased as an update.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from chaingen import chain_rules, codegen, retrieval
from chaingen.config import PipelineConfig
from chaingen.errors import ChainGenError
from chaingen.event_chain import EventChain, parse_plantuml, to_json_model, to_plantuml
from chaingen.llm_gateway import LlmGateway
from chaingen.prompt_forge import (
    EMPTY_CHAIN_BINDING,
    EVENT_CHAIN_GEN,
    SIGNAL_SELECTION,
    load_template,
    read_asset,
    render,
)
from chaingen.vss_catalog import Catalog, flatten_catalog, parse_vss_json

EXIT_OK = 0
EXIT_RULE_FAILURE = 1
EXIT_ERROR = 2


def load_catalog(config: PipelineConfig) -> Catalog:
    return parse_vss_json(config.catalog_path.read_text(encoding="utf-8"))


def build_embedding_backend(config: PipelineConfig):
    if config.embedding_backend == "external":
        return retrieval.ExternalEmbeddingBackend(
            config.embedding_url, timeout_s=config.provider.timeout_s
        )
    return retrieval.BuiltinEmbeddingBackend(dim=config.embedding_dim)


def load_expansion_table(config: PipelineConfig) -> retrieval.ExpansionTable:
    if config.expansion_table_path is not None:
        text = config.expansion_table_path.read_text(encoding="utf-8")
    else:
        text = read_asset("expansion_table.yaml")
    return retrieval.ExpansionTable.from_yaml(text)


@dataclass
class SignalSelection:
    candidates: list[retrieval.RetrievalCandidate]
    chunks: list[retrieval.Chunk]
    responses: list[str]
    merged: list[str]
    valid: list[str]
    rejected: list[str]


def select_signals(
    config: PipelineConfig, scenario: str, catalog: Catalog, gateway: LlmGateway
) -> SignalSelection:
    """Retrieve, re-rank, chunk, query per chunk, merge, and validate."""
    backend = build_embedding_backend(config)
    candidates = retrieval.retrieve_top_k(scenario, catalog, config.k, backend)
    candidates = retrieval.rerank(candidates, scenario, load_expansion_table(config))
    chunks = retrieval.make_chunks(candidates, config.chunk_budget)
    template = load_template(SIGNAL_SELECTION, config.templates_dir)
    responses = []
    for chunk in chunks:
        rendered = render(
            template,
            {"scenario/diagram": scenario, "VSS candidate signals": "\n".join(chunk.lines)},
        )
        responses.append(gateway.ask(rendered.text))
    merged = retrieval.merge_signal_lists(responses)
    outcome = retrieval.validate_signals(merged, catalog)
    return SignalSelection(
        candidates=candidates,
        chunks=chunks,
        responses=responses,
        merged=merged,
        valid=outcome["valid"],
        rejected=outcome["rejected"],
    )


def generate_chain(
    config: PipelineConfig,
    scenario_binding: str,
    gateway: LlmGateway,
    current_chain_text: str = EMPTY_CHAIN_BINDING,
) -> EventChain:
    """Run the chain-generation prompt and parse the reply into a validated
    chain. First iterations bind the current chain to a literal "(none)"."""
    template = load_template(EVENT_CHAIN_GEN, config.templates_dir)
    rendered = render(
        template,
        {"current-event-chain": current_chain_text, "scenario": scenario_binding},
    )
    reply = gateway.ask(rendered.text)
    return parse_plantuml(codegen.strip_code_fences(reply))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _validation_report_json(report: chain_rules.ValidationReport) -> str:
    payload = {
        "overall": report.overall,
        "results": [
            {
                "rule": chain_rules.format_rule(r.rule),
                "status": r.status,
                "detail": r.detail,
            }
            for r in report.results
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


@dataclass
class PipelineState:
    """Memory carried across the interactive refine loop."""

    scenario: str
    scenario_binding: str
    current_chain: EventChain | None = None
    validated_signals: list[str] = field(default_factory=list)
    refine_iterations: int = 0


def run_pipeline(
    config: PipelineConfig,
    scenario: str,
    rules: list[str],
    mode: str = "batch",
    transport=None,
    input_fn=input,
    echo=print,
) -> int:
    """Execute the full pipeline; returns the process exit code.

    Any stage error prints the stage name to stderr and yields 2; a rule
    validation failure yields 1; interactive abort yields 2 without writing
    code artifacts.
    """
    if mode not in ("batch", "interactive"):
        raise ValueError(f"unknown pipeline mode: {mode!r}")
    out = config.output_dir
    gateway = LlmGateway(config.provider, config.model, transport=transport)
    state = PipelineState(scenario=scenario, scenario_binding=scenario)
    stage = "parse-catalog"
    try:
        catalog = load_catalog(config)
        _write(config.resolved_kb_path(), "\n".join(flatten_catalog(catalog)) + "\n")
        echo(f"[{stage}] {len(catalog)} catalog entries")

        stage = "select-signals"
        selection = select_signals(config, scenario, catalog, gateway)
        state.validated_signals = selection.valid
        _write(out / "signals.txt", "".join(f"{p}\n" for p in selection.valid))
        _write(
            out / "signals_report.json",
            json.dumps(
                {
                    "selected": selection.merged,
                    "valid": selection.valid,
                    "rejected": selection.rejected,
                },
                indent=2,
            )
            + "\n",
        )
        echo(f"[{stage}] {len(selection.valid)} valid, {len(selection.rejected)} rejected")

        stage = "generate-chain"
        chain = generate_chain(config, state.scenario_binding, gateway)
        state.current_chain = chain

        stage = "transform-chain"
        puml_text = to_plantuml(chain)
        _write(out / "chain.puml", puml_text)
        _write(out / "event_chain.json", to_json_model(chain))
        echo(f"[{stage}] {len(chain.nodes)} nodes, {len(chain.edges)} edges")

        if mode == "interactive":
            verdict = _interactive_loop(config, state, gateway, out, input_fn, echo)
            if verdict == "abort":
                echo("[interactive] aborted before code generation", file=sys.stderr)
                return EXIT_ERROR
            chain = state.current_chain

        stage = "validate-rules"
        parsed_rules = [chain_rules.parse_rule(r) for r in rules]
        report = chain_rules.validate_all(chain, parsed_rules)
        _write(out / "validation_report.json", _validation_report_json(report))
        for result in report.results:
            echo(f"[{stage}] {result.status.upper()}: {chain_rules.format_rule(result.rule)}")
        if report.overall == "error":
            echo(f"[{stage}] rule evaluation errors", file=sys.stderr)
            return EXIT_ERROR
        if report.overall == "fail":
            echo(f"[{stage}] rule validation failed", file=sys.stderr)
            return EXIT_RULE_FAILURE

        stage = "generate-code"
        entries = [catalog.lookup(p) for p in state.validated_signals]
        context = codegen.assemble_context(
            chain,
            [e for e in entries if e is not None],
            codegen.TopicRegistry(topics=config.topics),
            code_template_path=config.code_template_path,
            templates_dir=config.templates_dir,
        )
        source = codegen.generate_code(context, gateway, config.templates_dir)
        _write(out / "main.cpp", source if source.endswith("\n") else source + "\n")

        stage = "lint"
        lint_report = codegen.lint_generated(source, context)
        _write(out / "lint_report.json", codegen.lint_report_json(lint_report))
        if not lint_report.clean:
            for violation in lint_report.violations:
                echo(
                    f"[{stage}] {violation.kind}: {violation.token} (line {violation.line})",
                    file=sys.stderr,
                )
        echo(f"[{stage}] clean={lint_report.clean}")

        stage = "deploy-script"
        # The script sits next to the artifacts, so it names them relatively;
        # absolute paths would also break run-to-run byte determinism.
        deploy = codegen.emit_deploy_script(
            config.deploy.host,
            config.deploy.user,
            config.deploy.remote_path,
            ["main.cpp"],
        )
        _write(out / "deploy.sh", deploy)

        _write(
            out / "run_report.json",
            json.dumps(
                {
                    "scenario": scenario,
                    "mode": mode,
                    "refine_iterations": state.refine_iterations,
                    "validated_signals": state.validated_signals,
                    "rules_overall": report.overall,
                    "lint_clean": lint_report.clean,
                },
                indent=2,
            )
            + "\n",
        )
        echo("[done] all artifacts written to " + str(out))
        return EXIT_OK
    except ChainGenError as exc:
        echo(f"[{stage}] failed: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _interactive_loop(config, state: PipelineState, gateway, out: Path, input_fn, echo) -> str:
    """Show the chain, then accept / refine / abort until settled."""
    while True:
        echo(to_plantuml(state.current_chain))
        try:
            command = input_fn("[accept / refine <feedback> / abort] > ").strip()
        except EOFError:
            return "abort"
        if command == "accept":
            return "accept"
        if command == "abort":
            return "abort"
        if command.startswith("refine"):
            feedback = command[len("refine"):].strip()
            if not feedback:
                echo("refine needs feedback text", file=sys.stderr)
                continue
            state.refine_iterations += 1
            state.scenario_binding = f"{state.scenario_binding}\nAdditional feedback: {feedback}"
            current_text = to_plantuml(state.current_chain)
            state.current_chain = generate_chain(
                config, state.scenario_binding, gateway, current_chain_text=current_text
            )
            _write(out / "chain.puml", to_plantuml(state.current_chain))
            _write(out / "event_chain.json", to_json_model(state.current_chain))
            continue
        echo(f"unrecognized command: {command!r}", file=sys.stderr)
