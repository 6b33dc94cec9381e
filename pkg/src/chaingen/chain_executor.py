"""Simulated-clock execution of an event chain against a scripted message
trace — the desk-scale stand-in for running generated code on the testbench.

Execution starts at the first trace entry whose topic token-matches the start
node's declared input (falling back to the start label when no input note is
present). A single token then walks the chain: each node consumes its full
time budget, and decisions read named boolean flags accumulated from all
trace entries up to the current simulated time. Reaching a terminal that
produces an actuator effect is recorded as an actuation, which is what the
end-to-end reaction budget is measured against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from chaingen.errors import ChainGenError
from chaingen.event_chain import ACTION, EventChain, validate_chain
from chaingen.chain_rules import stem_tokens
from chaingen.vss_catalog import Catalog

_YES_GUARDS = frozenset({"yes", "y", "true", "1"})
_NO_GUARDS = frozenset({"no", "n", "false", "0"})


class NoTrigger(ChainGenError):
    """No trace entry matches the start node's input."""


class UnresolvableCondition(ChainGenError):
    """A decision condition matches no flag name in the trace."""


class NoActuation(ChainGenError):
    """A reaction budget was checked on a log without actuations."""


class BadTrace(ChainGenError):
    """The trace file violates the trace schema."""


@dataclass(frozen=True)
class TraceEntry:
    t_ms: int
    topic: str
    payload: str = ""
    flags: tuple[tuple[str, bool], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.t_ms < 0:
            raise ValueError("t_ms must be >= 0")

    def flag_map(self) -> dict[str, bool]:
        return dict(self.flags)


@dataclass(frozen=True)
class MessageTrace:
    entries: tuple[TraceEntry, ...]

    def __post_init__(self) -> None:
        times = [e.t_ms for e in self.entries]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("trace timestamps must be non-decreasing")


def parse_trace(text: str) -> MessageTrace:
    """Parse a trace file: a JSON array of {t_ms, topic, payload?, flags?}."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadTrace(f"invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise BadTrace("trace root must be an array")
    entries = []
    for pos, obj in enumerate(data):
        if not isinstance(obj, dict) or "t_ms" not in obj or "topic" not in obj:
            raise BadTrace(f"entry {pos} must be an object with t_ms and topic")
        flags = obj.get("flags", {})
        if not isinstance(flags, dict) or not all(isinstance(v, bool) for v in flags.values()):
            raise BadTrace(f"entry {pos} flags must map names to booleans")
        try:
            entries.append(
                TraceEntry(
                    t_ms=int(obj["t_ms"]),
                    topic=str(obj["topic"]),
                    payload=str(obj.get("payload", "")),
                    flags=tuple(sorted(flags.items())),
                )
            )
        except ValueError as exc:
            raise BadTrace(f"entry {pos}: {exc}") from exc
    try:
        return MessageTrace(entries=tuple(entries))
    except ValueError as exc:
        raise BadTrace(str(exc)) from exc


@dataclass(frozen=True)
class ExecutionStep:
    node_id: str
    label: str
    t_start_ms: int
    t_end_ms: int


@dataclass(frozen=True)
class Actuation:
    node_id: str
    t_end_ms: int


@dataclass(frozen=True)
class ExecutionLog:
    steps: tuple[ExecutionStep, ...]
    actuations: tuple[Actuation, ...]
    trigger_t_ms: int

    def to_json(self) -> str:
        payload = {
            "trigger_t_ms": self.trigger_t_ms,
            "steps": [
                {
                    "node_id": s.node_id,
                    "label": s.label,
                    "t_start_ms": s.t_start_ms,
                    "t_end_ms": s.t_end_ms,
                }
                for s in self.steps
            ],
            "actuations": [
                {"node_id": a.node_id, "t_end_ms": a.t_end_ms} for a in self.actuations
            ],
        }
        return json.dumps(payload, indent=2) + "\n"


def _tokens_overlap(a: str, b: str) -> bool:
    return bool(stem_tokens(a) & stem_tokens(b))


def _is_actuator_like(node, catalog: Catalog | None) -> bool:
    if catalog is not None:
        # Validated resolution: the output note names an actuator path
        # exactly, or the label shares tokens with an actuator entry's path.
        output = node.params.output
        if output:
            entry = catalog.lookup(output.strip())
            if entry is not None and entry.kind == "actuator":
                return True
        label_tokens = stem_tokens(node.label)
        for entry in catalog:
            if entry.kind != "actuator":
                continue
            path_tokens = stem_tokens(entry.path.replace(".", " "))
            if label_tokens & path_tokens:
                return True
        return False
    # Without a catalog, a terminal counts as an actuation only if it
    # declares an output effect at all.
    return node.params.output is not None


def simulate(chain: EventChain, trace: MessageTrace, catalog: Catalog | None = None) -> ExecutionLog:
    """Walk the chain on a simulated clock driven by the trace.

    Deterministic for fixed inputs; every node executes at most once.
    """
    validate_chain(chain)
    node_map = chain.node_map()
    start = node_map[chain.start]
    start_input = start.params.input or start.label

    trigger = next(
        (entry for entry in trace.entries if _tokens_overlap(entry.topic, start_input)),
        None,
    )
    if trigger is None:
        raise NoTrigger(f"no trace entry matches the start input {start_input!r}")

    steps: list[ExecutionStep] = []
    actuations: list[Actuation] = []
    now = trigger.t_ms
    current = start
    terminals = set(chain.terminals)

    while True:
        budget = current.params.time_budget_ms or 0
        step = ExecutionStep(
            node_id=current.id, label=current.label, t_start_ms=now, t_end_ms=now + budget
        )
        steps.append(step)
        now = step.t_end_ms

        if current.id in terminals:
            if _is_actuator_like(current, catalog):
                actuations.append(Actuation(node_id=current.id, t_end_ms=now))
            break

        if current.kind == ACTION:
            current = node_map[chain.out_edges(current.id)[0].dst]
            continue

        # Decision: evaluate the condition against every flag seen so far.
        visible: dict[str, bool] = {}
        for entry in trace.entries:
            if entry.t_ms > now:
                break
            visible.update(entry.flag_map())
        condition_tokens = stem_tokens(current.condition or "")
        matched = [
            value for name, value in visible.items()
            if stem_tokens(name) & condition_tokens
        ]
        if not matched:
            raise UnresolvableCondition(
                f"condition {current.condition!r} matches no trace flag (have: {sorted(visible)})"
            )
        outcome = any(matched)
        # The true branch is the edge with a yes-like guard; when neither
        # guard is recognizable, the first stored edge plays that role.
        then_edge, else_edge = chain.out_edges(current.id)
        first_guard = (then_edge.guard or "").lower()
        second_guard = (else_edge.guard or "").lower()
        if second_guard in _YES_GUARDS or first_guard in _NO_GUARDS:
            then_edge, else_edge = else_edge, then_edge
        current = node_map[(then_edge if outcome else else_edge).dst]

    return ExecutionLog(steps=tuple(steps), actuations=tuple(actuations), trigger_t_ms=trigger.t_ms)


@dataclass(frozen=True)
class BudgetCheck:
    passed: bool
    reaction_ms: int


def check_reaction_budget(log: ExecutionLog, limit_ms: int) -> BudgetCheck:
    """Measure stimulus-to-first-actuation latency against a limit."""
    if not log.actuations:
        raise NoActuation("execution log records no actuation")
    reaction_ms = log.actuations[0].t_end_ms - log.trigger_t_ms
    return BudgetCheck(passed=reaction_ms <= limit_ms, reaction_ms=reaction_ms)
