"""Event-chain model: PlantUML activity-diagram subset in, JSON model out.

An event chain is a DAG of action and decision nodes from a stimulus to one
or more terminals, annotated per node with a time budget and IO metadata
(five note keys: time_budget, input, input_format, output, output_format).
The supported PlantUML subset is exactly what the chain generator is asked
to produce: start/stop, ``:activity;`` lines, note right/left blocks of
``key: value`` lines, and arbitrarily nested if/then/else/endif. Loops are
rejected — order semantics and latency sums need an acyclic graph.

Parsing and emission are inverse on this subset; the JSON form is the one
the rule validator and executor consume.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from chaingen.errors import ChainGenError

NOTE_KEYS = ("time_budget", "input", "input_format", "output", "output_format")
ACTION = "action"
DECISION = "decision"
DEFAULT_NAME = "event_chain"


class DiagramSyntaxError(ChainGenError):
    """A line of the diagram does not belong to the supported subset."""

    def __init__(self, lineno: int, message: str) -> None:
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class UnknownNoteKey(ChainGenError):
    """A note line binds a key outside the five supported parameters."""


class NoteWithoutActivity(ChainGenError):
    """A note block appeared before any node it could attach to."""


class LoopUnsupported(ChainGenError):
    """repeat/while constructs are not representable (chains must be DAGs)."""


class UnbalancedIf(ChainGenError):
    """if/else/endif nesting does not match up."""


class SchemaError(ChainGenError):
    """The JSON model violates the schema or a structural invariant."""


class CycleDetected(ChainGenError):
    """The chain graph contains a cycle."""


class UnreachableNode(ChainGenError):
    """A node cannot be reached from the start node."""


class DanglingEdge(ChainGenError):
    """An edge references a node id that does not exist."""


class Unreachable(ChainGenError):
    """path_latency was asked about a node pair with no connecting path."""


@dataclass(frozen=True)
class NoteParams:
    time_budget_ms: int | None = None
    input: str | None = None
    input_format: str | None = None
    output: str | None = None
    output_format: str | None = None

    def __post_init__(self) -> None:
        if self.time_budget_ms is not None and self.time_budget_ms < 0:
            raise ValueError("time_budget_ms must be >= 0")

    def is_empty(self) -> bool:
        return all(
            getattr(self, f) is None
            for f in ("time_budget_ms", "input", "input_format", "output", "output_format")
        )


@dataclass(frozen=True)
class EventNode:
    id: str
    label: str
    kind: str = ACTION
    condition: str | None = None
    params: NoteParams = field(default_factory=NoteParams)

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValueError("node label must be non-empty")
        if self.kind not in (ACTION, DECISION):
            raise ValueError(f"unknown node kind: {self.kind!r}")
        if self.kind == DECISION and not (self.condition or "").strip():
            raise ValueError("decision nodes need a condition")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    guard: str | None = None


@dataclass(frozen=True)
class EventChain:
    name: str
    nodes: tuple[EventNode, ...]
    edges: tuple[Edge, ...]
    start: str
    terminals: tuple[str, ...]

    def node(self, node_id: str) -> EventNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_map(self) -> dict[str, EventNode]:
        return {n.id: n for n in self.nodes}

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]


def validate_chain(chain: EventChain) -> EventChain:
    """Check every structural invariant; return the chain unchanged.

    Raises CycleDetected / UnreachableNode / DanglingEdge for graph-level
    violations and SchemaError for everything else (duplicate ids, guard
    shape, terminal mismatches).
    """
    if not chain.nodes:
        raise SchemaError("chain has no nodes")
    ids = [n.id for n in chain.nodes]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate node ids")
    id_set = set(ids)
    if chain.start not in id_set:
        raise SchemaError(f"start node {chain.start!r} does not exist")

    for edge in chain.edges:
        if edge.src not in id_set or edge.dst not in id_set:
            raise DanglingEdge(f"edge {edge.src!r} -> {edge.dst!r} references a missing node")

    out: dict[str, list[Edge]] = {i: [] for i in ids}
    indegree: dict[str, int] = {i: 0 for i in ids}
    for edge in chain.edges:
        out[edge.src].append(edge)
        indegree[edge.dst] += 1

    node_map = chain.node_map()
    for node_id, edges in out.items():
        node = node_map[node_id]
        if node.kind == ACTION:
            if len(edges) > 1:
                raise SchemaError(f"action node {node_id} has {len(edges)} outgoing edges")
            if edges and edges[0].guard is not None:
                raise SchemaError(f"action node {node_id} has a guarded outgoing edge")
        else:
            if len(edges) != 2:
                raise SchemaError(f"decision node {node_id} must have exactly 2 outgoing edges")
            guards = [e.guard for e in edges]
            if None in guards or guards[0] == guards[1]:
                raise SchemaError(f"decision node {node_id} needs two distinct guards")

    sinks = {i for i, edges in out.items() if not edges}
    terminal_set = set(chain.terminals)
    if len(terminal_set) != len(chain.terminals):
        raise SchemaError("duplicate terminal ids")
    for t in chain.terminals:
        if t not in id_set:
            raise SchemaError(f"terminal {t!r} does not exist")
        if out[t]:
            raise SchemaError(f"terminal {t!r} has outgoing edges")
    missing = sinks - terminal_set
    if missing:
        raise SchemaError(f"nodes without outgoing edges must be terminals: {sorted(missing)}")

    # Kahn's algorithm: if the queue drains before every node is seen, the
    # leftover nodes form at least one cycle.
    queue = [i for i in ids if indegree[i] == 0]
    remaining = dict(indegree)
    seen = 0
    while queue:
        current = queue.pop()
        seen += 1
        for edge in out[current]:
            remaining[edge.dst] -= 1
            if remaining[edge.dst] == 0:
                queue.append(edge.dst)
    if seen != len(ids):
        cyclic = sorted(i for i in ids if remaining[i] > 0)
        raise CycleDetected(f"cycle through nodes {cyclic}")

    reached = descendants(chain, chain.start)
    reached.add(chain.start)
    unreachable = [i for i in ids if i not in reached]
    if unreachable:
        raise UnreachableNode(f"nodes unreachable from start: {unreachable}")
    return chain


def descendants(chain: EventChain, node_id: str) -> set[str]:
    """All nodes reachable from node_id via one or more edges."""
    out: dict[str, list[str]] = {}
    for edge in chain.edges:
        out.setdefault(edge.src, []).append(edge.dst)
    seen: set[str] = set()
    stack = list(out.get(node_id, []))
    while stack:
        current = stack.pop()
        if current in seen:
            continue
        seen.add(current)
        stack.extend(out.get(current, []))
    return seen


# --- PlantUML parsing ------------------------------------------------------

_ACTIVITY_RE = re.compile(r":(.+);\s*\Z")
_IF_RE = re.compile(r"if\s*\((?P<cond>.*?)\)\s*then(?:\s*\((?P<guard>.*?)\))?\s*\Z")
_ELSE_RE = re.compile(r"else(?:\s*\((?P<guard>.*?)\))?\s*\Z")
_NOTE_RE = re.compile(r"note\s+(right|left)\s*\Z")
_END_NOTE_RE = re.compile(r"end\s*note\s*\Z")
_NOTE_LINE_RE = re.compile(r"(?P<key>[A-Za-z_]+)\s*:\s*(?P<value>.*)\s*\Z")
_TIME_BUDGET_RE = re.compile(r"(?P<ms>\d+)\s*(?:ms)?\s*\Z")


class _Builder:
    """Mutable accumulation of nodes/edges while parsing."""

    def __init__(self) -> None:
        self.nodes: list[dict] = []
        self.edges: list[Edge] = []
        self.terminals: list[str] = []
        self.by_id: dict[str, dict] = {}
        self.last_created: str | None = None

    def new_node(self, label: str, kind: str, condition: str | None = None) -> str:
        node_id = f"n{len(self.nodes) + 1}"
        record = {"id": node_id, "label": label, "kind": kind, "condition": condition, "params": {}}
        self.nodes.append(record)
        self.by_id[node_id] = record
        self.last_created = node_id
        return node_id

    def connect(self, tails: list[tuple[str, str | None]], node_id: str) -> None:
        for src, guard in tails:
            self.edges.append(Edge(src=src, dst=node_id, guard=guard))

    def mark_terminal(self, node_id: str) -> None:
        if node_id not in self.terminals:
            self.terminals.append(node_id)

    def freeze(self, name: str, start: str) -> EventChain:
        nodes = tuple(
            EventNode(
                id=rec["id"],
                label=rec["label"],
                kind=rec["kind"],
                condition=rec["condition"],
                params=NoteParams(**rec["params"]),
            )
            for rec in self.nodes
        )
        return EventChain(
            name=name,
            nodes=nodes,
            edges=tuple(self.edges),
            start=start,
            terminals=tuple(self.terminals),
        )


class _Cursor:
    def __init__(self, lines: list[tuple[int, str]]) -> None:
        self.lines = lines
        self.pos = 0

    def peek(self) -> tuple[int, str] | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def advance(self) -> tuple[int, str]:
        item = self.lines[self.pos]
        self.pos += 1
        return item


def _meaningful_lines(text: str) -> list[tuple[int, str]]:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("'"):
            continue
        lines.append((lineno, stripped))
    return lines


def _parse_note_block(cursor: _Cursor, builder: _Builder, start_lineno: int) -> None:
    if builder.last_created is None:
        raise NoteWithoutActivity(f"line {start_lineno}: note before any activity")
    params = builder.by_id[builder.last_created]["params"]
    while True:
        item = cursor.peek()
        if item is None:
            raise DiagramSyntaxError(start_lineno, "note block never closed with 'end note'")
        lineno, line = cursor.advance()
        if _END_NOTE_RE.fullmatch(line):
            return
        m = _NOTE_LINE_RE.fullmatch(line)
        if not m:
            raise DiagramSyntaxError(lineno, f"expected 'key: value' inside note, got {line!r}")
        key, value = m.group("key"), m.group("value").strip()
        if key not in NOTE_KEYS:
            raise UnknownNoteKey(f"line {lineno}: unsupported note key {key!r}")
        if key == "time_budget":
            tm = _TIME_BUDGET_RE.fullmatch(value)
            if not tm:
                raise DiagramSyntaxError(lineno, f"time_budget must be a non-negative integer: {value!r}")
            params["time_budget_ms"] = int(tm.group("ms"))
        else:
            params[key] = value


def _parse_sequence(
    cursor: _Cursor,
    builder: _Builder,
    tails: list[tuple[str, str | None]],
    stop_words: tuple[str, ...],
    start_holder: list[str | None],
) -> list[tuple[str, str | None]]:
    """Parse statements until one of stop_words (left unconsumed) or @enduml."""
    while True:
        item = cursor.peek()
        if item is None:
            raise DiagramSyntaxError(0, "diagram is not closed with @enduml")
        lineno, line = item
        lowered = line.lower()
        if lowered == "@enduml" or any(lowered.startswith(w) for w in stop_words):
            return tails
        cursor.advance()

        if lowered.startswith(("repeat", "while")):
            raise LoopUnsupported(f"line {lineno}: loop constructs are not supported")
        if lowered == "start":
            raise DiagramSyntaxError(lineno, "unexpected second 'start'")
        if lowered == "stop":
            for src, guard in tails:
                if guard is not None:
                    raise DiagramSyntaxError(
                        lineno, "a branch needs at least one activity before 'stop'"
                    )
                builder.mark_terminal(src)
            tails = []
            continue
        if lowered in ("endif", "else") or lowered.startswith("else ") or lowered.startswith("else("):
            raise UnbalancedIf(f"line {lineno}: {line!r} without a matching 'if'")

        m = _NOTE_RE.fullmatch(lowered)
        if m:
            _parse_note_block(cursor, builder, lineno)
            continue

        m = _IF_RE.fullmatch(line)
        if m:
            condition = m.group("cond").strip()
            if not condition:
                raise DiagramSyntaxError(lineno, "if condition must be non-empty")
            then_guard = (m.group("guard") or "yes").strip() or "yes"
            decision = builder.new_node(label=condition, kind=DECISION, condition=condition)
            _claim_start(builder, tails, decision, start_holder, lineno)
            builder.connect(tails, decision)
            then_tails = _parse_sequence(
                cursor, builder, [(decision, then_guard)], ("else", "endif"), start_holder
            )
            item = cursor.peek()
            if item is None:
                raise UnbalancedIf(f"line {lineno}: 'if' never closed")
            _, next_line = item
            if _ELSE_RE.fullmatch(next_line):
                else_lineno, else_line = cursor.advance()
                else_guard = (_ELSE_RE.fullmatch(else_line).group("guard") or "no").strip() or "no"
                else_tails = _parse_sequence(
                    cursor, builder, [(decision, else_guard)], ("endif",), start_holder
                )
            else:
                else_tails = [(decision, "no")]
            item = cursor.peek()
            if item is None or item[1].lower() != "endif":
                raise UnbalancedIf(f"line {lineno}: 'if' never closed with 'endif'")
            cursor.advance()
            tails = then_tails + else_tails
            continue

        m = _ACTIVITY_RE.fullmatch(line)
        if m:
            label = m.group(1).strip()
            if not label:
                raise DiagramSyntaxError(lineno, "activity label must be non-empty")
            node = builder.new_node(label=label, kind=ACTION)
            _claim_start(builder, tails, node, start_holder, lineno)
            builder.connect(tails, node)
            tails = [(node, None)]
            continue

        raise DiagramSyntaxError(lineno, f"unsupported statement: {line!r}")


def _claim_start(builder, tails, node_id, start_holder, lineno) -> None:
    if start_holder[0] is None:
        if tails:
            raise DiagramSyntaxError(lineno, "internal: tails before first node")
        start_holder[0] = node_id


def parse_plantuml(text: str) -> EventChain:
    """Parse the supported PlantUML activity subset into a validated chain."""
    lines = _meaningful_lines(text)
    if not lines:
        raise DiagramSyntaxError(1, "empty diagram")
    lineno, first = lines[0]
    if not first.lower().startswith("@startuml"):
        raise DiagramSyntaxError(lineno, "diagram must begin with @startuml")
    name = first[len("@startuml"):].strip() or DEFAULT_NAME
    last_lineno, last = lines[-1]
    if last.lower() != "@enduml":
        raise DiagramSyntaxError(last_lineno, "diagram must end with @enduml")

    cursor = _Cursor(lines[1:])
    item = cursor.peek()
    if item is not None and item[1].lower() == "start":
        cursor.advance()
    else:
        raise DiagramSyntaxError(item[0] if item else lineno, "expected 'start' after @startuml")

    builder = _Builder()
    start_holder: list[str | None] = [None]
    tails = _parse_sequence(cursor, builder, [], (), start_holder)
    item = cursor.peek()
    if item is None or item[1].lower() != "@enduml":
        raise DiagramSyntaxError(item[0] if item else 0, "content after parse position")

    if start_holder[0] is None:
        raise DiagramSyntaxError(last_lineno, "diagram has no activities")
    # Flows that never reached an explicit stop terminate with the diagram.
    for src, guard in tails:
        if guard is not None:
            raise UnbalancedIf("a decision branch ends without joining or stopping")
        builder.mark_terminal(src)

    return validate_chain(builder.freeze(name=name, start=start_holder[0]))


# --- JSON model ------------------------------------------------------------

def to_json_model(chain: EventChain) -> str:
    """Serialize to the JSON model consumed by the validator and executor.

    Key order is fixed; absent optional parameters are omitted; node order is
    the chain's stored (first-visit) order.
    """
    nodes = []
    for node in chain.nodes:
        obj: dict = {"id": node.id, "label": node.label, "kind": node.kind}
        if node.kind == DECISION:
            obj["condition"] = node.condition
        p = node.params
        if p.time_budget_ms is not None:
            obj["time_budget_ms"] = p.time_budget_ms
        for key in ("input", "input_format", "output", "output_format"):
            value = getattr(p, key)
            if value is not None:
                obj[key] = value
        nodes.append(obj)
    edges = []
    for edge in chain.edges:
        obj = {"from": edge.src, "to": edge.dst}
        if edge.guard is not None:
            obj["guard"] = edge.guard
        edges.append(obj)
    model = {
        "name": chain.name,
        "start": chain.start,
        "terminals": list(chain.terminals),
        "nodes": nodes,
        "edges": edges,
    }
    return json.dumps(model, indent=2) + "\n"


_NODE_KEYS = {"id", "label", "kind", "condition", "time_budget_ms",
              "input", "input_format", "output", "output_format"}
_EDGE_KEYS = {"from", "to", "guard"}


def from_json(text: str) -> EventChain:
    """Parse and fully validate the JSON event-chain model."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("model root must be an object")
    for key in ("name", "start", "terminals", "nodes", "edges"):
        if key not in data:
            raise SchemaError(f"model is missing the {key!r} key")
    if not isinstance(data["nodes"], list) or not isinstance(data["edges"], list):
        raise SchemaError("nodes and edges must be arrays")

    nodes = []
    for obj in data["nodes"]:
        if not isinstance(obj, dict):
            raise SchemaError("each node must be an object")
        unknown = set(obj) - _NODE_KEYS
        if unknown:
            raise SchemaError(f"node has unknown keys: {sorted(unknown)}")
        try:
            time_budget = obj.get("time_budget_ms")
            if time_budget is not None and (not isinstance(time_budget, int) or isinstance(time_budget, bool)):
                raise SchemaError(f"time_budget_ms must be an integer: {time_budget!r}")
            nodes.append(
                EventNode(
                    id=str(obj["id"]),
                    label=str(obj["label"]),
                    kind=obj.get("kind", ACTION),
                    condition=obj.get("condition"),
                    params=NoteParams(
                        time_budget_ms=time_budget,
                        input=obj.get("input"),
                        input_format=obj.get("input_format"),
                        output=obj.get("output"),
                        output_format=obj.get("output_format"),
                    ),
                )
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad node object: {exc}") from exc

    edges = []
    for obj in data["edges"]:
        if not isinstance(obj, dict):
            raise SchemaError("each edge must be an object")
        unknown = set(obj) - _EDGE_KEYS
        if unknown:
            raise SchemaError(f"edge has unknown keys: {sorted(unknown)}")
        try:
            edges.append(Edge(src=str(obj["from"]), dst=str(obj["to"]), guard=obj.get("guard")))
        except KeyError as exc:
            raise SchemaError(f"edge is missing {exc}") from exc

    chain = EventChain(
        name=str(data["name"]),
        nodes=tuple(nodes),
        edges=tuple(edges),
        start=str(data["start"]),
        terminals=tuple(str(t) for t in data["terminals"]),
    )
    return validate_chain(chain)


# --- PlantUML emission -----------------------------------------------------

def _emit_note(node: EventNode, lines: list[str], indent: str) -> None:
    p = node.params
    if p.is_empty():
        return
    lines.append(f"{indent}note right")
    if p.time_budget_ms is not None:
        lines.append(f"{indent}  time_budget: {p.time_budget_ms}")
    for key in ("input", "input_format", "output", "output_format"):
        value = getattr(p, key)
        if value is not None:
            lines.append(f"{indent}  {key}: {value}")
    lines.append(f"{indent}end note")


def _find_join(chain: EventChain, a: str, b: str, topo_index: dict[str, int]) -> str | None:
    reach_a = descendants(chain, a) | {a}
    reach_b = descendants(chain, b) | {b}
    common = reach_a & reach_b
    if not common:
        return None
    return min(common, key=lambda n: topo_index[n])


def _topo_index(chain: EventChain) -> dict[str, int]:
    out: dict[str, list[str]] = {n.id: [] for n in chain.nodes}
    indegree = {n.id: 0 for n in chain.nodes}
    for edge in chain.edges:
        out[edge.src].append(edge.dst)
        indegree[edge.dst] += 1
    order: list[str] = []
    queue = [n.id for n in chain.nodes if indegree[n.id] == 0]
    while queue:
        current = queue.pop(0)
        order.append(current)
        for nxt in out[current]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    return {node_id: pos for pos, node_id in enumerate(order)}


def to_plantuml(chain: EventChain) -> str:
    """Emit the canonical diagram text for a valid chain.

    Parsing the emission reproduces the chain structure; emission of a parsed
    canonical text is byte-stable.
    """
    validate_chain(chain)
    node_map = chain.node_map()
    terminals = set(chain.terminals)
    topo = _topo_index(chain)
    lines: list[str] = []
    header = "@startuml" if chain.name == DEFAULT_NAME else f"@startuml {chain.name}"
    lines.append(header)
    lines.append("start")

    def emit_flow(node_id: str | None, stop_at: str | None, indent: str) -> None:
        while node_id is not None and node_id != stop_at:
            node = node_map[node_id]
            if node.kind == ACTION:
                lines.append(f"{indent}:{node.label};")
                _emit_note(node, lines, indent)
                if node_id in terminals:
                    lines.append(f"{indent}stop")
                    return
                node_id = chain.out_edges(node_id)[0].dst
                continue
            # Decision: the first stored out-edge is the then-branch.
            then_edge, else_edge = chain.out_edges(node_id)
            join = _find_join(chain, then_edge.dst, else_edge.dst, topo)
            # Branches that never rejoin each other either stop or flow on to
            # the enclosing continuation; bound them there so the outer level
            # emits that continuation exactly once.
            boundary = join if join is not None else stop_at
            lines.append(f"{indent}if ({node.condition}) then ({then_edge.guard})")
            _emit_note(node, lines, indent + "  ")
            if then_edge.dst != boundary:
                emit_flow(then_edge.dst, boundary, indent + "  ")
            lines.append(f"{indent}else ({else_edge.guard})")
            if else_edge.dst != boundary:
                emit_flow(else_edge.dst, boundary, indent + "  ")
            lines.append(f"{indent}endif")
            node_id = join

    emit_flow(chain.start, None, "")
    lines.append("@enduml")
    return "\n".join(lines) + "\n"


# --- Structural comparison and analysis -------------------------------------

def _canonical_order(chain: EventChain) -> list[str]:
    """Node ids in deterministic first-visit order (DFS from start following
    stored edge order)."""
    out: dict[str, list[str]] = {n.id: [] for n in chain.nodes}
    for edge in chain.edges:
        out[edge.src].append(edge.dst)
    order: list[str] = []
    seen: set[str] = set()

    def visit(node_id: str) -> None:
        if node_id in seen:
            return
        seen.add(node_id)
        order.append(node_id)
        for nxt in out[node_id]:
            visit(nxt)

    visit(chain.start)
    return order


def structurally_equal(a: EventChain, b: EventChain) -> bool:
    """Compare chains up to node-id renaming.

    Nodes are aligned by first-visit order from the start node; labels,
    kinds, conditions, note parameters, edges (with guards), start, and
    terminals must all correspond.
    """
    if a.name != b.name or len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    order_a, order_b = _canonical_order(a), _canonical_order(b)
    if len(order_a) != len(a.nodes) or len(order_b) != len(b.nodes):
        return False
    index_a = {nid: i for i, nid in enumerate(order_a)}
    index_b = {nid: i for i, nid in enumerate(order_b)}
    map_a, map_b = a.node_map(), b.node_map()
    for nid_a, nid_b in zip(order_a, order_b):
        na, nb = map_a[nid_a], map_b[nid_b]
        if (na.label, na.kind, na.condition, na.params) != (nb.label, nb.kind, nb.condition, nb.params):
            return False
    edges_a = {(index_a[e.src], index_a[e.dst], e.guard) for e in a.edges}
    edges_b = {(index_b[e.src], index_b[e.dst], e.guard) for e in b.edges}
    if edges_a != edges_b:
        return False
    if index_a[a.start] != index_b[b.start]:
        return False
    return {index_a[t] for t in a.terminals} == {index_b[t] for t in b.terminals}


def path_latency(chain: EventChain, src: str, dst: str) -> dict[str, int]:
    """Min/max time-budget sum over all src->dst paths, endpoints included.

    Nodes without a budget contribute zero. Raises Unreachable when no path
    connects the pair.
    """
    node_map = chain.node_map()
    if src not in node_map or dst not in node_map:
        raise KeyError(f"unknown node id: {src if src not in node_map else dst}")

    def budget(node_id: str) -> int:
        return node_map[node_id].params.time_budget_ms or 0

    if src == dst:
        return {"min_ms": budget(src), "max_ms": budget(src)}
    if dst not in descendants(chain, src):
        raise Unreachable(f"{dst} is not reachable from {src}")

    # Only nodes lying on some src->dst path matter.
    can_reach_dst = {n for n in node_map if dst in descendants(chain, n)} | {dst}
    memo: dict[str, tuple[int, int]] = {}

    def walk(node_id: str) -> tuple[int, int]:
        if node_id == dst:
            return budget(node_id), budget(node_id)
        if node_id in memo:
            return memo[node_id]
        options = [
            walk(e.dst) for e in chain.out_edges(node_id) if e.dst in can_reach_dst
        ]
        lo = budget(node_id) + min(o[0] for o in options)
        hi = budget(node_id) + max(o[1] for o in options)
        memo[node_id] = (lo, hi)
        return lo, hi

    lo, hi = walk(src)
    return {"min_ms": lo, "max_ms": hi}


def relabel_budget(chain: EventChain, node_id: str, time_budget_ms: int | None) -> EventChain:
    """Return a copy of the chain with one node's time budget replaced."""
    nodes = tuple(
        replace(n, params=replace(n.params, time_budget_ms=time_budget_ms)) if n.id == node_id else n
        for n in chain.nodes
    )
    return replace(chain, nodes=nodes)
