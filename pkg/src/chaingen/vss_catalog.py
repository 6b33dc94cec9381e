"""Vehicle Signal Specification (VSS) catalog parsing and flattening.

A VSS catalog arrives as a nested JSON tree: branch nodes hold ``children``,
leaf nodes carry a ``type`` tag (sensor / actuator / attribute) plus datatype
metadata and optional accessor method signatures. This module flattens that
tree into an ordered, path-indexed :class:`Catalog` of :class:`VssEntry`
records, renders the one-entry-per-line knowledge base used for retrieval,
and renders the shorter comma-separated form embedded in prompts.

Lookups are exact and case-sensitive: the catalog is the authority on which
signals exist, and near-misses must not resolve.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from chaingen.errors import ChainGenError

KINDS = ("sensor", "actuator", "attribute")

_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_ACCESSOR_RE = re.compile(r"(?P<name>[A-Za-z_][A-Za-z0-9_]*)\((?P<params>.*)\)\Z")


class MalformedDocument(ChainGenError):
    """The VSS source tree is not valid JSON or violates the tree shape."""


class UnknownKind(ChainGenError):
    """A leaf node carries a type tag other than sensor/actuator/attribute."""


class DuplicatePath(ChainGenError):
    """Two entries resolve to the same signal path."""


@dataclass(frozen=True)
class AccessorSpec:
    """One getter or setter method exposed for a signal."""

    name: str
    direction: str  # "getter" | "setter"
    param_signature: str = ""

    def __post_init__(self) -> None:
        if not _IDENTIFIER_RE.match(self.name):
            raise ValueError(f"accessor name is not an identifier: {self.name!r}")
        if self.direction not in ("getter", "setter"):
            raise ValueError(f"accessor direction must be getter or setter: {self.direction!r}")

    def render(self) -> str:
        """Render back to the ``name(params)`` source form."""
        return f"{self.name}({self.param_signature})"


def parse_accessor(text: str) -> AccessorSpec:
    """Parse an accessor signature string such as ``set_is_signaling(bool value)``.

    Direction is inferred from the method name: a ``set`` prefix marks a
    setter, everything else is a getter.
    """
    m = _ACCESSOR_RE.match(text.strip())
    if not m:
        raise MalformedDocument(f"bad accessor signature: {text!r}")
    name = m.group("name")
    direction = "setter" if name.startswith("set") else "getter"
    return AccessorSpec(name=name, direction=direction, param_signature=m.group("params").strip())


@dataclass(frozen=True)
class VssEntry:
    """One flattened vehicle signal."""

    path: str
    kind: str
    datatype: str = ""
    unit: str | None = None
    description: str = ""
    accessors: tuple[AccessorSpec, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.path or any(ch.isspace() for ch in self.path):
            raise ValueError(f"signal path must be non-empty and whitespace-free: {self.path!r}")
        if any(not seg for seg in self.path.split(".")):
            raise ValueError(f"signal path has an empty segment: {self.path!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown signal kind: {self.kind!r}")
        if self.kind == "actuator" and not any(a.direction == "setter" for a in self.accessors):
            raise ValueError(f"actuator {self.path} needs at least one setter accessor")

    @property
    def leaf_name(self) -> str:
        return self.path.rsplit(".", 1)[-1]


class Catalog:
    """Ordered, immutable collection of VSS entries indexed by path.

    Iteration order equals source-document order; the index maps each path
    to exactly one entry. Safe for concurrent reads.
    """

    def __init__(self, entries) -> None:
        self._entries: tuple[VssEntry, ...] = tuple(entries)
        index: dict[str, int] = {}
        for pos, entry in enumerate(self._entries):
            if entry.path in index:
                raise DuplicatePath(entry.path)
            index[entry.path] = pos
        self._index = index

    @property
    def entries(self) -> tuple[VssEntry, ...]:
        return self._entries

    def lookup(self, path: str) -> VssEntry | None:
        """Return the entry with exactly this path, or None. No fuzzy matching."""
        pos = self._index.get(path)
        return None if pos is None else self._entries[pos]

    def paths(self) -> tuple[str, ...]:
        return tuple(e.path for e in self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __contains__(self, path: str) -> bool:
        return path in self._index


def _camel_to_snake(name: str) -> str:
    return re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", name).lower()


def _default_accessors(kind: str, leaf_name: str, datatype: str) -> tuple[AccessorSpec, ...]:
    # Curated catalogs usually list accessors explicitly; when they do not,
    # derive them from the leaf name so every entry stays addressable.
    snake = _camel_to_snake(leaf_name)
    if kind == "actuator":
        params = f"{datatype or 'auto'} value"
        return (AccessorSpec(name=f"set_{snake}", direction="setter", param_signature=params),)
    return (AccessorSpec(name=f"get_{snake}", direction="getter", param_signature=""),)


def parse_vss_json(document: str) -> Catalog:
    """Parse a nested VSS JSON tree into a flat catalog.

    Branch nodes are objects with a ``children`` mapping (or an explicit
    ``type: branch``); every other object is a leaf and must carry a
    recognized ``type`` tag. Paths concatenate branch names with ``.`` in
    source-document order.
    """
    try:
        root = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(root, dict):
        raise MalformedDocument("VSS document root must be an object")

    entries: list[VssEntry] = []

    def walk(prefix: str, name: str, node) -> None:
        if not isinstance(node, dict):
            raise MalformedDocument(f"node {name!r} under {prefix or '<root>'} is not an object")
        if not name or any(ch.isspace() for ch in name) or "." in name:
            raise MalformedDocument(f"bad node name {name!r} under {prefix or '<root>'}")
        path = f"{prefix}.{name}" if prefix else name
        kind = node.get("type")
        if kind == "branch" or "children" in node:
            children = node.get("children", {})
            if not isinstance(children, dict):
                raise MalformedDocument(f"children of {path} must be an object")
            for child_name, child in children.items():
                walk(path, child_name, child)
            return
        if kind not in KINDS:
            raise UnknownKind(f"leaf {path} has unrecognized type tag {kind!r}")
        datatype = node.get("datatype", "")
        raw_accessors = node.get("accessors", [])
        if not isinstance(raw_accessors, list):
            raise MalformedDocument(f"accessors of {path} must be a list")
        accessors = tuple(parse_accessor(a) for a in raw_accessors)
        if not accessors:
            accessors = _default_accessors(kind, name, datatype)
        entries.append(
            VssEntry(
                path=path,
                kind=kind,
                datatype=datatype,
                unit=node.get("unit"),
                description=node.get("description", ""),
                accessors=accessors,
            )
        )

    for top_name, top_node in root.items():
        walk("", top_name, top_node)
    return Catalog(entries)


def _sanitize_description(text: str) -> str:
    # The KB line format is one entry per line with the description last;
    # newlines would break the line shape and commas the field split.
    return text.replace("\r", " ").replace("\n", " ").replace(",", ";").strip()


def format_kb_line(entry: VssEntry) -> str:
    """Render one knowledge-base line:
    ``<path>,<kind>,<accessors joined by ';'>,<description>``.

    Accessor signatures may contain commas; they stay recoverable because the
    accessors field is the penultimate one (see :func:`parse_kb_lines`).
    """
    accessors = ";".join(a.render() for a in entry.accessors)
    return f"{entry.path},{entry.kind},{accessors},{_sanitize_description(entry.description)}"


def flatten_catalog(catalog: Catalog) -> list[str]:
    """Render the one-entry-per-line knowledge base in catalog order."""
    return [format_kb_line(entry) for entry in catalog]


def format_prompt_line(entry: VssEntry) -> str:
    """Render the short three-field form placed inside prompts:
    ``<path>, <kind>, <accessors>``."""
    accessors = "; ".join(a.render() for a in entry.accessors)
    return f"{entry.path}, {entry.kind}, {accessors}"


def parse_kb_lines(lines) -> Catalog:
    """Rebuild a catalog from knowledge-base lines.

    Splits each line on the first two commas (path, kind) and the last comma
    (description), leaving the accessors field intact even when signatures
    contain commas. Datatype and unit are not stored in KB lines.
    """
    entries = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split(",", 2)
        if len(parts) != 3:
            raise MalformedDocument(f"KB line {lineno} has too few fields: {line!r}")
        path, kind, rest = parts
        accessors_field, _, description = rest.rpartition(",")
        if not _:
            raise MalformedDocument(f"KB line {lineno} is missing the description field: {line!r}")
        if kind not in KINDS:
            raise UnknownKind(f"KB line {lineno} has unrecognized kind {kind!r}")
        accessors = tuple(
            parse_accessor(a) for a in accessors_field.split(";") if a.strip()
        )
        entries.append(
            VssEntry(path=path, kind=kind, description=description, accessors=accessors)
        )
    return Catalog(entries)


def lookup(catalog: Catalog, path: str) -> VssEntry | None:
    """Module-level alias for :meth:`Catalog.lookup`."""
    return catalog.lookup(path)
