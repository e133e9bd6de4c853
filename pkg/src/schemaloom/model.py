"""In-memory model of JSON schema documents.

A schema is held as a tree of typed nodes carrying per-property descriptions,
units, and constraints. The module parses schema text losslessly (unknown
keywords survive in a side map), serializes to a canonical byte-stable form,
flattens to dotted property paths, diffs two documents structurally, and
detects duplicated property names across nesting branches.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Optional

from schemaloom import SchemaloomError


class SchemaError(SchemaloomError):
    """Base class for schema parsing/validation errors."""


class MalformedJson(SchemaError):
    def __init__(self, message: str, line: int, column: int, position: int):
        super().__init__(f"malformed JSON at line {line} column {column}: {message}")
        self.line = line
        self.column = column
        self.position = position


class NotAnObjectRoot(SchemaError):
    def __init__(self, detail: str = "schema root must be an object-typed node"):
        super().__init__(detail)


class UnknownTypeTag(SchemaError):
    def __init__(self, tag: str, path: str):
        super().__init__(f"unknown type tag {tag!r} at {path or '<root>'}")
        self.tag = tag
        self.path = path


class InvalidConstraint(SchemaError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"invalid constraint at {path or '<root>'}: {detail}")
        self.path = path


class TypeTag(str, Enum):
    STRING = "string"
    NUMBER = "number"
    INTEGER = "integer"
    BOOLEAN = "boolean"
    ARRAY = "array"
    OBJECT = "object"
    NULL = "null"


_TAGS = {t.value: t for t in TypeTag}

# Keywords lifted into model fields; everything else is preserved in extras.
_KNOWN_KEYS = {
    "type", "description", "unit", "properties", "items", "required",
    "enum", "minimum", "maximum", "pattern",
}

ARRAY_HOP = "[]"


@dataclass(frozen=True)
class ConstraintSet:
    """Value constraints attached to one schema node."""

    enum_values: Optional[tuple] = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    pattern: Optional[str] = None

    def is_empty(self) -> bool:
        return (
            self.enum_values is None
            and self.minimum is None
            and self.maximum is None
            and self.pattern is None
        )


EMPTY_CONSTRAINTS = ConstraintSet()


@dataclass(frozen=True)
class SchemaNode:
    """One node of the schema tree.

    ``properties`` is only populated on object nodes and ``items`` only on
    array nodes; ``extras`` carries unknown keywords verbatim so that
    parse -> serialize round trips are lossless.
    """

    type_tag: TypeTag
    description: Optional[str] = None
    unit: Optional[str] = None
    properties: Optional[dict[str, "SchemaNode"]] = None
    items: Optional["SchemaNode"] = None
    required: frozenset[str] = frozenset()
    constraints: ConstraintSet = EMPTY_CONSTRAINTS
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SchemaDoc:
    """A parsed schema document: an object-typed root plus optional title."""

    root: SchemaNode
    title: Optional[str] = None

    @property
    def description(self) -> Optional[str]:
        return self.root.description


@dataclass(frozen=True)
class PropertyPath:
    """Dotted location of a node; array hops appear as the segment "[]"."""

    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("PropertyPath needs at least one segment")

    def render(self) -> str:
        return ".".join(self.segments)

    def __str__(self) -> str:
        return self.render()

    @property
    def leaf(self) -> str:
        return self.segments[-1]

    def last_named(self) -> Optional[str]:
        """Innermost segment that is a real property name (skips array hops)."""
        for seg in reversed(self.segments):
            if seg != ARRAY_HOP:
                return seg
        return None


@dataclass(frozen=True)
class SchemaDiff:
    added: tuple[PropertyPath, ...] = ()
    removed: tuple[PropertyPath, ...] = ()
    retyped: tuple[tuple[PropertyPath, TypeTag, TypeTag], ...] = ()
    redescribed: tuple[PropertyPath, ...] = ()
    moved: tuple[tuple[PropertyPath, PropertyPath], ...] = ()

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.retyped or self.redescribed or self.moved)

    def to_json_dict(self) -> dict:
        return {
            "added": [p.render() for p in self.added],
            "removed": [p.render() for p in self.removed],
            "retyped": [
                {"path": p.render(), "from": a.value, "to": b.value}
                for p, a, b in self.retyped
            ],
            "redescribed": [p.render() for p in self.redescribed],
            "moved": [{"from": a.render(), "to": b.render()} for a, b in self.moved],
        }


@dataclass(frozen=True)
class DuplicateGroup:
    """Paths sharing a case-normalized leaf name with similar descriptions."""

    leaf_name: str
    paths: tuple[PropertyPath, ...]
    description_similarity: float

    def to_json_dict(self) -> dict:
        return {
            "leaf_name": self.leaf_name,
            "paths": [p.render() for p in self.paths],
            "description_similarity": self.description_similarity,
        }


# ---------------------------------------------------------------------------
# Parsing


def parse_schema(text: str) -> SchemaDoc:
    """Parse schema text into a SchemaDoc.

    Unknown keywords are kept verbatim in each node's ``extras`` map.
    ``required`` entries naming unknown properties are dropped; a node with no
    ``type`` is inferred as object/array when it carries ``properties``/
    ``items``, otherwise rejected.

    Raises MalformedJson, NotAnObjectRoot, UnknownTypeTag, InvalidConstraint.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(exc.msg, exc.lineno, exc.colno, exc.pos) from exc
    if not isinstance(raw, dict):
        raise NotAnObjectRoot("schema root must be a JSON object")

    title = raw.get("title") if isinstance(raw.get("title"), str) else None
    root = _parse_node(raw, path=(), at_root=True)
    if root.type_tag is not TypeTag.OBJECT:
        raise NotAnObjectRoot(f"schema root must be object-typed, got {root.type_tag.value!r}")
    return SchemaDoc(root=root, title=title)


def _resolve_tag(raw: dict, path: tuple[str, ...]) -> TypeTag:
    rendered = ".".join(path)
    if "type" not in raw:
        if isinstance(raw.get("properties"), dict):
            return TypeTag.OBJECT
        if isinstance(raw.get("items"), dict):
            return TypeTag.ARRAY
        raise UnknownTypeTag("<missing>", rendered)
    tag = raw["type"]
    if not isinstance(tag, str):
        raise UnknownTypeTag(json.dumps(tag), rendered)
    if tag not in _TAGS:
        raise UnknownTypeTag(tag, rendered)
    return _TAGS[tag]


def _parse_node(raw: dict, path: tuple[str, ...], at_root: bool = False) -> SchemaNode:
    rendered = ".".join(path)
    tag = _resolve_tag(raw, path)

    description = raw.get("description") if isinstance(raw.get("description"), str) else None
    unit = raw.get("unit") if isinstance(raw.get("unit"), str) else None

    properties: Optional[dict[str, SchemaNode]] = None
    required: frozenset[str] = frozenset()
    if tag is TypeTag.OBJECT and isinstance(raw.get("properties"), dict):
        properties = {
            name: _parse_node(child, path + (name,))
            for name, child in raw["properties"].items()
            if isinstance(child, dict)
        }
        if isinstance(raw.get("required"), list):
            required = frozenset(
                n for n in raw["required"] if isinstance(n, str) and n in properties
            )

    items: Optional[SchemaNode] = None
    if tag is TypeTag.ARRAY and isinstance(raw.get("items"), dict):
        items = _parse_node(raw["items"], path + (ARRAY_HOP,))

    constraints = _parse_constraints(raw, rendered)

    extras: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _KNOWN_KEYS:
            # Keywords on nodes of the wrong type are junk; keep them verbatim.
            if key == "properties" and properties is None and tag is not TypeTag.OBJECT:
                extras[key] = value
            elif key == "items" and items is None and tag is not TypeTag.ARRAY:
                extras[key] = value
            elif key == "required" and tag is not TypeTag.OBJECT:
                extras[key] = value
            continue
        if key == "title" and at_root and isinstance(value, str):
            continue  # lifted onto SchemaDoc
        extras[key] = value

    return SchemaNode(
        type_tag=tag,
        description=description,
        unit=unit,
        properties=properties,
        items=items,
        required=required,
        constraints=constraints,
        extras=extras,
    )


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _parse_constraints(raw: dict, rendered: str) -> ConstraintSet:
    enum_values = None
    if isinstance(raw.get("enum"), list) and raw["enum"]:
        enum_values = tuple(raw["enum"])
    minimum = raw.get("minimum") if _is_number(raw.get("minimum")) else None
    maximum = raw.get("maximum") if _is_number(raw.get("maximum")) else None
    if minimum is not None and maximum is not None and minimum > maximum:
        raise InvalidConstraint(rendered, f"minimum {minimum} exceeds maximum {maximum}")
    pattern = raw.get("pattern") if isinstance(raw.get("pattern"), str) else None
    if enum_values is None and minimum is None and maximum is None and pattern is None:
        return EMPTY_CONSTRAINTS
    return ConstraintSet(enum_values=enum_values, minimum=minimum, maximum=maximum, pattern=pattern)


# ---------------------------------------------------------------------------
# Canonical serialization


def serialize_canonical(doc: SchemaDoc) -> str:
    """Render a document as canonical text.

    Keys sorted at every level, 2-space indent, LF endings, trailing newline.
    Idempotent under parse/serialize cycles.
    """
    data = _node_to_raw(doc.root)
    if doc.title is not None:
        data["title"] = doc.title
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _node_to_raw(node: SchemaNode) -> dict:
    data: dict[str, Any] = {"type": node.type_tag.value}
    if node.description is not None:
        data["description"] = node.description
    if node.unit is not None:
        data["unit"] = node.unit
    c = node.constraints
    if c.enum_values is not None:
        data["enum"] = list(c.enum_values)
    if c.minimum is not None:
        data["minimum"] = c.minimum
    if c.maximum is not None:
        data["maximum"] = c.maximum
    if c.pattern is not None:
        data["pattern"] = c.pattern
    if node.properties is not None:
        data["properties"] = {name: _node_to_raw(child) for name, child in node.properties.items()}
    if node.required:
        data["required"] = sorted(node.required)
    if node.items is not None:
        data["items"] = _node_to_raw(node.items)
    for key, value in node.extras.items():
        data.setdefault(key, value)
    return data


# ---------------------------------------------------------------------------
# Flattening


def iter_nodes(doc: SchemaDoc) -> Iterator[tuple[PropertyPath, SchemaNode]]:
    """Yield every node below the root in depth-first pre-order.

    Children are visited in lexicographic name order so the walk matches the
    canonical serialization; array item nodes appear under an "[]" segment.
    """
    yield from _walk(doc.root, ())


def _walk(node: SchemaNode, prefix: tuple[str, ...]) -> Iterator[tuple[PropertyPath, SchemaNode]]:
    if node.properties:
        for name in sorted(node.properties):
            child = node.properties[name]
            path = prefix + (name,)
            yield PropertyPath(path), child
            yield from _walk(child, path)
    if node.items is not None:
        path = prefix + (ARRAY_HOP,)
        yield PropertyPath(path), node.items
        yield from _walk(node.items, path)


def flatten(doc: SchemaDoc) -> list[tuple[PropertyPath, TypeTag, Optional[str]]]:
    """List (path, type, description) for every node excluding the root."""
    return [(path, node.type_tag, node.description) for path, node in iter_nodes(doc)]


# ---------------------------------------------------------------------------
# Diffing


def _segment_edit_distance(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    # Levenshtein over path segments.
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        curr = [i] + [0] * len(b)
        for j, sb in enumerate(b, start=1):
            cost = 0 if sa == sb else 1
            curr[j] = min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + cost)
        prev = curr
    return prev[-1]


def diff(old: SchemaDoc, new: SchemaDoc) -> SchemaDiff:
    """Structural diff between two documents.

    A node present only on each side under the same leaf name with an equal
    subtree is reported as a move rather than an add+remove; ambiguous move
    candidates resolve to the shortest segment edit distance, ties broken
    lexicographically. The result mirrors under argument swap.
    """
    old_nodes = {path.render(): (path, node) for path, node in iter_nodes(old)}
    new_nodes = {path.render(): (path, node) for path, node in iter_nodes(new)}

    retyped = []
    redescribed = []
    for key in sorted(old_nodes.keys() & new_nodes.keys()):
        opath, onode = old_nodes[key]
        _, nnode = new_nodes[key]
        if onode.type_tag is not nnode.type_tag:
            retyped.append((opath, onode.type_tag, nnode.type_tag))
        elif onode.description != nnode.description:
            redescribed.append(opath)

    removed_only = {k: v for k, v in old_nodes.items() if k not in new_nodes}
    added_only = {k: v for k, v in new_nodes.items() if k not in old_nodes}

    # Move candidates: identical subtree, same leaf name, different location.
    candidates = []
    for okey, (opath, onode) in removed_only.items():
        for nkey, (npath, nnode) in added_only.items():
            if opath.leaf == npath.leaf and onode == nnode:
                dist = _segment_edit_distance(opath.segments, npath.segments)
                # Swap-invariant ordering keeps diff(a,b)/diff(b,a) mirrored.
                candidates.append((dist, min(okey, nkey), max(okey, nkey), okey, nkey))
    candidates.sort()

    moved = []
    matched_old: set[str] = set()
    matched_new: set[str] = set()
    for _, _, _, okey, nkey in candidates:
        if okey in matched_old or nkey in matched_new:
            continue
        matched_old.add(okey)
        matched_new.add(nkey)
        moved.append((removed_only[okey][0], added_only[nkey][0]))
    moved.sort(key=lambda pair: (pair[0].render(), pair[1].render()))

    added = tuple(path for key, (path, _) in sorted(added_only.items()) if key not in matched_new)
    removed = tuple(path for key, (path, _) in sorted(removed_only.items()) if key not in matched_old)

    return SchemaDiff(
        added=added,
        removed=removed,
        retyped=tuple(retyped),
        redescribed=tuple(redescribed),
        moved=tuple(moved),
    )


# ---------------------------------------------------------------------------
# Duplicate property detection


_WORD_RE = re.compile(r"[a-z0-9]+")


def dice_similarity(a: Optional[str], b: Optional[str]) -> float:
    """Dice coefficient over lowercased word-token sets. Both empty -> 1.0."""
    ta = set(_WORD_RE.findall((a or "").lower()))
    tb = set(_WORD_RE.findall((b or "").lower()))
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return 2.0 * len(ta & tb) / (len(ta) + len(tb))


def find_duplicates(doc: SchemaDoc, sim_threshold: float) -> list[DuplicateGroup]:
    """Group same-named properties whose descriptions look alike.

    A group is reported when every pairwise Dice similarity within the
    name-collision set reaches ``sim_threshold``; the group carries the
    minimum pairwise similarity. Array hop segments never name a group.
    Thresholds above 1.0 are accepted and simply report nothing.
    """
    if sim_threshold < 0:
        raise ValueError("sim_threshold must be non-negative")
    by_leaf: dict[str, list[tuple[PropertyPath, SchemaNode]]] = {}
    for path, node in iter_nodes(doc):
        if path.leaf == ARRAY_HOP:
            continue
        by_leaf.setdefault(path.leaf.lower(), []).append((path, node))

    groups = []
    for leaf in sorted(by_leaf):
        entries = by_leaf[leaf]
        if len(entries) < 2:
            continue
        sims = [
            dice_similarity(entries[i][1].description, entries[j][1].description)
            for i in range(len(entries))
            for j in range(i + 1, len(entries))
        ]
        min_sim = min(sims)
        if min_sim >= sim_threshold:
            groups.append(
                DuplicateGroup(
                    leaf_name=leaf,
                    paths=tuple(sorted((p for p, _ in entries), key=lambda p: p.render())),
                    description_similarity=min_sim,
                )
            )
    return groups
