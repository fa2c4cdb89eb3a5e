"""Reading and writing MDPs.

The canonical file format is JSON::

    {
      "inputs": ["but", "coin"],
      "outputs": ["init", "beep", "coffee"],
      "initial": "q0",
      "states": [{"id": "q0", "label": "init"}, ...],
      "transitions": [{"from": "q0", "input": "coin", "to": {"q1": 1.0}}, ...]
    }

State ids are arbitrary strings in files and dense integers in memory.  An
optional ``"metadata"`` object is carried along unchanged.  The bundled
``coffee.json`` is the reference example.
"""

from __future__ import annotations

import json
from pathlib import Path

from .mdp import InvalidMdpError, Mdp, validate


class MdpParseError(ValueError):
    """Malformed model file; ``line`` and ``field`` locate the problem when known."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


def _require(obj, key, kind, path):
    if not isinstance(obj, dict) or key not in obj:
        raise MdpParseError(f"missing key {key!r}", field=path)
    value = obj[key]
    if not isinstance(value, kind):
        raise MdpParseError(f"expected {kind.__name__ if isinstance(kind, type) else 'value'}", field=f"{path}.{key}")
    return value


def mdp_from_dict(doc: dict, check: bool = True) -> Mdp:
    """Build an :class:`Mdp` from the decoded canonical JSON document."""
    if not isinstance(doc, dict):
        raise MdpParseError("top level must be an object")
    inputs = _require(doc, "inputs", list, "$")
    outputs = _require(doc, "outputs", list, "$")
    initial = _require(doc, "initial", str, "$")
    states = _require(doc, "states", list, "$")
    transitions = _require(doc, "transitions", list, "$")
    names, labels, index = [], [], {}
    for k, st in enumerate(states):
        path = f"states[{k}]"
        sid = _require(st, "id", str, path)
        label = _require(st, "label", str, path)
        if sid in index:
            raise MdpParseError(f"duplicate state id {sid!r}", field=f"{path}.id")
        index[sid] = len(names)
        names.append(sid)
        labels.append(label)
    if initial not in index:
        raise MdpParseError(f"unknown initial state {initial!r}", field="initial")
    rows = [dict() for _ in names]
    for k, tr in enumerate(transitions):
        path = f"transitions[{k}]"
        src = _require(tr, "from", str, path)
        inp = _require(tr, "input", str, path)
        to = _require(tr, "to", dict, path)
        if src not in index:
            raise MdpParseError(f"unknown state {src!r}", field=f"{path}.from")
        if inp in rows[index[src]]:
            raise MdpParseError(f"duplicate transition for ({src}, {inp})", field=path)
        dist = {}
        for tgt, p in to.items():
            if tgt not in index:
                raise MdpParseError(f"unknown state {tgt!r}", field=f"{path}.to")
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                raise MdpParseError(f"probability must be a number, got {p!r}", field=f"{path}.to.{tgt}")
            dist[index[tgt]] = float(p)
        rows[index[src]][inp] = dist
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise MdpParseError("metadata must be an object", field="metadata")
    m = Mdp(inputs, outputs, labels, rows, index[initial], names, dict(metadata))
    if check:
        violations = validate(m)
        if violations:
            raise InvalidMdpError(violations)
    return m


def parse_mdp(text: str, check: bool = True) -> Mdp:
    """Parse the canonical JSON format; ``check`` also runs :func:`validate`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpParseError(exc.msg, line=exc.lineno) from None
    return mdp_from_dict(doc, check=check)


def mdp_to_dict(m: Mdp) -> dict:
    doc = {
        "inputs": list(m.inputs),
        "outputs": list(m.outputs),
        "initial": m.state_names[m.initial],
        "states": [{"id": m.state_names[q], "label": m.labels[q]} for q in m.states],
        "transitions": [],
    }
    for q in m.states:
        row = m.transitions[q]
        ordered = [i for i in m.inputs if i in row] + [i for i in row if i not in m.inputs]
        for i in ordered:
            to = {m.state_names[t]: float(p) for t, p in row[i].items()}
            doc["transitions"].append({"from": m.state_names[q], "input": i, "to": to})
    if m.metadata:
        doc["metadata"] = m.metadata
    return doc


def serialize_mdp(m: Mdp) -> str:
    return json.dumps(mdp_to_dict(m), indent=2) + "\n"


def load_mdp(path, check: bool = True) -> Mdp:
    return parse_mdp(Path(path).read_text(), check=check)


def save_mdp(m: Mdp, path) -> None:
    Path(path).write_text(serialize_mdp(m))


def _dot_quote(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(m: Mdp) -> str:
    """Graphviz rendering: nodes ``id/output``, edges ``input:prob``."""
    lines = ["digraph mdp {"]
    for q in m.states:
        name = m.state_names[q]
        lines.append(f"  {_dot_quote(name)} [label={_dot_quote(f'{name}/{m.labels[q]}')}];")
    lines.append("  __start [shape=point];")
    lines.append(f"  __start -> {_dot_quote(m.state_names[m.initial])};")
    for q in m.states:
        for i in m.inputs:
            for t, p in m.transitions[q].get(i, {}).items():
                if p > 0:
                    lines.append(
                        f"  {_dot_quote(m.state_names[q])} -> {_dot_quote(m.state_names[t])}"
                        f" [label={_dot_quote(f'{i}:{p:g}')}];"
                    )
    lines.append("}")
    return "\n".join(lines) + "\n"
