# Instance file format
#
# A single JSON document:
#
#   {"n": 3, "discount": 0.9,
#    "states": [{"id": 1, "actions": [{"label": "to2",
#                                      "transitions": [{"to": 2, "p": 1.0}],
#                                      "costs": [{"to": 2, "g": 1.0}]}, ...]}, ...]}
#
# save_instance writes the canonical form (this field order, 2-space indent, floats
# in shortest round-trip repr), so load then save is the identity on canonical text.
#
from __future__ import annotations

import hashlib
import json
import logging
import os

from .mdp import Action, InstanceError, MdpInstance, State, validate

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

INSTANCE_FIELDS = ("n", "discount", "states")
STATE_FIELDS = ("id", "actions")
ACTION_FIELDS = ("label", "transitions", "costs")
TRANSITION_FIELDS = ("to", "p")
COST_FIELDS = ("to", "g")


class InstanceParseError(InstanceError):
    """Instance text does not conform to the instance file format."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        InstanceError.__init__(self, f"{location}: {message}" if location else message)


# #############################################
# READ
#
def _fields(obj, path: str, expected: tuple[str, ...]) -> dict:
    if not isinstance(obj, dict):
        raise InstanceParseError(f"expected an object, got {type(obj).__name__}", path)
    for k in obj:
        if k not in expected:
            raise InstanceParseError(f"unknown field {k!r}", path)
    for k in expected:
        if k not in obj:
            raise InstanceParseError(f"missing field {k!r}", path)
    return obj


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceParseError(f"expected an integer, got {value!r}", path)
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceParseError(f"expected a number, got {value!r}", path)
    return float(value)


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise InstanceParseError(f"expected a list, got {type(value).__name__}", path)
    return value


def _action(obj, path: str) -> Action:
    obj = _fields(obj, path, ACTION_FIELDS)
    label = obj["label"]
    if not isinstance(label, str) or label == "":
        raise InstanceParseError(f"expected a non empty string, got {label!r}", f"{path}.label")
    transitions = []
    for i, t in enumerate(_list(obj["transitions"], f"{path}.transitions")):
        where = f"{path}.transitions[{i}]"
        t = _fields(t, where, TRANSITION_FIELDS)
        transitions.append((_integer(t["to"], f"{where}.to"), _number(t["p"], f"{where}.p")))
    costs = []
    for i, c in enumerate(_list(obj["costs"], f"{path}.costs")):
        where = f"{path}.costs[{i}]"
        c = _fields(c, where, COST_FIELDS)
        costs.append((_integer(c["to"], f"{where}.to"), _number(c["g"], f"{where}.g")))
    return Action(label=label, transitions=tuple(transitions), costs=tuple(costs))


def parse_instance(doc) -> MdpInstance:
    """Builds an instance from an already decoded document, without validating it."""
    doc = _fields(doc, "instance", INSTANCE_FIELDS)
    n = _integer(doc["n"], "n")
    discount = _number(doc["discount"], "discount")
    states = []
    for i, s in enumerate(_list(doc["states"], "states")):
        where = f"states[{i}]"
        s = _fields(s, where, STATE_FIELDS)
        actions = tuple(_action(a, f"{where}.actions[{j}]") for j, a in enumerate(_list(s["actions"], f"{where}.actions")))
        states.append(State(id=_integer(s["id"], f"{where}.id"), actions=actions))
    return MdpInstance(n=n, discount=discount, states=tuple(states))


def load_instance(text: str) -> MdpInstance:
    """Parses and validates serialized instance text.

    Raises InstanceParseError (with line/column or field path) or InstanceValidationError.
    """
    if text is None or text.strip() == "":
        raise InstanceParseError("empty instance text", "line 1, column 1")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(e.msg, f"line {e.lineno}, column {e.colno}") from None
    instance = parse_instance(doc)
    validate(instance).raise_if_invalid()
    logger.debug(f"loaded instance: {instance.describe()}")
    return instance


def read_instance(path: str | os.PathLike) -> MdpInstance:
    with open(path, encoding="utf-8") as fp:
        return load_instance(fp.read())


# #############################################
# WRITE
#
def instance_document(instance: MdpInstance) -> dict:
    return {
        "n": int(instance.n),
        "discount": float(instance.discount),
        "states": [
            {
                "id": int(s.id),
                "actions": [
                    {
                        "label": a.label,
                        "transitions": [{"to": int(y), "p": float(p)} for y, p in a.transitions],
                        "costs": [{"to": int(y), "g": float(g)} for y, g in a.costs],
                    }
                    for a in s.actions
                ],
            }
            for s in instance.states
        ],
    }


def save_instance(instance: MdpInstance) -> str:
    """Canonical serialization."""
    return json.dumps(instance_document(instance), indent=2, ensure_ascii=False) + "\n"


def write_instance(instance: MdpInstance, path: str | os.PathLike):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(save_instance(instance))
    logger.info(f"instance written to {path}")


def instance_digest(instance: MdpInstance) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(save_instance(instance).encode("utf-8")).hexdigest()
