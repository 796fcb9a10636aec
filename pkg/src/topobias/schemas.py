"""JSON schemas for every report the tool writes, plus a validating writer."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

_NUM = {"type": "number"}
_LABELS = {"type": "array", "items": {"type": "string"}, "minItems": 1}

_ENVELOPE = {
    "format": {"type": "string"},
    "tool": {"const": "topobias"},
    "tool_version": {"type": "string"},
    "catalogue_version": {"type": "string"},
    "config": {"type": "object"},
    "metadata": {
        "type": "object",
        "properties": {"created": {"type": "string"}},
        "required": ["created"],
    },
}
_ENVELOPE_REQUIRED = ["format", "tool", "tool_version", "catalogue_version", "config", "metadata"]


def _report(fmt: str, props: dict, required: list[str]) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {**_ENVELOPE, "format": {"const": fmt}, **props},
        "required": _ENVELOPE_REQUIRED + required,
    }


MANIFEST = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "format": {"const": "topobias-manifest v1"},
        "tool_version": {"type": "string"},
        "config": {"type": "object"},
        "generators": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"kind": {"type": "string"}, "label": {"type": "string"},
                               "params": {"type": "object"}, "seed": {"type": "integer"}},
                "required": ["kind", "label", "params"],
            },
        },
        "topologies_per_generator": {"type": ["integer", "null"]},
        "topologies": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"id": {"type": "string"}, "generator": {"type": "string"},
                               "seed": {"type": ["integer", "null"]}, "file": {"type": "string"}},
                "required": ["id", "generator", "seed", "file"],
            },
        },
    },
    "required": ["format", "config", "generators", "topologies_per_generator", "topologies"],
}

BIAS_REPORT = _report(
    "topobias-bias-report v1",
    {
        "features": {"type": "array", "items": {"type": "string"}},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "labels": _LABELS,
                    "subset_size": {"type": "integer", "minimum": 1},
                    "bias_index": {"type": "number", "minimum": 0},
                    "rank": {"type": "integer", "minimum": 1},
                    "g": {"type": "object", "additionalProperties": _NUM},
                },
                "required": ["labels", "subset_size", "bias_index", "rank", "g"],
            },
        },
    },
    ["features", "entries"],
)

_CLASSIFICATION_RESULT = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["gaussian", "bernoulli", "multinomial"]},
        "k": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
        "pair": {"type": ["array", "null"], "items": {"type": "string"}},
        "labels": _LABELS,
        "fold_accuracies": {"type": "array", "items": _NUM},
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "confusion": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
        "class_accuracy": {"type": "object", "additionalProperties": _NUM},
        "misclassification_shares": {"type": "object", "additionalProperties": _NUM},
    },
    "required": ["kind", "k", "seed", "pair", "labels", "fold_accuracies", "accuracy", "confusion"],
}

CLASSIFICATION_REPORT = _report(
    "topobias-classification-report v1",
    {"results": {"type": "array", "items": _CLASSIFICATION_RESULT, "minItems": 1}},
    ["results"],
)

FSS_REPORT = _report(
    "topobias-fss v1",
    {
        "kind": {"enum": ["gaussian", "bernoulli", "multinomial"]},
        "mode": {"enum": ["cv", "fold"]},
        "k": {"type": "integer"},
        "seed": {"type": "integer"},
        "fold": {"type": ["integer", "null"]},
        "max_features": {"type": "integer"},
        "full_trace": {"type": "boolean"},
        "stop_reason": {"type": "string"},
        "best_size": {"type": "integer", "minimum": 0},
        "steps": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "feature": {"type": "integer"},
                    "name": {"type": "string"},
                    "features": {"type": "array", "items": {"type": "integer"}},
                    "accuracy": _NUM,
                },
                "required": ["feature", "name", "features", "accuracy"],
            },
        },
    },
    ["kind", "mode", "stop_reason", "best_size", "steps"],
)

SCHEMAS = {
    "manifest": MANIFEST,
    "bias": BIAS_REPORT,
    "classification": CLASSIFICATION_REPORT,
    "fss": FSS_REPORT,
}


def validate(doc: dict, which: str):
    jsonschema.validate(doc, SCHEMAS[which])


def write_json(doc: dict, path: str | Path, which: str) -> Path:
    validate(doc, which)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path: str | Path, which: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing prerequisite {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    validate(doc, which)
    return doc
