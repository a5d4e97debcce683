"""Versioned, human-inspectable model files.

A model artifact is a single JSON document carrying the intercepts, the dense
coefficient matrix (row-major), the fitted column dictionary, the penalty
specification, and fit diagnostics.  Floats serialize at full precision, so a
save/load round trip reproduces predictions bit for bit.  Writes go through a
temporary file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import SchemaError
from .ingestion import DesignEncoder
from .model import ModelFit
from .prox import PenaltyGroups

FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    """In-memory form of a saved model."""

    version: int
    alpha: np.ndarray
    B: np.ndarray
    class_names: list
    feature_names: list
    penalty_kind: str
    lam: float
    groups: Optional[PenaltyGroups]
    encoder: Optional[DesignEncoder]
    diagnostics: Dict = field(default_factory=dict)


def _groups_to_dict(groups: Optional[PenaltyGroups]):
    if groups is None:
        return None
    return {
        "groups": {name: [int(i) for i in idx] for name, idx in groups.groups.items()},
        "unpenalized": [int(i) for i in groups.unpenalized],
    }


def _groups_from_dict(raw) -> Optional[PenaltyGroups]:
    if raw is None:
        return None
    return PenaltyGroups(
        groups={name: np.array(idx, dtype=int) for name, idx in raw["groups"].items()},
        unpenalized=np.array(raw.get("unpenalized", []), dtype=int),
    )


def save_model(path, fit: ModelFit, feature_names, class_names,
               groups: Optional[PenaltyGroups] = None,
               encoder: Optional[DesignEncoder] = None,
               diagnostics: Optional[Dict] = None) -> None:
    """Write a model artifact atomically (temp file + rename)."""
    doc = {
        "format": "nuclogit-model",
        "version": FORMAT_VERSION,
        "class_names": list(class_names),
        "feature_names": list(feature_names),
        "alpha": [float(a) for a in fit.alpha],
        "b": [[float(v) for v in row] for row in fit.B],
        "penalty": {
            "kind": fit.penalty_kind,
            "lambda": float(fit.lam),
            "groups": _groups_to_dict(groups),
        },
        "encoder": encoder.to_dict() if encoder is not None else None,
        "diagnostics": dict(diagnostics or {}),
    }
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> ModelArtifact:
    """Read a model artifact, validating version and shape consistency."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not a valid model file: {exc}") from exc
    if doc.get("format") != "nuclogit-model":
        raise SchemaError(f"{path}: not a nuclogit model file")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaError(
            f"{path}: unsupported model version {doc.get('version')!r}"
        )
    alpha = np.array(doc["alpha"], dtype=float)
    B = np.array(doc["b"], dtype=float)
    feature_names = list(doc["feature_names"])
    class_names = list(doc["class_names"])
    if B.shape != (len(feature_names), len(class_names)):
        raise SchemaError(f"{path}: coefficient matrix shape does not match names")
    if alpha.shape != (len(class_names),):
        raise SchemaError(f"{path}: intercept length does not match class names")
    encoder_raw = doc.get("encoder")
    return ModelArtifact(
        version=doc["version"],
        alpha=alpha,
        B=B,
        class_names=class_names,
        feature_names=feature_names,
        penalty_kind=doc["penalty"]["kind"],
        lam=float(doc["penalty"]["lambda"]),
        groups=_groups_from_dict(doc["penalty"].get("groups")),
        encoder=DesignEncoder.from_dict(encoder_raw) if encoder_raw else None,
        diagnostics=dict(doc.get("diagnostics", {})),
    )
