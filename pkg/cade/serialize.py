"""JSON document helpers shared by every persisted artifact."""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict

import numpy as np

from .errors import ConfigError, IoError


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(doc: Any, indent: int | None = 2) -> str:
    """Deterministic JSON text: sorted keys, numpy scalars unwrapped, floats as repr."""
    return json.dumps(doc, indent=indent, sort_keys=True, default=_default)


def write_json(filepath: str | Path, doc: Dict[str, Any], what: str = "document"):
    target = Path(filepath)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(dumps(doc) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {what} to {target}: {e}") from e


def read_json(filepath: str | Path, what: str = "document", version: str | None = None) -> Dict[str, Any]:
    """Load a JSON document; FileNotFoundError if missing, ConfigError on a version mismatch."""
    source = Path(filepath)
    if not source.exists():
        raise FileNotFoundError(f"{what.capitalize()} not found: {source}")
    try:
        doc = json.loads(source.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source} is not valid JSON: {e}") from e
    if version is not None and doc.get("version") != version:
        raise ConfigError(f"unsupported {what} version '{doc.get('version')}' in {source}")
    return doc


def fingerprint(doc: Any) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    return hashlib.sha256(dumps(doc, indent=None).encode()).hexdigest()[:16]
