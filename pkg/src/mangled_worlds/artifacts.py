"""Shared bits for deterministic output files: version tag and config digests."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any, Mapping

TOOL_NAME = "mangled-worlds"
TOOL_VERSION = "0.1.0"


def _canonical(value: Any) -> Any:
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return repr(value)
        return float(repr(value))
    if isinstance(value, Mapping):
        return {str(k): _canonical(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def config_digest(params: Mapping[str, Any]) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    blob = json.dumps(_canonical(params), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def comment_line(digest: str, kind: str = "") -> str:
    tail = f" kind={kind}" if kind else ""
    return f"# {TOOL_NAME} {TOOL_VERSION} config_digest={digest}{tail}\n"


def fmt(x: float) -> str:
    """15 significant digits, the precision used for every numeric column."""
    return f"{x + 0.0:.15g}"  # + 0.0 folds -0.0 into 0
