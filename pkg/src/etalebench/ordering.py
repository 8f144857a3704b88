"""Deterministic ordering for heterogeneous ids (ints, strings, tuples)."""

from __future__ import annotations

import hashlib
import json
from typing import Any


def order_key(x: Any):
    """Total order over the ids used throughout the package.

    Numbers sort before strings, strings before tuples; tuples compare
    elementwise.  Everything that can appear as an object, arrow or element
    id must be orderable by this key.
    """
    if isinstance(x, bool):
        return (0, int(x))
    if isinstance(x, (int, float)):
        return (0, x)
    if isinstance(x, str):
        return (1, x)
    if isinstance(x, (tuple, list)):
        return (2, tuple(order_key(y) for y in x))
    if isinstance(x, frozenset):
        return (3, tuple(sorted(order_key(y) for y in x)))
    if x is None:
        return (-1, 0)
    return (4, repr(x))


def sorted_ids(items):
    return sorted(items, key=order_key)


def jsonable(x: Any):
    """Convert ids (tuples, frozensets) into json-friendly nested lists."""
    if isinstance(x, (tuple, list)):
        return [jsonable(y) for y in x]
    if isinstance(x, frozenset):
        return [jsonable(y) for y in sorted_ids(x)]
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    return x


def digest(obj: Any) -> str:
    """Stable short hash of a json-able structure."""
    text = json.dumps(jsonable(obj), separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
