"""Canonical JSON encoding used for every on-disk artifact.

Floats are rounded to four decimals and keys are sorted, so two equal values
always serialize to the same bytes. Generators quantize their outputs with
:func:`q` up front, which makes serialization lossless.
"""

import hashlib
import json
import math

DECIMALS = 4


def q(x: float) -> float:
    """Quantize a float to the canonical precision (and fold -0.0 into 0.0)."""
    v = round(float(x), DECIMALS)
    return 0.0 if v == 0 else v


def _normalize(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float {obj!r} cannot be serialized")
        return q(obj)
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    # numpy scalars
    if hasattr(obj, "item"):
        return _normalize(obj.item())
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def dumps(obj, indent=None) -> str:
    return json.dumps(
        _normalize(obj),
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":") if indent is None else (",", ": "),
        indent=indent,
    )


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def digest(obj) -> str:
    return sha256_text(dumps(obj))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
