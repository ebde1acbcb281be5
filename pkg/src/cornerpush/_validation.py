"""Input coercion and checks shared by the estimator wrappers and the CLI."""
from __future__ import annotations

import os

import numpy as np
from sklearn.utils import column_or_1d

from .lp_model import Iterate, LinearProgram


def check_lp(obj) -> LinearProgram:
    """Return a :class:`LinearProgram` from a model, a file path or a JSON dict."""
    if isinstance(obj, LinearProgram):
        return obj
    if isinstance(obj, (str, os.PathLike)):
        from .mps_io import read_model

        return read_model(obj)
    if isinstance(obj, dict):
        from .mps_io import lp_from_dict

        return lp_from_dict(obj)
    raise TypeError(f"expected a LinearProgram, a path or a dict, got {type(obj).__name__}")


def _vector(v, size: int, what: str) -> np.ndarray:
    arr = column_or_1d(np.asarray(v, dtype=float))
    if arr.shape != (size,):
        raise ValueError(f"{what} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


def check_iterate(lp: LinearProgram, it) -> Iterate:
    """Coerce ``it`` to a finite :class:`Iterate` with dimensions matching ``lp``.

    Accepts an ``Iterate``, any result object with an ``iterate`` attribute,
    or a tuple ``(x, y)`` / ``(x, y, z)``. A missing ``z`` is set to ``c - A'y``.
    """
    if hasattr(it, "iterate") and not isinstance(it, Iterate):
        it = it.iterate
    if isinstance(it, Iterate):
        x, y, z = it.x, it.y, it.z
    elif isinstance(it, (tuple, list)) and len(it) in (2, 3):
        x, y = it[0], it[1]
        z = it[2] if len(it) == 3 else None
    else:
        raise TypeError(f"cannot interpret {type(it).__name__} as an iterate")
    x = _vector(x, lp.num_cols, "x")
    y = _vector(y, lp.num_rows, "y")
    z = lp.c - lp.AT @ y if z is None else _vector(z, lp.num_cols, "z")
    return Iterate(x, y, z)


def check_positive(value, name: str, strict: bool = True) -> float:
    v = float(value)
    if not np.isfinite(v) or (v <= 0 if strict else v < 0):
        raise ValueError(f"{name} must be {'positive' if strict else 'nonnegative'}, got {value!r}")
    return v
