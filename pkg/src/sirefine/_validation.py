"""Input checking shared by the public entry points."""
from __future__ import annotations

import numpy as np

PMF_TOL = 1e-12


class ValidationError(ValueError):
    """An input file or object violates its schema or invariants."""


class InfeasibleError(RuntimeError):
    """No auxiliary system satisfies the distortion targets."""


def check_probability_table(p, name="pmf", tol=PMF_TOL) -> list[str]:
    p = np.asarray(p, dtype=float)
    problems = []
    if not np.all(np.isfinite(p)):
        problems.append(f"{name}: non-finite entries")
        return problems
    if np.any(p < 0):
        problems.append(f"{name}: negative mass (min entry {p.min():.3g})")
    s = p.sum()
    if abs(s - 1.0) > tol:
        problems.append(f"{name}: sum ≠ 1 (sum = {s:.15g})")
    return problems


def check_channel(channel, n_inputs: int, tol=PMF_TOL) -> np.ndarray:
    """Validate a conditional pmf whose first axis is the conditioning input."""
    channel = np.asarray(channel, dtype=float)
    if channel.shape[0] != n_inputs:
        raise ValidationError(f"channel has {channel.shape[0]} input rows, expected {n_inputs}")
    if np.any(channel < 0) or not np.all(np.isfinite(channel)):
        raise ValidationError("channel has negative or non-finite entries")
    rows = channel.reshape(n_inputs, -1).sum(axis=1)
    bad = np.flatnonzero(np.abs(rows - 1.0) > tol)
    if bad.size:
        raise ValidationError(f"channel slices for inputs {bad.tolist()} do not sum to 1")
    return channel


def as_distortion_vector(d, t: int) -> tuple[float, ...]:
    d = tuple(float(x) for x in np.atleast_1d(np.asarray(d, dtype=float)))
    if len(d) != t:
        raise ValidationError(f"distortion vector has length {len(d)}, expected t={t}")
    if any(x < 0 or not np.isfinite(x) for x in d):
        raise ValidationError("distortion targets must be finite and nonnegative")
    return d
