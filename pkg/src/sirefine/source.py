"""Discrete memoryless sources with side information at ``t`` decoders.

The variables are ordered ``(X, Y_1, ..., Y_t)`` and tables are stored flat in
row-major order, ``x`` slowest and ``y_t`` fastest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._validation import (PMF_TOL, ValidationError, as_distortion_vector,
                          check_probability_table)
from .info import Joint

CI_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class JointSourcePmf:
    """Source pmf ``q(x, y_1, ..., y_t)``."""

    t: int
    alphabet_sizes: tuple[int, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet_sizes", tuple(int(a) for a in self.alphabet_sizes))
        probs = np.ascontiguousarray(np.asarray(self.probs, dtype=float).ravel())
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_table(cls, table) -> "JointSourcePmf":
        table = np.asarray(table, dtype=float)
        if table.ndim < 2:
            raise ValidationError("source table needs an X axis and at least one Y axis")
        return cls(table.ndim - 1, table.shape, table.ravel())

    @cached_property
    def table(self) -> np.ndarray:
        return self.probs.reshape(self.alphabet_sizes)

    @cached_property
    def joint(self) -> Joint:
        return Joint(self.table)

    @property
    def x_size(self) -> int:
        return self.alphabet_sizes[0]

    def y_size(self, l: int) -> int:
        return self.alphabet_sizes[l]

    def px(self) -> np.ndarray:
        return marginal(self, (0,))


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Per-letter distortion ``delta_l(x, xhat)`` for decoder ``l`` (1-based)."""

    l: int
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim != 2:
            raise ValidationError(f"distortion for decoder {self.l} must be a matrix")
        if np.any(table < 0):
            raise ValidationError(f"distortion for decoder {self.l} has negative entries")
        if not np.allclose(table.min(axis=1), 0.0, atol=0.0):
            raise ValidationError(f"distortion for decoder {self.l} is not normal "
                                  "(some row has no zero entry)")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def recon_size(self) -> int:
        return self.table.shape[1]

    @classmethod
    def hamming(cls, l: int, size: int) -> "DistortionMeasure":
        return cls(l, 1.0 - np.eye(size))

    def is_error_indicator(self) -> bool:
        """delta(x, x) = 0 and delta(x, xhat) > 0 off the diagonal."""
        tab = self.table
        if tab.shape[0] != tab.shape[1]:
            return False
        off = ~np.eye(tab.shape[0], dtype=bool)
        return bool(np.all(np.diag(tab) == 0) and np.all(tab[off] > 0))

    def max_row_min_free(self, px) -> float:
        """Expected distortion of the best constant reconstruction."""
        return float((np.asarray(px) @ self.table).min())


def validate_source(q: JointSourcePmf) -> list[str]:
    """List invariant violations of ``q``; empty means valid."""
    problems = []
    sizes = q.alphabet_sizes
    if q.t < 1:
        problems.append(f"t = {q.t} < 1")
    if len(sizes) != q.t + 1:
        problems.append(f"{len(sizes)} alphabet sizes given, expected t+1 = {q.t + 1}")
    if any(a < 1 for a in sizes):
        problems.append(f"alphabet sizes must be ≥ 1, got {list(sizes)}")
    if not problems and q.probs.size != int(np.prod(sizes)):
        problems.append(f"pmf has {q.probs.size} entries, expected {int(np.prod(sizes))}")
    problems += check_probability_table(q.probs, tol=PMF_TOL)
    return problems


def _var_axes(q: JointSourcePmf, vars) -> tuple[int, ...]:
    axes = tuple(sorted({int(v) for v in vars}))
    if not axes:
        raise ValueError("marginal needs a nonempty variable set")
    if axes[0] < 0 or axes[-1] > q.t:
        raise IndexError(f"variables {axes} outside 0..{q.t} (0 is X, l is Y_l)")
    return axes


def marginal(q: JointSourcePmf, vars) -> np.ndarray:
    """Marginal over ``vars`` (0 = X, l = Y_l), axes in ascending order."""
    return q.joint.marginal(_var_axes(q, vars))


def is_degraded(q: JointSourcePmf, tol: float = CI_TOL) -> bool:
    """Whether ``X - Y_t - Y_{t-1} - ... - Y_1`` is a Markov chain under ``q``.

    For every ``l`` in ``2..t`` the upstream block ``(X, Y_t, ..., Y_{l+1})``
    must be conditionally independent of ``(Y_{l-1}, ..., Y_1)`` given ``Y_l``.
    With a single decoder the chain is vacuous and the answer is ``True``.
    """
    if q.t == 1:
        return True
    J = q.joint
    for l in range(2, q.t + 1):
        up = (0,) + tuple(range(l + 1, q.t + 1))
        down = tuple(range(1, l))
        if J.cmi(up, down, (l,)) > tol:
            return False
    return True


# -- constructors -----------------------------------------------------------

def product_source(px, *y_kernels) -> JointSourcePmf:
    """``q(x, y_1..y_t) = p(x) prod_l W_l(y_l | x)`` (conditionally independent SI)."""
    px = np.asarray(px, dtype=float)
    table = px
    for W in y_kernels:
        W = np.asarray(W, dtype=float)
        table = table[..., None] * W.reshape((W.shape[0],) + (1,) * (table.ndim - 1) + (W.shape[1],))
    return JointSourcePmf.from_table(table)


def chain_source(px, kernels) -> JointSourcePmf:
    """Degraded source built as ``p(x) W_t(y_t|x) W_{t-1}(y_{t-1}|y_t) ... W_1(y_1|y_2)``.

    ``kernels`` is ordered ``[W_t, W_{t-1}, ..., W_1]``.
    """
    px = np.asarray(px, dtype=float)
    t = len(kernels)
    # build over axes (x, y_t, ..., y_1) then reverse the Y axes
    table = px
    for W in kernels:
        W = np.asarray(W, dtype=float)
        prev = table.shape[-1]
        if W.shape[0] != prev:
            raise ValidationError("chain kernel shapes do not compose")
        table = table[..., None] * W.reshape((1,) * (table.ndim - 1) + W.shape)
    order = (0,) + tuple(range(t, 0, -1))
    return JointSourcePmf.from_table(np.transpose(table, order))


def doubly_symmetric_binary(crossover: float) -> JointSourcePmf:
    """Uniform binary X observed at one decoder through a BSC(crossover)."""
    c = float(crossover)
    return product_source([0.5, 0.5], [[1 - c, c], [c, 1 - c]])


def random_source(rng, x_size, y_sizes, concentration=1.0) -> JointSourcePmf:
    sizes = (x_size,) + tuple(y_sizes)
    p = rng.dirichlet(np.full(int(np.prod(sizes)), concentration))
    return JointSourcePmf(len(y_sizes), sizes, p)


def random_chain_source(rng, x_size, y_sizes, concentration=1.0) -> JointSourcePmf:
    """Random degraded source; ``y_sizes`` ordered ``(|Y_1|, ..., |Y_t|)``."""
    px = rng.dirichlet(np.full(x_size, concentration))
    sizes = [x_size] + list(y_sizes[::-1])
    kernels = [rng.dirichlet(np.full(b, concentration), size=a) for a, b in zip(sizes[:-1], sizes[1:])]
    return chain_source(px, kernels)


# -- JSON -------------------------------------------------------------------

def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return 1


@dataclass(frozen=True, eq=False)
class SourceProblem:
    """A source together with its decoders' distortion measures and targets."""

    source: JointSourcePmf
    measures: tuple[DistortionMeasure, ...] = ()
    d: tuple[float, ...] | None = None


def parse_source_spec(text: str, origin: str = "<source>") -> SourceProblem:
    """Parse the JSON source format, raising :class:`ValidationError` with a line number."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{origin}:{exc.lineno}: invalid JSON: {exc.msg}") from exc

    def fail(key, msg):
        raise ValidationError(f"{origin}:{_line_of(text, key)}: {msg}")

    for key in ("t", "alphabets", "pmf"):
        if key not in obj:
            fail(key, f"missing required key '{key}'")
    t = obj["t"]
    if not isinstance(t, int) or t < 1:
        fail("t", f"'t' must be an integer ≥ 1, got {t!r}")
    alphabets = obj["alphabets"]
    if (not isinstance(alphabets, list) or len(alphabets) != t + 1
            or not all(isinstance(a, int) and a >= 1 for a in alphabets)):
        fail("alphabets", f"'alphabets' must list t+1 = {t + 1} integers ≥ 1")
    pmf = np.asarray(obj["pmf"], dtype=float).ravel()
    if pmf.size != int(np.prod(alphabets)):
        fail("pmf", f"'pmf' has {pmf.size} entries, expected {int(np.prod(alphabets))}")
    q = JointSourcePmf(t, tuple(alphabets), pmf)
    problems = validate_source(q)
    if problems:
        fail("pmf", "; ".join(problems))

    measures = []
    if "distortion" in obj:
        mats = obj["distortion"]
        if not isinstance(mats, list) or len(mats) != t:
            fail("distortion", f"'distortion' must hold t = {t} matrices")
        for l, mat in enumerate(mats, start=1):
            arr = np.asarray(mat, dtype=float)
            if arr.ndim != 2 or arr.shape[0] != alphabets[0]:
                fail("distortion", f"distortion matrix {l} must have |X| = {alphabets[0]} rows")
            try:
                measures.append(DistortionMeasure(l, arr))
            except ValidationError as exc:
                fail("distortion", str(exc))
    d = None
    if "d" in obj:
        try:
            d = as_distortion_vector(obj["d"], t)
        except ValidationError as exc:
            fail("d", str(exc))
    return SourceProblem(q, tuple(measures), d)


def load_source_spec(path) -> SourceProblem:
    path = Path(path)
    return parse_source_spec(path.read_text(), origin=str(path))


def source_spec_dict(problem: SourceProblem) -> dict:
    q = problem.source
    out = {"t": q.t, "alphabets": list(q.alphabet_sizes), "pmf": q.probs.tolist()}
    if problem.measures:
        out["distortion"] = [m.table.tolist() for m in problem.measures]
    if problem.d is not None:
        out["d"] = list(problem.d)
    return out
