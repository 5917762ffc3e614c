"""Shannon quantities (base 2) on joint pmf tables.

A joint pmf is an ndarray with one axis per random variable. Variable groups
are tuples of axis indices. The :class:`Joint` wrapper caches marginal
entropies so that families of mutual-information terms over the same table
share one accumulation, and it accepts leading batch axes so the same code
evaluates a whole grid of distributions at once.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

#: Magnitude below which a computed information quantity is snapped to zero.
CLAMP = 1e-12


def _plogp(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def _as_axes(group: Iterable[int] | int | None) -> tuple[int, ...]:
    if group is None:
        return ()
    if isinstance(group, (int, np.integer)):
        return (int(group),)
    return tuple(int(a) for a in group)


class Joint:
    """Joint pmf table with cached marginal entropies.

    Parameters
    ----------
    table : ndarray
        Probability table. The first ``batch_ndim`` axes index independent
        distributions; the remaining axes are random variables.
    batch_ndim : int
        Number of leading batch axes.
    """

    def __init__(self, table, batch_ndim: int = 0):
        self.table = np.asarray(table, dtype=float)
        self.batch_ndim = int(batch_ndim)
        self.nvars = self.table.ndim - self.batch_ndim
        self._cache: dict[frozenset, np.ndarray] = {}

    @property
    def shape(self) -> tuple[int, ...]:
        return self.table.shape[self.batch_ndim:]

    def _check(self, axes: Sequence[int]) -> None:
        for a in axes:
            if not 0 <= a < self.nvars:
                raise IndexError(f"variable axis {a} out of range for {self.nvars} variables")
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated variable axes in {tuple(axes)}")

    def marginal(self, axes: Sequence[int]) -> np.ndarray:
        """Marginal table over ``axes`` (kept in ascending axis order)."""
        axes = sorted(_as_axes(axes))
        self._check(axes)
        drop = tuple(self.batch_ndim + a for a in range(self.nvars) if a not in axes)
        return self.table.sum(axis=drop) if drop else self.table

    def H(self, axes) -> np.ndarray | float:
        """Joint entropy of the variables in ``axes``; ``H(()) == 0``."""
        axes = frozenset(_as_axes(axes))
        # size-1 axes carry no information; dropping them improves cache hits
        axes = frozenset(a for a in axes if self.shape[a] > 1)
        if not axes:
            return np.zeros(self.table.shape[:self.batch_ndim]) if self.batch_ndim else 0.0
        hit = self._cache.get(axes)
        if hit is None:
            m = self.marginal(sorted(axes))
            red = tuple(range(self.batch_ndim, m.ndim))
            hit = -_plogp(m).sum(axis=red)
            if self.batch_ndim == 0:
                hit = float(hit)
            self._cache[axes] = hit
        return hit

    def cond_entropy(self, A, C=()) -> np.ndarray | float:
        A, C = _as_axes(A), _as_axes(C)
        return self.H(A + C) - self.H(C)

    def cmi(self, A, B, C=()) -> np.ndarray | float:
        """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), tiny values clamped."""
        A, B, C = _as_axes(A), _as_axes(B), _as_axes(C)
        if not A or not B:
            raise ValueError("mutual information needs nonempty A and B")
        if set(A) & set(B) or set(A) & set(C) or set(B) & set(C):
            raise ValueError(f"variable groups overlap: A={A}, B={B}, C={C}")
        val = self.H(A + C) + self.H(B + C) - self.H(A + B + C) - self.H(C)
        return _clamp(val)

    def mi(self, A, B) -> np.ndarray | float:
        return self.cmi(A, B, ())


def _clamp(val):
    if np.ndim(val) == 0:
        return 0.0 if abs(val) < CLAMP else float(val)
    val = np.array(val, dtype=float)
    val[np.abs(val) < CLAMP] = 0.0
    return val


def entropy(p, A) -> float:
    """Entropy in bits of the variable group ``A`` under joint table ``p``."""
    A = _as_axes(A)
    if not A:
        raise ValueError("entropy needs a nonempty variable set")
    return Joint(p).H(A)


def conditional_entropy(p, A, C=()) -> float:
    A = _as_axes(A)
    if not A:
        raise ValueError("entropy needs a nonempty variable set")
    return Joint(p).cond_entropy(A, C)


def mutual_information(p, A, B) -> float:
    return Joint(p).mi(A, B)


def conditional_mutual_information(p, A, B, C=()) -> float:
    """I(A;B|C) in bits for disjoint axis groups of the joint table ``p``."""
    return Joint(p).cmi(A, B, C)


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument {x} outside [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))
