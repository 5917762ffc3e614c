"""Auxiliary-variable systems: one auxiliary variable per decoder subset.

The auxiliaries are generated from ``X`` alone through a channel
``p(u_{S_1}, ..., u_{S_m} | x)``, so the Markov chain ``U* - X - Y*`` holds by
construction. Induced joint tables use the axis layout
``[X, Y_1, ..., Y_t, U_{S_1}, ..., U_{S_m}]`` following the list order.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._validation import ValidationError, as_distortion_vector, check_channel
from .info import Joint
from .lattice import SubsetList, canonical_list, mask_of, subset_label
from .source import DistortionMeasure, JointSourcePmf

P2_TOL = 1e-12
MARKOV_TOL = 1e-9


def induced_table(q: JointSourcePmf, channel: np.ndarray, batch_ndim: int = 0) -> np.ndarray:
    """``q(x, y*) p(u*|x)`` with optional leading batch axes on ``channel``."""
    m = channel.ndim - batch_ndim - 1
    qt = q.table.reshape((1,) * batch_ndim + q.table.shape + (1,) * m)
    ch = channel.reshape(channel.shape[:batch_ndim + 1] + (1,) * q.t + channel.shape[batch_ndim + 1:])
    return qt * ch


@dataclass(frozen=True, eq=False)
class AuxSystem:
    """Source, subset list, auxiliary alphabet sizes and generating channel."""

    source: JointSourcePmf
    v: SubsetList
    aux_sizes: tuple[int, ...]
    channel: np.ndarray = field(repr=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.aux_sizes)
        object.__setattr__(self, "aux_sizes", sizes)
        if self.v.t != self.source.t:
            raise ValidationError(f"list is for t={self.v.t}, source has t={self.source.t}")
        if len(sizes) != len(self.v):
            raise ValidationError(f"{len(sizes)} auxiliary sizes for {len(self.v)} subsets")
        if any(s < 1 for s in sizes):
            raise ValidationError("auxiliary alphabet sizes must be ≥ 1")
        channel = np.asarray(self.channel, dtype=float)
        expect = (self.source.x_size,) + sizes
        if channel.size != int(np.prod(expect)):
            raise ValidationError(f"channel has {channel.size} entries, expected shape {expect}")
        channel = check_channel(channel.reshape(expect), self.source.x_size)
        channel = np.ascontiguousarray(channel)
        channel.setflags(write=False)
        object.__setattr__(self, "channel", channel)

    # -- layout -------------------------------------------------------------
    @property
    def t(self) -> int:
        return self.source.t

    @property
    def x_axis(self) -> int:
        return 0

    def y_axis(self, l: int) -> int:
        if not 1 <= l <= self.t:
            raise IndexError(f"decoder {l} outside 1..{self.t}")
        return l

    def u_axis(self, j: int) -> int:
        return self.t + 1 + j

    def u_axes(self, positions) -> tuple[int, ...]:
        return tuple(self.u_axis(j) for j in positions)

    def position(self, subset) -> int:
        return self.v.index(subset)

    def axes_for(self, names) -> tuple[int, ...]:
        """Axis indices for names like ``"X"``, ``"Y2"``, ``"U13"`` or member tuples."""
        if isinstance(names, (str, int)) or (isinstance(names, tuple) and names
                                             and all(isinstance(n, int) for n in names)):
            names = [names]
        out = []
        for name in names:
            if isinstance(name, str):
                if name == "X":
                    out.append(self.x_axis)
                elif re.fullmatch(r"Y\d", name):
                    out.append(self.y_axis(int(name[1:])))
                elif re.fullmatch(r"U\d+", name):
                    out.append(self.u_axis(self.position(mask_of(int(c) for c in name[1:]))))
                else:
                    raise ValueError(f"unknown variable name {name!r}")
            elif isinstance(name, int):
                out.append(self.u_axis(self.position(name)))
            else:
                out.append(self.u_axis(self.position(mask_of(name))))
        return tuple(out)

    # -- derived ------------------------------------------------------------
    @cached_property
    def table(self) -> np.ndarray:
        return induce_joint(self)

    @cached_property
    def joint(self) -> Joint:
        return Joint(self.table)

    def u_marginal(self, j: int) -> np.ndarray:
        return self.joint.marginal((self.u_axis(j),))

    def is_degenerate(self, j: int) -> bool:
        return self.aux_sizes[j] == 1

    def reorder(self, v: SubsetList) -> "AuxSystem":
        """Same auxiliaries attached to the same subsets, listed in order ``v``."""
        perm = [self.v.index(m) for m in v.masks]
        channel = np.transpose(self.channel, (0,) + tuple(1 + p for p in perm))
        return AuxSystem(self.source, v, tuple(self.aux_sizes[p] for p in perm), channel)

    def with_channel(self, channel) -> "AuxSystem":
        return AuxSystem(self.source, self.v, self.aux_sizes, channel)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def degenerate(cls, source: JointSourcePmf, v: SubsetList | None = None) -> "AuxSystem":
        v = v or canonical_list(source.t)
        return cls(source, v, (1,) * len(v), np.ones((source.x_size,) + (1,) * len(v)))

    @classmethod
    def from_kernels(cls, source: JointSourcePmf, v: SubsetList | None, kernels: dict) -> "AuxSystem":
        """Auxiliaries conditionally independent given X.

        ``kernels`` maps a subset (members tuple, mask or ``"U12"``-style
        label) to a ``|X| x |U_S|`` stochastic matrix; others are degenerate.
        """
        v = v or canonical_list(source.t)
        mats = [np.ones((source.x_size, 1))] * len(v)
        for key, W in kernels.items():
            if isinstance(key, str):
                key = mask_of(int(c) for c in key.lstrip("U"))
            j = v.index(key)
            mats[j] = np.asarray(W, dtype=float)
        channel = np.ones((source.x_size,))
        for W in mats:
            channel = channel[..., None] * W.reshape((source.x_size,) + (1,) * (channel.ndim - 1) + (W.shape[1],))
        return cls(source, v, tuple(W.shape[1] for W in mats), channel)

    @classmethod
    def random(cls, rng, source: JointSourcePmf, v: SubsetList | None = None,
               aux_sizes=None, concentration=1.0) -> "AuxSystem":
        v = v or canonical_list(source.t)
        if aux_sizes is None:
            aux_sizes = (source.x_size,) * len(v)
        cells = int(np.prod(aux_sizes))
        channel = rng.dirichlet(np.full(cells, concentration), size=source.x_size)
        return cls(source, v, tuple(aux_sizes), channel.reshape((source.x_size,) + tuple(aux_sizes)))


def induce_joint(sys: AuxSystem) -> np.ndarray:
    """Full joint table over ``(X, Y*, U*)``; P1 holds structurally."""
    return induced_table(sys.source, sys.channel)


# -- reconstruction (P2) ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReconstructionFunction:
    """Table of reconstruction letters indexed by the decoder's observations."""

    l: int
    domain_axes: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    def apply(self, *columns) -> np.ndarray:
        """Map per-letter observations (one array per domain axis) to xhat."""
        if len(columns) != len(self.domain_axes):
            raise ValueError(f"expected {len(self.domain_axes)} observation arrays")
        if not columns:
            return np.asarray(self.table).reshape(())
        return self.table[tuple(np.asarray(c) for c in columns)]


def decoder_domain(sys_or_layout, l: int) -> tuple[int, ...]:
    """Observation axes ``(Y_l, U_{l}, A^sup_{l})`` for decoder ``l``, ascending."""
    v, t = sys_or_layout.v, sys_or_layout.t
    j = v.index(mask_of([l]))
    positions = (j,) + v.sets.superset[j]
    return tuple(sorted((l,) + tuple(t + 1 + p for p in positions)))


def _expected_costs(joint: Joint, domain: tuple[int, ...], measure: DistortionMeasure) -> np.ndarray:
    # cost[..., tau, xhat] = sum_x p(tau, x) delta(x, xhat)
    axes = tuple(sorted((0,) + domain))
    m = joint.marginal(axes)
    b = joint.batch_ndim
    m = np.moveaxis(m, b, -1)  # X axis is axis 0 of the variables; move it last
    return m @ measure.table


def optimal_reconstruction(sys: AuxSystem, l: int, measure: DistortionMeasure):
    """Pointwise-argmin reconstruction for decoder ``l`` and its expected distortion.

    Ties go to the smallest reconstruction index; observation tuples of zero
    probability map to index 0.
    """
    if measure.table.shape[0] != sys.source.x_size:
        raise ValidationError(f"distortion for decoder {l} has wrong number of rows")
    domain = decoder_domain(sys, l)
    cost = _expected_costs(sys.joint, domain, measure)
    table = np.argmin(cost, axis=-1)
    achieved = float(np.take_along_axis(cost, table[..., None], axis=-1).sum())
    return ReconstructionFunction(l, domain, table), achieved


def achieved_distortions(joint: Joint, layout, measures) -> np.ndarray:
    """Per-decoder optimal expected distortions, shape ``batch + (t,)``."""
    out = []
    for l in range(1, layout.t + 1):
        cost = _expected_costs(joint, decoder_domain(layout, l), measures[l - 1])
        red = tuple(range(joint.batch_ndim, cost.ndim - 1))
        out.append(cost.min(axis=-1).sum(axis=red) if red else cost.min(axis=-1))
    return np.stack(out, axis=-1)


@dataclass(frozen=True)
class P2Report:
    achieved: tuple[float, ...]
    targets: tuple[float, ...]
    passed: bool


def check_P2(sys: AuxSystem, d, measures, tol: float = P2_TOL) -> P2Report:
    d = as_distortion_vector(d, sys.t)
    if len(measures) != sys.t:
        raise ValidationError(f"need {sys.t} distortion measures, got {len(measures)}")
    achieved = tuple(optimal_reconstruction(sys, l, measures[l - 1])[1] for l in range(1, sys.t + 1))
    return P2Report(achieved, d, all(a <= dl + tol for a, dl in zip(achieved, d)))


# -- extra Markov constraints ----------------------------------------------

def markov_gap(sys: AuxSystem, chain) -> float:
    """I(A; C | B) for the chain ``A - B - C`` given as three name groups."""
    A, B, C = (sys.axes_for(g) for g in chain)
    if set(A) & set(B) or set(A) & set(C) or set(B) & set(C):
        raise ValueError("Markov chain groups overlap")
    return sys.joint.cmi(A, C, B)


def check_markov_constraint(sys: AuxSystem, chain, tol: float = MARKOV_TOL) -> bool:
    return markov_gap(sys, chain) <= tol


#: The two extra chains that carve ``P*`` out of ``P`` at three decoders.
P_STAR_CHAINS = (
    (("U13",), ("X", "U123"), ("U12",)),
    (("U23",), ("X", "U123"), ("U12", "U13")),
)


def in_p_star(sys: AuxSystem, tol: float = MARKOV_TOL) -> bool:
    if sys.t != 3:
        raise ValueError("the P* restriction is defined for t = 3")
    return all(check_markov_constraint(sys, c, tol) for c in P_STAR_CHAINS)


# -- the counterexample -------------------------------------------------------

def example3_source() -> JointSourcePmf:
    return JointSourcePmf(3, (3, 1, 1, 1), np.full(3, 1 / 3))


def example3_measures() -> tuple[DistortionMeasure, ...]:
    return tuple(DistortionMeasure.hamming(l, 3) for l in (1, 2, 3))


def example3_instance() -> AuxSystem:
    """Ternary X, trivial side information, pairwise auxiliaries built mod 3.

    With C uniform and independent of X: ``U12 = C``, ``U13 = X + C`` and
    ``U23 = X + 2C``; the remaining auxiliaries are constant.
    """
    q = example3_source()
    v = canonical_list(3)
    sizes = [1] * 7
    for m in (0b011, 0b101, 0b110):
        sizes[v.index(m)] = 3
    j12, j13, j23 = v.index(0b011), v.index(0b101), v.index(0b110)
    channel = np.zeros((3,) + tuple(sizes))
    for x in range(3):
        for c in range(3):
            idx = [x] + [0] * 7
            idx[1 + j12] = c
            idx[1 + j13] = (x + c) % 3
            idx[1 + j23] = (x + 2 * c) % 3
            channel[tuple(idx)] += 1 / 3
    return AuxSystem(q, v, tuple(sizes), channel)


# -- JSON -------------------------------------------------------------------

def aux_spec_dict(sys: AuxSystem) -> dict:
    return {"v": sys.v.as_lists(), "aux_sizes": list(sys.aux_sizes),
            "channel": sys.channel.ravel().tolist()}


def parse_aux_spec(text: str, source: JointSourcePmf, origin: str = "<aux>") -> AuxSystem:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{origin}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    from .source import _line_of
    for key in ("v", "aux_sizes", "channel"):
        if key not in obj:
            raise ValidationError(f"{origin}:{_line_of(text, key)}: missing required key '{key}'")
    try:
        v = SubsetList.from_members(source.t, obj["v"])
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"{origin}:{_line_of(text, 'v')}: {exc}") from exc
    try:
        return AuxSystem(source, v, tuple(obj["aux_sizes"]), np.asarray(obj["channel"], dtype=float))
    except ValidationError as exc:
        raise ValidationError(f"{origin}:{_line_of(text, 'channel')}: {exc}") from exc


def load_aux_spec(path, source: JointSourcePmf) -> AuxSystem:
    path = Path(path)
    return parse_aux_spec(path.read_text(), source, origin=str(path))


def describe(sys: AuxSystem) -> list[str]:
    return [f"{subset_label(m)}: |U| = {s}" for m, s in zip(sys.v.masks, sys.aux_sizes)]
