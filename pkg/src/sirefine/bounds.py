"""Rate functionals and prefix-sum rate regions evaluated at a fixed system.

Every evaluator has a private form taking a :class:`~sirefine.info.Joint`
plus a layout (anything with ``v`` and ``t``) so the optimizer can evaluate
batches of channels through exactly the same code.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import reduce

import numpy as np

from ._validation import InfeasibleError, ValidationError, as_distortion_vector
from .aux import AuxSystem, _expected_costs, check_P2
from .info import Joint
from .lattice import full_mask, members_of, subset_label
from .source import JointSourcePmf, is_degraded

DEGRADED_TOL = 1e-9


@dataclass(frozen=True)
class RateRegion:
    """``{r >= 0 : r_1 + ... + r_l >= c_l for every l}``."""

    t: int
    prefix_bounds: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.prefix_bounds)
        if len(c) != self.t:
            raise ValueError(f"{len(c)} prefix bounds for t = {self.t}")
        object.__setattr__(self, "prefix_bounds", c)

    def contains(self, r, tol: float = 0.0) -> bool:
        r = np.asarray(r, dtype=float)
        if r.shape != (self.t,):
            raise ValueError(f"rate tuple must have length {self.t}")
        if np.any(r < -tol):
            return False
        return bool(np.all(np.cumsum(r) >= np.asarray(self.prefix_bounds) - tol))

    __contains__ = contains

    def corner(self) -> tuple[float, ...]:
        """Incremental rates meeting every prefix bound with equality where possible."""
        c = np.maximum.accumulate(np.maximum(self.prefix_bounds, 0.0))
        return tuple(np.diff(np.concatenate([[0.0], c])).tolist())


def latent_region_contains(r, r_tilde) -> bool:
    """Whether ``r_tilde`` is reachable from ``r`` by moving rate to lower-index channels."""
    r, rt = np.asarray(r, dtype=float), np.asarray(r_tilde, dtype=float)
    if r.shape != rt.shape or r.ndim != 1:
        raise ValueError("rate tuples must be 1-D and of equal length")
    if np.any(r < 0) or np.any(rt < 0):
        raise ValueError("rate tuples must be nonnegative")
    return bool(np.all(np.cumsum(rt) >= np.cumsum(r)))


# -- shared term machinery ------------------------------------------------

def _u(layout, positions):
    return tuple(layout.t + 1 + p for p in positions)


def _phi(J: Joint, layout, j: int, l: int):
    v, t = layout.v, layout.t
    meet = [m for m in members_of(v.masks[j]) if m <= l]
    if not meet:
        raise ValueError(f"subset {subset_label(v.masks[j])} does not meet [1, {l}]")
    sets = v.sets
    Uj = (t + 1 + j,)
    sup = _u(layout, sets.superset[j])
    enc = J.cmi((0,) + _u(layout, sets.dagger[j]), Uj, sup)
    gains = [J.cmi(Uj, _u(layout, sets.ddagger[j][m]) + (m,), sup) for m in meet]
    return enc - reduce(np.minimum, gains)


def _inner_bounds(J: Joint, layout):
    v, t = layout.v, layout.t
    out = []
    for l in range(1, t + 1):
        low = (1 << l) - 1
        terms = [_phi(J, layout, j, l) for j, S in enumerate(v.masks) if S & low]
        out.append(sum(terms))
    return out


def _thm2(J: Joint, layout):
    return sum(_phi(J, layout, j, layout.t) for j in range(len(layout.v)))


def _hb_terms(J: Joint, layout):
    v, t = layout.v, layout.t
    out = []
    for j, S in enumerate(v.masks):
        sup = _u(layout, v.sets.superset[j])
        vals = [J.cmi((0,), (t + 1 + j,), sup + (l,)) for l in members_of(S)]
        out.append(reduce(np.maximum, vals))
    return out


def _hb_r0(J: Joint, layout):
    return sum(_hb_terms(J, layout))


def _require_p2(sys, d, measures):
    if d is None:
        return
    if measures is None:
        raise ValueError("distortion measures are required with a distortion target")
    rep = check_P2(sys, d, measures)
    if not rep.passed:
        raise InfeasibleError(f"system fails P2 at d = {rep.targets}: achieved {rep.achieved}")


# -- public evaluators ------------------------------------------------------

def phi(sys: AuxSystem, j: int, l: int) -> float:
    """Rate charge of list position ``j`` (0-based) for the first ``l`` decoders."""
    return float(_phi(sys.joint, sys, j, l))


def phi_table(sys: AuxSystem) -> dict[str, dict[int, float]]:
    out = {}
    for j, S in enumerate(sys.v.masks):
        first = members_of(S)[0]
        out[subset_label(S)] = {l: phi(sys, j, l) for l in range(first, sys.t + 1)}
    return out


def inner_region(sys: AuxSystem, d=None, measures=None) -> RateRegion:
    """Prefix bounds ``c_l = sum over S_j meeting [l] of phi(S_j, l)``.

    When ``d`` is given the system must satisfy P2 there.
    """
    _require_p2(sys, d, measures)
    return RateRegion(sys.t, tuple(float(c) for c in _inner_bounds(sys.joint, sys)))


def hb_r0(sys: AuxSystem, d=None, measures=None, require_p_star: bool = False) -> float:
    """Heegard-Berger integrand at this system.

    ``require_p_star`` additionally gates on the two three-decoder Markov
    chains that restore the upper-bound property.
    """
    _require_p2(sys, d, measures)
    if require_p_star:
        from .aux import in_p_star
        if not in_p_star(sys):
            raise InfeasibleError("system violates the extra Markov chains of P*")
    return max(float(_hb_r0(sys.joint, sys)), 0.0)


def hb_terms(sys: AuxSystem) -> dict[str, float]:
    return {subset_label(S): float(x) for S, x in zip(sys.v.masks, _hb_terms(sys.joint, sys))}


def thm2_value(sys: AuxSystem) -> float:
    """Corrected single-channel upper-bound integrand, ``sum_j phi(S_j, t)``."""
    return float(_thm2(sys.joint, sys))


def _chain_positions(sys: AuxSystem) -> list[int]:
    t = sys.t
    chain = [full_mask(t) & ~((1 << (l - 1)) - 1) for l in range(1, t + 1)]
    for j, S in enumerate(sys.v.masks):
        if S not in chain and not sys.is_degenerate(j):
            raise ValidationError(f"auxiliary {subset_label(S)} is off the degraded chain "
                                  "but not degenerate")
    return [sys.v.index(m) for m in chain]


def _chain_terms(sys: AuxSystem) -> list[float]:
    pos = _chain_positions(sys)
    J = sys.joint
    out = []
    for l in range(1, sys.t + 1):
        given = (l,) + sys.u_axes(pos[:l - 1])
        out.append(float(J.cmi((0,), (sys.u_axis(pos[l - 1]),), given)))
    return out


def degraded_rd_value(sys: AuxSystem) -> float:
    """``sum_l I(X; U_[l,t] | Y_l, U_[1,t], ..., U_[l-1,t])``; chain-only systems."""
    return float(sum(_chain_terms(sys)))


def _restricted_p2(sys, d, measures, domains):
    if d is None:
        return
    d = as_distortion_vector(d, sys.t)
    for l, dom in enumerate(domains, start=1):
        cost = _expected_costs(sys.joint, tuple(sorted(dom)), measures[l - 1])
        got = float(cost.min(axis=-1).sum())
        if got > d[l - 1] + 1e-12:
            raise InfeasibleError(f"decoder {l} reaches distortion {got:.6g} > {d[l - 1]:.6g} "
                                  "with its restricted observations")


def td_degraded_region(sys: AuxSystem, d=None, measures=None) -> RateRegion:
    """Per-decoder auxiliaries ``U_k = U_[k,t]`` with reconstructions from ``(U_l, Y_l)``."""
    pos = _chain_positions(sys)
    _restricted_p2(sys, d, measures, [(l, sys.u_axis(pos[l - 1])) for l in range(1, sys.t + 1)])
    return RateRegion(sys.t, tuple(np.cumsum(_chain_terms(sys)).tolist()))


def scalable_region(sys: AuxSystem, d=None, measures=None) -> RateRegion:
    """Two-decoder region for side information with ``X - Y_1 - Y_2``."""
    if sys.t != 2:
        raise ValueError("the scalable region is defined for t = 2")
    u12, u1, u2 = sys.axes_for(["U12", "U1", "U2"])
    _restricted_p2(sys, d, measures, [(1, u1), (2, u2)])
    J = sys.joint
    c1 = J.cmi((0,), (u1, u12), (1,))
    c2 = J.cmi((0,), (u2, u12), (2,)) + J.cmi((0,), (u1,), (1, u12))
    return RateRegion(2, (c1, c2))


def lossless_region(q: JointSourcePmf, w_sizes) -> RateRegion:
    """Private-message lossless region with ``X = (W_1, ..., W_t)`` row-major.

    The formula is exact for degraded side information; otherwise a warning is
    issued and the same prefix sums are returned.
    """
    w_sizes = tuple(int(w) for w in w_sizes)
    t = q.t
    if len(w_sizes) != t or int(np.prod(w_sizes)) != q.x_size:
        raise ValidationError(f"W alphabet sizes {w_sizes} do not factor |X| = {q.x_size} into t parts")
    if not is_degraded(q, DEGRADED_TOL):
        warnings.warn("side information is not degraded; the lossless region is only an inner bound",
                      RuntimeWarning, stacklevel=2)
    J = Joint(q.table.reshape(w_sizes + q.alphabet_sizes[1:]))
    # axes: W_k -> k-1, Y_k -> t+k-1
    terms = [J.cond_entropy((k - 1,), tuple(range(k - 1)) + (t + k - 1,)) for k in range(1, t + 1)]
    return RateRegion(t, tuple(np.cumsum(terms).tolist()))


def lossless_rate(q: JointSourcePmf, w_sizes) -> float:
    """Single-channel lossless rate, the last prefix bound of :func:`lossless_region`."""
    return lossless_region(q, w_sizes).prefix_bounds[-1]


def slepian_wolf_rate(q: JointSourcePmf, measures=None) -> float:
    """``max_l H(X | Y_l)``, the all-zero-distortion rate under error-indicator measures."""
    if measures is not None:
        for m in measures:
            if not m.is_error_indicator() or m.recon_size != q.x_size:
                raise ValidationError(f"distortion for decoder {m.l} is not an error indicator on X")
    J = q.joint
    return max(J.cond_entropy((0,), (l,)) for l in range(1, q.t + 1))
