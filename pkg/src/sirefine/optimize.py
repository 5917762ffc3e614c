"""Searches over auxiliary channels for the upper-bound and inner-bound functionals.

Two engines are available. ``grid`` enumerates every channel whose rows lie on
a quantized simplex and is exhaustive (feasible only for tiny state counts).
``descent`` runs multi-restart projected descent on the product of simplices
with finite-difference gradients, falling back to pairwise mass transfers
when the gradient step stalls. Distortion constraints enter the descent
objective through an exact-penalty term, and every endpoint is repaired to be
strictly feasible before it is reported.

Values returned by the descent engine are upper bounds on the minimum of the
functional; no global optimality is claimed.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import InfeasibleError, ValidationError, as_distortion_vector
from .aux import AuxSystem, P2_TOL, achieved_distortions, check_P2, induced_table
from .bounds import _hb_r0, _inner_bounds, _thm2
from .info import Joint
from .lattice import SubsetList, canonical_list, enumerate_lists, full_mask, mask_of, MAX_ENUM_T
from .source import JointSourcePmf

log = logging.getLogger(__name__)

CELL_BUDGET = 4_000_000


@dataclass
class SearchConfig:
    """Knobs shared by both engines. ``aux_sizes`` maps subset labels to sizes."""

    aux_sizes: dict | list | None = None
    engine: str = "descent"
    grid_step: float = 1 / 16
    grid_max_points: int = 6_000_000
    restarts: int = 8
    step_size: float = 0.5
    shrink: float = 0.5
    max_iter: int = 300
    seed: int = 0
    tol: float = 1e-10
    fd_eps: float = 1e-7
    max_pairs: int = 256
    random_dirs: int = 64
    lists: str = "all"
    chain_only: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.engine not in ("descent", "grid"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.step_size <= 0 or self.grid_step <= 0:
            raise ValueError("step sizes must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be ≥ 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")

    @classmethod
    def from_dict(cls, obj: dict) -> "SearchConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"unknown search config keys: {sorted(extra)}")
        return cls(**obj)


@dataclass(frozen=True)
class _Layout:
    v: SubsetList
    t: int


def default_aux_sizes(t: int, x_size: int, chain_only: bool = False) -> dict[int, int]:
    """Auxiliary alphabet sizes keyed by subset mask.

    Uses the cardinality bounds stated for one decoder, for two decoders and
    for chain-only systems; every other subset gets ``|X|``.
    """
    masks = range(1, 1 << t)
    if chain_only:
        chain = [full_mask(t) & ~((1 << (l - 1)) - 1) for l in range(1, t + 1)]
        sizes = {m: 1 for m in masks}
        prod = 1
        for l, m in enumerate(chain, start=1):
            bound = x_size * prod - 1 + t - l + (t - l + 1) * (t - l + 2) // 2
            sizes[m] = bound
            prod *= bound
        return sizes
    if t == 1:
        return {1: x_size + 1}
    if t == 2:
        u12 = x_size + 5
        return {0b11: u12, 0b01: x_size * u12 + 1, 0b10: x_size * u12 + 1}
    return {m: x_size for m in masks}


def _normalize_sizes(spec, t: int, x_size: int, chain_only: bool) -> dict[int, int]:
    if spec is None:
        return default_aux_sizes(t, x_size, chain_only)
    if isinstance(spec, dict):
        out = {m: 1 for m in range(1, 1 << t)}
        for key, size in spec.items():
            if isinstance(key, str):
                key = mask_of(int(c) for c in key.lstrip("U"))
            elif not isinstance(key, int):
                key = mask_of(key)
            out[int(key)] = int(size)
        return out
    spec = list(spec)
    base = canonical_list(t)
    if len(spec) != len(base):
        raise ValidationError(f"aux_sizes list needs {len(base)} entries (canonical order)")
    return {m: int(s) for m, s in zip(base.masks, spec)}


def _penalty_weight(measures, x_size: int) -> float:
    gaps = []
    for m in measures:
        tab = m.table
        diffs = np.abs(tab[:, :, None] - tab[:, None, :]).ravel()
        gaps.extend(diffs[diffs > 0].tolist())
    if not gaps or x_size < 2:
        return 0.0
    return 10.0 * math.log2(x_size) / min(gaps)


class _Problem:
    """Objective evaluation for batches of channels ``(B, |X|, K)``."""

    def __init__(self, q, measures, d, v, sizes, objective, weights=None):
        self.q, self.measures, self.d = q, tuple(measures), np.asarray(d, dtype=float)
        self.layout = _Layout(v, q.t)
        self.v = v
        self.aux_sizes = tuple(sizes[m] for m in v.masks)
        self.K = int(np.prod(self.aux_sizes))
        self.objective = objective
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.M = _penalty_weight(measures, q.x_size)
        self.cells = int(np.prod(q.alphabet_sizes)) * self.K
        self.n_evals = 0

    def _chunks(self, B):
        step = max(1, CELL_BUDGET // max(self.cells, 1))
        for s in range(0, B, step):
            yield slice(s, min(B, s + step))

    def evaluate(self, flat: np.ndarray):
        """Return (functional values, per-decoder distortions) for a batch."""
        flat = np.asarray(flat, dtype=float)
        B = flat.shape[0]
        vals = np.empty(B)
        dist = np.empty((B, self.q.t))
        shape = (self.q.x_size,) + self.aux_sizes
        for sl in self._chunks(B):
            ch = flat[sl].reshape((-1,) + shape)
            J = Joint(induced_table(self.q, ch, batch_ndim=1), batch_ndim=1)
            vals[sl] = self._functional(J)
            dist[sl] = achieved_distortions(J, self.layout, self.measures)
        self.n_evals += B
        return vals, dist

    def _functional(self, J):
        if self.objective == "thm2":
            return _thm2(J, self.layout)
        if self.objective == "r0":
            return _hb_r0(J, self.layout)
        bounds = _inner_bounds(J, self.layout)
        return sum(w * c for w, c in zip(self.weights, bounds))

    def penalized(self, flat):
        vals, dist = self.evaluate(flat)
        over = np.maximum(dist - self.d, 0.0).sum(axis=1)
        return vals + self.M * over, vals, dist

    def feasible(self, dist):
        return np.all(dist <= self.d + P2_TOL, axis=-1)

    def system(self, flat) -> AuxSystem:
        return AuxSystem(self.q, self.v, self.aux_sizes,
                         np.asarray(flat).reshape((self.q.x_size,) + self.aux_sizes))

    # -- structured starting points ---------------------------------------
    def constant_channel(self):
        ch = np.zeros((self.q.x_size, self.K))
        ch[:, 0] = 1.0
        return ch

    def copy_channel(self):
        """Full-set auxiliary copies X; every decoder then reconstructs exactly."""
        j = self.v.index(full_mask(self.q.t))
        if self.aux_sizes[j] < self.q.x_size:
            return None
        ch = np.zeros((self.q.x_size,) + self.aux_sizes)
        for x in range(self.q.x_size):
            idx = [x] + [0] * len(self.aux_sizes)
            idx[1 + j] = x
            ch[tuple(idx)] = 1.0
        return ch.reshape(self.q.x_size, self.K)


def _project(rows: np.ndarray) -> np.ndarray:
    """Clip to the nonnegative orthant and renormalize each row."""
    rows = np.clip(rows, 0.0, None)
    s = rows.sum(axis=-1, keepdims=True)
    bad = s[..., 0] <= 0
    if np.any(bad):
        rows[bad] = 1.0
        s = rows.sum(axis=-1, keepdims=True)
    return rows / s


def _descend(prob: _Problem, start: np.ndarray, cfg: SearchConfig, rng) -> np.ndarray:
    """Projected descent from ``start`` (shape ``(|X|, K)``); never accepts an uphill move."""
    X, K = start.shape
    p = _project(start.copy())
    f = prob.penalized(p[None].reshape(1, -1))[0][0]
    eta = cfg.step_size
    pairs = [(a, b) for a in range(K) for b in range(K) if a != b]
    for it in range(cfg.max_iter):
        # finite-difference gradient of the smooth extension
        eye = np.eye(X * K) * cfg.fd_eps
        pert = p.reshape(1, -1) + eye
        fp = prob.penalized(pert)[0]
        g = ((fp - f) / cfg.fd_eps).reshape(X, K)
        g -= g.mean(axis=1, keepdims=True)
        steps = eta * cfg.shrink ** np.arange(6)
        cands = _project(p[None] - steps[:, None, None] * g[None])
        fc = prob.penalized(cands.reshape(len(steps), -1))[0]
        k = int(np.argmin(fc))
        if fc[k] < f - cfg.tol:
            p, f = cands[k], fc[k]
            eta = min(steps[k] / cfg.shrink, 4.0)
            continue
        # pairwise mass transfers within one row
        if X * len(pairs) > cfg.max_pairs:
            idx = rng.choice(X * len(pairs), size=cfg.max_pairs, replace=False)
            moves = [(i // len(pairs), pairs[i % len(pairs)]) for i in sorted(idx)]
        else:
            moves = [(x, pr) for x in range(X) for pr in pairs]
        if not moves:
            break
        cands = np.repeat(p[None], len(moves), axis=0)
        for c, (x, (a, b)) in enumerate(moves):
            delta = min(eta, p[x, a])
            cands[c, x, a] -= delta
            cands[c, x, b] += delta
        fc = prob.penalized(cands.reshape(len(moves), -1))[0]
        k = int(np.argmin(fc))
        if fc[k] < f - cfg.tol:
            p, f = cands[k], fc[k]
            continue
        # random tangent directions get along ridges where the penalty kinks
        dirs = rng.normal(size=(cfg.random_dirs, X, K))
        dirs -= dirs.mean(axis=2, keepdims=True)
        dirs /= np.abs(dirs).max(axis=(1, 2), keepdims=True)
        cands = _project(p[None] + eta * dirs)
        fc = prob.penalized(cands.reshape(cfg.random_dirs, -1))[0]
        k = int(np.argmin(fc))
        if fc[k] < f - cfg.tol:
            p, f = cands[k], fc[k]
            continue
        eta *= cfg.shrink
        if eta < 1e-9:
            break
    return p


def _repair(prob: _Problem, p: np.ndarray, anchor) -> np.ndarray | None:
    """Mix ``p`` toward a feasible anchor until P2 holds; None if impossible."""
    _, dist = prob.evaluate(p.reshape(1, -1))
    if prob.feasible(dist[0]):
        return p
    if anchor is None:
        return None
    lams = np.linspace(0.0, 1.0, 65)
    mix = (1 - lams)[:, None, None] * p[None] + lams[:, None, None] * anchor[None]
    _, dist = prob.evaluate(mix.reshape(len(lams), -1))
    ok = np.flatnonzero(prob.feasible(dist))
    if ok.size == 0:
        return None
    hi = lams[ok[0]]
    lo = lams[ok[0] - 1] if ok[0] > 0 else 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        cand = (1 - mid) * p + mid * anchor
        if prob.feasible(prob.evaluate(cand.reshape(1, -1))[1][0]):
            hi = mid
        else:
            lo = mid
    return (1 - hi) * p + hi * anchor


def _run_restart(prob, start, cfg, seed_seq):
    rng = np.random.default_rng(seed_seq)
    if start is None:
        start = rng.dirichlet(np.ones(prob.K), size=prob.q.x_size)
    end = _descend(prob, start, cfg, rng)
    anchor = prob.copy_channel()
    fixed = _repair(prob, end, anchor)
    if fixed is None:
        return None, math.inf
    val = float(prob.evaluate(fixed.reshape(1, -1))[0][0])
    return fixed, val


def _grid_rows(K: int, N: int) -> np.ndarray:
    """All points of the K-simplex with coordinates in multiples of 1/N."""
    rows = []
    for bars in itertools.combinations(range(N + K - 1), K - 1):
        parts = np.diff((-1,) + bars + (N + K - 1,)) - 1
        rows.append(parts)
    return np.asarray(rows, dtype=float) / N


def grid_size(K: int, X: int, step: float) -> int:
    N = int(round(1 / step))
    return math.comb(N + K - 1, K - 1) ** X


def _grid_search(prob: _Problem, cfg: SearchConfig):
    N = int(round(1 / cfg.grid_step))
    X, K = prob.q.x_size, prob.K
    total = grid_size(K, X, cfg.grid_step)
    if total > cfg.grid_max_points:
        raise ValidationError(f"grid has {total} points, above the limit {cfg.grid_max_points}; "
                              "use a coarser step or the descent engine")
    rows = _grid_rows(K, N)
    R = len(rows)
    best_val, best = math.inf, None
    chunk = max(1, CELL_BUDGET // max(prob.cells, 1))
    for s in range(0, total, chunk):
        idx = np.arange(s, min(total, s + chunk))
        digits = np.unravel_index(idx, (R,) * X)
        flat = np.concatenate([rows[dg] for dg in digits], axis=1)
        vals, dist = prob.evaluate(flat)
        vals = np.where(prob.feasible(dist), vals, np.inf)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best = float(vals[k]), flat[k].reshape(X, K)
    return best, best_val


class _ChannelSearch(BaseEstimator):
    """Shared fit logic; subclasses fix the functional."""

    _objective = "thm2"

    def __init__(self, v=None, aux_sizes=None, engine="descent", grid_step=1 / 16,
                 grid_max_points=6_000_000, restarts=8, step_size=0.5, shrink=0.5,
                 max_iter=300, seed=0, tol=1e-10, fd_eps=1e-7, max_pairs=256,
                 random_dirs=64, lists="all", chain_only=False, n_jobs=1):
        self.v = v
        self.aux_sizes = aux_sizes
        self.engine = engine
        self.grid_step = grid_step
        self.grid_max_points = grid_max_points
        self.restarts = restarts
        self.step_size = step_size
        self.shrink = shrink
        self.max_iter = max_iter
        self.seed = seed
        self.tol = tol
        self.fd_eps = fd_eps
        self.max_pairs = max_pairs
        self.random_dirs = random_dirs
        self.lists = lists
        self.chain_only = chain_only
        self.n_jobs = n_jobs

    def _config(self) -> SearchConfig:
        params = self.get_params()
        params.pop("v")
        params = {k: params[k] for k in SearchConfig.__dataclass_fields__}
        return SearchConfig(**params)

    def _candidate_lists(self, t):
        if self.v is not None:
            v = self.v
            return [v if isinstance(v, SubsetList) else SubsetList.from_members(t, v)]
        if self._objective == "r0" or self.lists == "canonical" or t > MAX_ENUM_T:
            return [canonical_list(t)]
        return enumerate_lists(t)

    def _weights(self, t):
        return None

    def _search(self, q, d, measures, init, weights):
        cfg = self._config()
        sizes = _normalize_sizes(cfg.aux_sizes, q.t, q.x_size, cfg.chain_only)
        results = []
        for v in self._candidate_lists(q.t):
            prob = _Problem(q, measures, d, v, sizes, self._objective, weights)
            if cfg.engine == "grid":
                p, val = _grid_search(prob, cfg)
                results.append((val, v, p, [val]))
                continue
            seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
            starts = [prob.constant_channel(), prob.copy_channel()] + [None] * cfg.restarts
            starts = starts[:cfg.restarts]
            for s in init or ():
                s = s.reorder(v) if s.v != v else s
                if s.aux_sizes != prob.aux_sizes:
                    raise ValidationError("initial system alphabet sizes differ from the search sizes")
                starts.append(s.channel.reshape(q.x_size, -1))
            seeds = seeds + np.random.SeedSequence(cfg.seed + 1).spawn(max(0, len(starts) - len(seeds)))
            runs = Parallel(n_jobs=cfg.n_jobs)(
                delayed(_run_restart)(prob, st, cfg, sd) for st, sd in zip(starts, seeds))
            vals = [r[1] for r in runs]
            k = int(np.argmin(vals))
            results.append((vals[k], v, runs[k][0], vals))
        best = min(results, key=lambda r: r[0])
        if not math.isfinite(best[0]) or best[2] is None:
            raise InfeasibleError(f"no searched channel meets d = {tuple(d)}")
        return best

    def fit(self, q: JointSourcePmf, d, measures, init=None):
        """Search for the channel minimizing the functional subject to P2 at ``d``.

        ``init`` is an optional iterable of :class:`AuxSystem` starting points.
        """
        d = as_distortion_vector(d, q.t)
        if len(measures) != q.t:
            raise ValidationError(f"need {q.t} distortion measures")
        val, v, p, vals = self._search(q, d, measures, init, self._weights(q.t))
        sizes = _normalize_sizes(self._config().aux_sizes, q.t, q.x_size, self.chain_only)
        self.v_ = v
        self.system_ = AuxSystem(q, v, tuple(sizes[m] for m in v.masks),
                                 p.reshape((q.x_size,) + tuple(sizes[m] for m in v.masks)))
        self.value_ = float(val)
        self.restart_values_ = list(vals)
        self.distortions_ = check_P2(self.system_, d, measures).achieved
        return self

    def result(self):
        check_is_fitted(self, "system_")
        return self.system_, self.value_


class Thm2Minimizer(_ChannelSearch):
    """Minimizes the corrected upper bound over channels (and lists)."""

    _objective = "thm2"


class R0Minimizer(_ChannelSearch):
    """Minimizes the Heegard-Berger functional over channels."""

    _objective = "r0"


class InnerBoundaryTracer(_ChannelSearch):
    """Scalarized search along the lower boundary of the inner-bound region."""

    _objective = "weighted"

    def __init__(self, weights=((1.0,),), v=None, aux_sizes=None, engine="descent",
                 grid_step=1 / 16, grid_max_points=6_000_000, restarts=8, step_size=0.5,
                 shrink=0.5, max_iter=300, seed=0, tol=1e-10, fd_eps=1e-7, max_pairs=256,
                 random_dirs=64, lists="all", chain_only=False, n_jobs=1):
        super().__init__(v=v, aux_sizes=aux_sizes, engine=engine, grid_step=grid_step,
                         grid_max_points=grid_max_points, restarts=restarts,
                         step_size=step_size, shrink=shrink, max_iter=max_iter, seed=seed,
                         tol=tol, fd_eps=fd_eps, max_pairs=max_pairs,
                         random_dirs=random_dirs, lists=lists,
                         chain_only=chain_only, n_jobs=n_jobs)
        self.weights = weights

    def fit(self, q: JointSourcePmf, d, measures, init=None):
        from .bounds import inner_region
        d = as_distortion_vector(d, q.t)
        boundary, systems = [], []
        for w in self.weights:
            w = np.asarray(w, dtype=float)
            if w.shape != (q.t,) or np.any(w < 0) or not np.any(w > 0):
                raise ValidationError(f"weight {w.tolist()} must be {q.t} nonnegative reals, not all 0")
            self._current = w
            val, v, p, _ = self._search(q, d, measures, init, w)
            sizes = _normalize_sizes(self._config().aux_sizes, q.t, q.x_size, self.chain_only)
            sys = AuxSystem(q, v, tuple(sizes[m] for m in v.masks),
                            p.reshape((q.x_size,) + tuple(sizes[m] for m in v.masks)))
            boundary.append((tuple(w.tolist()), inner_region(sys, d, measures).prefix_bounds))
            systems.append(sys)
        self.boundary_ = boundary
        self.systems_ = systems
        return self


def _estimator(cls, v, cfg: SearchConfig | None, **extra):
    cfg = cfg or SearchConfig()
    return cls(v=v, **asdict(cfg), **extra)


def minimize_thm2(q, d, measures, v=None, cfg: SearchConfig | None = None, init=None):
    """Best (system, value) found for the corrected upper bound."""
    return _estimator(Thm2Minimizer, v, cfg).fit(q, d, measures, init).result()


def minimize_r0(q, d, measures, cfg: SearchConfig | None = None, init=None):
    return _estimator(R0Minimizer, None, cfg).fit(q, d, measures, init).result()


def trace_inner_boundary(q, d, measures, v=None, weights=((1.0,),), cfg: SearchConfig | None = None,
                         init=None):
    """List of ``(weight, prefix bounds)`` minimizing ``w . c`` for each weight."""
    est = _estimator(InnerBoundaryTracer, v, cfg, weights=weights)
    return est.fit(q, d, measures, init).boundary_
