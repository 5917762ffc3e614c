"""Monte-Carlo simulation of the nested-codebook random coding scheme.

One codebook per subset ``S_j``. Codeword indices are vectors
``(k_1, ..., k_|S_j|, k')``; coordinate ``k_i`` is the bin index sent on
channel ``S_j[i]`` and ``k'`` is never sent. Encoding runs stage by stage in
list order using letter-typicality tests; decoder ``l`` resolves the unknown
coordinates of every codebook whose subset contains it, reading only the
messages on channels ``1..l``.

Everything is vectorized across trials. Index "1" of the description
corresponds to the 0-based index 0 here.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import InfeasibleError, ValidationError, as_distortion_vector
from .aux import AuxSystem, check_P2, optimal_reconstruction
from .lattice import subset_label

log = logging.getLogger(__name__)

STORAGE_BUDGET = 2 ** 26
EPS0 = 0.05
_CHUNK_CELLS = 2 ** 24


# -- letter typicality -----------------------------------------------------

def _counts(seq: np.ndarray, size: int) -> np.ndarray:
    seq = np.asarray(seq)
    if seq.size and (seq.min() < 0 or seq.max() >= size):
        raise ValidationError(f"sequence letters must lie in [0, {size})")
    return np.bincount(seq.ravel(), minlength=size)


def _within(counts, n, pmf, eps) -> bool:
    pmf = np.asarray(pmf, dtype=float).ravel()
    return bool(np.all(np.abs(counts / n - pmf) <= eps * pmf + 1e-15))


def is_typical(seq, pmf, eps: float) -> bool:
    """``|N(a|x^n)/n - p(a)| <= eps p(a)`` for every letter ``a``."""
    seq = np.asarray(seq)
    if seq.ndim != 1 or seq.size == 0:
        raise ValidationError("expected a nonempty 1-d sequence")
    pmf = np.asarray(pmf, dtype=float)
    return _within(_counts(seq, pmf.size), seq.size, pmf, eps)


def is_jointly_typical(seqs, pmf, eps: float) -> bool:
    """Joint letter-typicality of a tuple of equal-length sequences."""
    seqs = [np.asarray(s) for s in seqs]
    pmf = np.asarray(pmf, dtype=float)
    if len(seqs) != pmf.ndim:
        raise ValidationError(f"{len(seqs)} sequences for a {pmf.ndim}-variable pmf")
    n = seqs[0].size
    if any(s.ndim != 1 or s.size != n for s in seqs) or n == 0:
        raise ValidationError("sequences must be nonempty, 1-d and of equal length")
    for s, k in zip(seqs, pmf.shape):
        if s.min() < 0 or s.max() >= k:
            raise ValidationError(f"sequence letters must lie in [0, {k})")
    flat = np.ravel_multi_index(tuple(seqs), pmf.shape)
    return _within(np.bincount(flat, minlength=pmf.size), n, pmf, eps)


def min_mass(pmf) -> float:
    """Smallest positive probability."""
    pmf = np.asarray(pmf, dtype=float)
    return float(pmf[pmf > 0].min())


@dataclass(frozen=True)
class TypicalityBounds:
    mu: float
    delta1: float | None = None
    delta2: float | None = None


def typicality_bounds(n: int, eps, pmf) -> TypicalityBounds:
    """Closed-form failure bounds for letter typicality.

    A scalar ``eps`` gives ``delta1 = 2|X| exp(-n eps^2 mu)`` for a pmf over
    ``X``. A pair ``(eps1, eps2)`` gives
    ``delta2 = 2|X||Y| exp(-n (eps2 - eps1)^2 mu / (1 + eps1))`` for a pmf over
    ``(X, Y)``; any extra axes are folded into ``Y``.
    """
    pmf = np.asarray(pmf, dtype=float)
    mu = min_mass(pmf)
    if np.ndim(eps) == 0:
        eps = float(eps)
        if eps <= 0:
            raise ValidationError("eps must be positive")
        return TypicalityBounds(mu, delta1=2 * pmf.size * math.exp(-n * eps ** 2 * mu))
    e1, e2 = (float(e) for e in eps)
    if not 0 < e1 <= e2:
        raise ValidationError(f"need 0 < eps1 <= eps2, got ({e1}, {e2})")
    return TypicalityBounds(mu, delta2=2 * pmf.size * math.exp(-n * (e2 - e1) ** 2 * mu / (1 + e1)))


@dataclass(frozen=True)
class EpsilonSchedule:
    """Strictly increasing ``eps_0 < eps_1 < ... < eps_{2^t}``."""

    eps: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if eps[0] <= 0 or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValidationError("epsilon schedule must be positive and strictly increasing")

    @classmethod
    def default(cls, t: int, eps0: float = EPS0) -> "EpsilonSchedule":
        m = 2 ** t
        return cls(tuple(eps0 * (1 + j / m) for j in range(m + 1)))

    def encoder(self, j: int) -> float:
        return self.eps[j + 1]

    def decoder(self, j: int) -> float:
        return self.eps[j + 2]


# -- rate allocation -------------------------------------------------------

@dataclass(frozen=True)
class RateAllocation:
    """Per subset: bin rates ``R_{S_j,i}`` in member order and the private rate ``R'``."""

    v: object
    bins: tuple[tuple[float, ...], ...]
    private: tuple[float, ...]

    def total(self, j: int) -> float:
        return sum(self.bins[j]) + self.private[j]

    def channel_rates(self) -> tuple[float, ...]:
        t = self.v.t
        r = [0.0] * t
        for j in range(len(self.v)):
            for i, l in enumerate(self.v.members(j)):
                r[l - 1] += self.bins[j][i]
        return tuple(r)

    def unresolved(self, j: int, l: int) -> float:
        """Rate decoder ``l`` must resolve in codebook ``j``."""
        members = self.v.members(j)
        known = sum(1 for m in members if m <= l)
        return sum(self.bins[j][known:]) + self.private[j]


def coding_constraints(sys: AuxSystem):
    """Encoding lower bounds and decoding upper bounds per subset, in bits."""
    J, sets = sys.joint, sys.v.sets
    enc, dec = [], []
    for j in range(len(sys.v)):
        uj = sys.u_axes([j])
        sup = sys.u_axes(sets.superset[j])
        dag = sys.u_axes(sets.dagger[j])
        enc.append(J.mi(uj, (0,) + sup + dag))
        dec.append({l: J.mi(uj, sup + sys.u_axes(sets.ddagger[j][l]) + (l,))
                    for l in sys.v.members(j)})
    return enc, dec


def allocate_rates(sys: AuxSystem, margin: float = 0.25, dec_margin: float | None = None,
                   allow_violation: bool = False) -> RateAllocation:
    """Split each codebook's rate into bin rates and a private rate.

    The total is ``(1 + margin)`` times the encoding bound. Walking through the
    members of ``S_j`` in increasing order, the rate left unresolved by decoder
    ``S_j[i]`` is capped at ``(1 - dec_margin)`` times its decoding bound; the
    bin rate on that channel is whatever the cap removes. A negative
    ``dec_margin`` deliberately violates the decoding constraint and requires
    ``allow_violation``.
    """
    dec_margin = margin if dec_margin is None else dec_margin
    if margin < 0:
        raise InfeasibleError(f"encoding margin {margin} is below the encoding constraint")
    if dec_margin < 0 and not allow_violation:
        raise InfeasibleError(f"decoding margin {dec_margin} violates the decoding constraint")
    enc, dec = coding_constraints(sys)
    bins, private = [], []
    for j in range(len(sys.v)):
        total = enc[j] * (1 + margin)
        left, rates = total, []
        for l in sys.v.members(j):
            cap = max(0.0, dec[j][l] * (1 - dec_margin))
            if cap > total + 1e-12 and not allow_violation:
                raise InfeasibleError(f"empty rate interval for subset {subset_label(sys.v.masks[j])}, "
                                      f"decoder {l}")
            new = min(left, cap)
            rates.append(left - new)
            left = new
        bins.append(tuple(rates))
        private.append(left)
    return RateAllocation(sys.v, tuple(bins), tuple(private))


# -- codebooks -------------------------------------------------------------

def _count(n: int, rate: float) -> int:
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


@dataclass(frozen=True, eq=False)
class NestedCodebook:
    """Codeword arrays ``words[j]`` of shape ``(prod(dims[j]), n)`` in row-major index order."""

    n: int
    dims: tuple[tuple[int, ...], ...]
    words: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def storage(self) -> int:
        return sum(w.size for w in self.words)


def codebook_dims(alloc: RateAllocation, n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(_count(n, r) for r in alloc.bins[j]) + (_count(n, alloc.private[j]),)
                 for j in range(len(alloc.bins)))


def generate_codebooks(sys: AuxSystem, alloc: RateAllocation, n: int, rng,
                       budget: int = STORAGE_BUDGET) -> NestedCodebook:
    """iid codewords from each auxiliary marginal; refuses configurations above ``budget`` symbols."""
    dims = codebook_dims(alloc, n)
    storage = sum(int(np.prod(d)) * n for d in dims)
    if storage > budget:
        raise ValidationError(f"codebooks need {storage} symbols at n={n}, above the budget {budget}")
    words = []
    for j, d in enumerate(dims):
        pu = sys.u_marginal(j)
        w = rng.choice(len(pu), size=(int(np.prod(d)), n), p=pu).astype(np.int8)
        w.setflags(write=False)
        words.append(w)
    return NestedCodebook(n, dims, tuple(words))


# -- batched typicality search --------------------------------------------

def _letter_pmf(joint, ctx_axes, target_axis):
    """Marginal over ``ctx_axes + (target_axis,)`` reshaped to ``(Z, |target|)``."""
    axes = tuple(ctx_axes) + (target_axis,)
    order = sorted(axes)
    m = joint.marginal(tuple(order))
    m = np.transpose(m, [order.index(a) for a in axes])
    return m.reshape(-1, m.shape[-1])


def _context_index(seqs, sizes):
    """Combine per-letter context symbols into one product-alphabet index, shape ``(T, n)``."""
    if not seqs:
        return None
    return np.ravel_multi_index(tuple(seqs), tuple(sizes))


def _typical_rows(words: np.ndarray, z: np.ndarray, pz: np.ndarray, eps: float) -> np.ndarray:
    """Boolean ``(N, T)``: codeword ``k`` is jointly typical with context ``z[t]``."""
    N, n = words.shape
    Z, K = pz.shape
    T = z.shape[0]
    onehot = np.zeros((n, Z, T), dtype=np.float32)
    onehot[np.arange(n)[:, None], z.T, np.arange(T)[None, :]] = 1.0
    onehot = onehot.reshape(n, Z * T)
    lo = (pz * (1 - eps) - 1e-12) * n
    hi = (pz * (1 + eps) + 1e-12) * n
    ok = np.ones((N, T), dtype=bool)
    for u in range(K):
        cnt = (words == u).astype(np.float32) @ onehot
        cnt = cnt.reshape(N, Z, T)
        ok &= np.all((cnt >= lo[None, :, u, None]) & (cnt <= hi[None, :, u, None]), axis=1)
    return ok


def _first_typical(words, z, pz, eps, trials_cells=_CHUNK_CELLS):
    """Lowest typical row per trial, or -1."""
    N, n = words.shape
    T = z.shape[0]
    out = np.full(T, -1, dtype=np.int64)
    pending = np.arange(T)
    step = max(1, trials_cells // max(1, n * pz.shape[0] * T))
    for s in range(0, N, step):
        if pending.size == 0:
            break
        ok = _typical_rows(words[s:s + step], z[pending], pz, eps)
        hit = ok.any(axis=0)
        out[pending[hit]] = s + np.argmax(ok[:, hit], axis=0)
        pending = pending[~hit]
    return out


# -- encoding and decoding -------------------------------------------------

@dataclass
class Transcript:
    """Encoder output for a batch of trials.

    ``messages[l]`` maps ``(j, i)`` to the bin indices (one per trial) sent on
    channel ``l``; ``index`` and ``success`` are per stage.
    """

    messages: dict
    index: np.ndarray
    success: np.ndarray

    def channel_view(self, l: int) -> dict:
        """Messages decoder ``l`` may read: channels ``1..l`` only."""
        return {c: dict(m) for c, m in self.messages.items() if c <= l}


def encode(sys: AuxSystem, x: np.ndarray, books: NestedCodebook, schedule: EpsilonSchedule) -> Transcript:
    """Stage-by-stage typical-set encoding of ``x`` with shape ``(T, n)``."""
    x = np.atleast_2d(np.asarray(x))
    T, n = x.shape
    if n != books.n:
        raise ValidationError(f"sequence length {n} does not match codebook length {books.n}")
    sets, m = sys.v.sets, len(sys.v)
    chosen = {}
    index = np.zeros((m, T), dtype=np.int64)
    success = np.zeros((m, T), dtype=bool)
    messages = {l: {} for l in range(1, sys.t + 1)}
    for j in range(m):
        if sys.aux_sizes[j] == 1:
            # a size-1 alphabet carries nothing; the stage is trivial
            success[j] = True
            chosen[j] = books.words[j][np.zeros(T, dtype=np.int64)]
            for i, l in enumerate(sys.v.members(j)):
                messages[l][(j, i)] = np.zeros(T, dtype=np.int64)
            continue
        ctx = sorted(sets.superset[j] + sets.dagger[j])
        z = _context_index([x] + [chosen[i] for i in ctx],
                           [sys.source.x_size] + [sys.aux_sizes[i] for i in ctx])
        pz = _letter_pmf(sys.joint, (0,) + sys.u_axes(ctx), sys.u_axis(j))
        k = _first_typical(books.words[j], z, pz, schedule.encoder(j))
        success[j] = k >= 0
        k = np.where(k >= 0, k, 0)
        index[j] = k
        chosen[j] = books.words[j][k]
        coords = np.unravel_index(k, books.dims[j])
        for i, l in enumerate(sys.v.members(j)):
            messages[l][(j, i)] = coords[i]
    return Transcript(messages, index, success)


@dataclass
class DecodeResult:
    """Per decoder: stage indices, status codes and the reconstruction."""

    l: int
    stages: tuple[int, ...]
    index: np.ndarray
    status: np.ndarray
    xhat: np.ndarray

    UNIQUE, NONE, AMBIGUOUS = 0, 1, 2


def decode(sys: AuxSystem, l: int, view: dict, y: np.ndarray, books: NestedCodebook,
           schedule: EpsilonSchedule, recon) -> DecodeResult:
    """Decoder ``l`` from the channel view (channels ``1..l``) and side information ``y``."""
    if any(c > l for c in view):
        raise ValidationError(f"decoder {l} was handed messages from a later channel")
    y = np.atleast_2d(np.asarray(y))
    T, n = y.shape
    sets = sys.v.sets
    stages = tuple(j for j in range(len(sys.v)) if l in sys.v.members(j))
    decoded = {}
    index = np.zeros((len(stages), T), dtype=np.int64)
    status = np.zeros((len(stages), T), dtype=np.int8)
    for s, j in enumerate(stages):
        members = sys.v.members(j)
        known = [i for i, c in enumerate(members) if c <= l]
        dims = books.dims[j]
        slab = int(np.prod(dims[len(known):]))
        prefix = np.zeros(T, dtype=np.int64)
        for i in known:
            prefix = prefix * dims[i] + view[members[i]][(j, i)]
        start = prefix * slab
        if sys.aux_sizes[j] == 1:
            index[s] = start
            decoded[j] = books.words[j][start]
            continue
        ctx = sorted(sets.superset[j] + sets.ddagger[j][l])
        z = _context_index([y] + [decoded[i] for i in ctx],
                           [sys.source.y_size(l)] + [sys.aux_sizes[i] for i in ctx])
        pz = _letter_pmf(sys.joint, (l,) + sys.u_axes(ctx), sys.u_axis(j))
        eps = schedule.decoder(j)
        words = books.words[j]
        k = np.empty(T, dtype=np.int64)
        for tr in range(T):
            ok = _typical_rows(words[start[tr]:start[tr] + slab], z[tr:tr + 1], pz, eps)[:, 0]
            hits = np.flatnonzero(ok)
            status[s, tr] = (DecodeResult.NONE if hits.size == 0 else
                             DecodeResult.UNIQUE if hits.size == 1 else DecodeResult.AMBIGUOUS)
            k[tr] = start[tr] + (hits[0] if hits.size else 0)
        index[s] = k
        decoded[j] = words[k]
    cols = []
    for ax in recon.domain_axes:
        if ax == l:
            cols.append(y)
        else:
            cols.append(decoded[ax - sys.t - 1])
    xhat = recon.apply(*cols) if cols else np.full((T, n), int(recon.table))
    return DecodeResult(l, stages, index, status, np.asarray(xhat))


# -- trials ----------------------------------------------------------------

@dataclass
class TrialStats:
    """Empirical event frequencies at one blocklength."""

    n: int
    trials: int
    e1: float
    e2: dict
    decoder: dict
    distortion: tuple
    channel_rates: tuple

    def rows(self):
        yield dict(n=self.n, event="E1", subset="", decoder="", empirical_rate=self.e1, trials=self.trials)
        for label, r in self.e2.items():
            yield dict(n=self.n, event="E2", subset=label, decoder="", empirical_rate=r, trials=self.trials)
        for (l, label), d in self.decoder.items():
            for kind in ("D", "D_none", "D_ambiguous", "D_mismatch"):
                yield dict(n=self.n, event=kind, subset=label, decoder=l, empirical_rate=d[kind],
                           trials=self.trials)
        for l, dist in enumerate(self.distortion, start=1):
            yield dict(n=self.n, event="distortion", subset="", decoder=l, empirical_rate=dist,
                       trials=self.trials)


CSV_COLUMNS = ("n", "event", "subset", "decoder", "empirical_rate", "trials")


def stats_csv(stats, digits: int = 12) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for s in stats:
        for row in s.rows():
            row["empirical_rate"] = f"{row['empirical_rate']:.{digits}g}"
            w.writerow(row)
    return buf.getvalue()


def _sample_sources(q, T, n, seeds):
    cells = q.table.ravel()
    flat = np.stack([np.random.default_rng(s).choice(cells.size, size=n, p=cells) for s in seeds])
    return np.unravel_index(flat, q.alphabet_sizes)


def run_trials(sys: AuxSystem, measures, n_list, trials: int, margin: float = 0.25, seed: int = 0,
               d=None, dec_margin: float | None = None, eps0: float = EPS0,
               budget: int = STORAGE_BUDGET, alloc: RateAllocation | None = None):
    """Simulate the scheme at each blocklength; returns one :class:`TrialStats` per ``n``.

    Codebooks are drawn once per blocklength and shared by all trials; every
    trial draws its source block from its own derived seed.
    """
    q, t = sys.source, sys.t
    if d is not None:
        rep = check_P2(sys, as_distortion_vector(d, t), measures)
        if not rep.passed:
            raise InfeasibleError(f"system fails P2 at d={rep.targets}: achieved {rep.achieved}")
    if alloc is None:
        alloc = allocate_rates(sys, margin, dec_margin,
                               allow_violation=dec_margin is not None and dec_margin < 0)
    schedule = EpsilonSchedule.default(t, eps0)
    recons = [optimal_reconstruction(sys, l, measures[l - 1])[0] for l in range(1, t + 1)]
    if schedule.eps[-1] > min_mass(sys.table):
        log.info("largest epsilon %.3g exceeds the smallest joint mass %.3g",
                 schedule.eps[-1], min_mass(sys.table))
    root = np.random.SeedSequence(seed)
    out = []
    for n, ss in zip(n_list, root.spawn(len(n_list))):
        book_seq, trial_seq = ss.spawn(2)
        books = generate_codebooks(sys, alloc, int(n), np.random.default_rng(book_seq), budget)
        seqs = _sample_sources(q, trials, int(n), trial_seq.spawn(trials))
        x, ys = seqs[0], seqs[1:]
        joint_flat = np.ravel_multi_index(seqs, q.alphabet_sizes)
        e1 = np.array([not _within(np.bincount(row, minlength=q.table.size), n, q.table, eps0)
                       for row in joint_flat])
        tr = encode(sys, x, books, schedule)
        e2 = {}
        for j in range(len(sys.v)):
            e2[subset_label(sys.v.masks[j])] = float(np.mean(~tr.success[j]))
        dec_stats, dist = {}, []
        for l in range(1, t + 1):
            res = decode(sys, l, tr.channel_view(l), ys[l - 1], books, schedule, recons[l - 1])
            for s, j in enumerate(res.stages):
                st = res.status[s]
                wrong = (st == DecodeResult.UNIQUE) & (res.index[s] != tr.index[j])
                dec_stats[(l, subset_label(sys.v.masks[j]))] = {
                    "D": float(np.mean((st != DecodeResult.UNIQUE) | wrong)),
                    "D_none": float(np.mean(st == DecodeResult.NONE)),
                    "D_ambiguous": float(np.mean(st == DecodeResult.AMBIGUOUS)),
                    "D_mismatch": float(np.mean(wrong)),
                }
            cost = measures[l - 1].table[x, res.xhat]
            dist.append(float(cost.mean()))
        out.append(TrialStats(int(n), trials, float(e1.mean()), e2, dec_stats, tuple(dist),
                              alloc.channel_rates()))
    return out
