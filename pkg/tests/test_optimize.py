import math

import numpy as np
import pytest
from sklearn.base import clone

import oracles as O
from sirefine._validation import InfeasibleError
from sirefine.aux import check_P2, example3_instance, example3_measures
from sirefine.bounds import thm2_value
from sirefine.optimize import (SearchConfig, Thm2Minimizer,
                               default_aux_sizes, minimize_r0, minimize_thm2, trace_inner_boundary)
from sirefine.source import DistortionMeasure, JointSourcePmf, chain_source, doubly_symmetric_binary

HAM = [DistortionMeasure.hamming(1, 2)]
FAST = SearchConfig(restarts=3, max_iter=80)


def test_side_information_equals_source():
    q = JointSourcePmf.from_table(0.5 * np.eye(2))
    sys, val = minimize_thm2(q, [0.0], HAM, cfg=FAST)
    assert val == pytest.approx(0.0, abs=1e-9)
    assert check_P2(sys, [0.0], HAM).passed


def test_lossless_without_side_information():
    q = JointSourcePmf.from_table(np.full((2, 1), 0.5))
    sys, val = minimize_thm2(q, [0.0], HAM, cfg=FAST)
    assert val == pytest.approx(1.0, abs=1e-9)
    cfg = SearchConfig(engine="grid", grid_step=1 / 8)
    assert minimize_thm2(q, [0.0], HAM, cfg=cfg)[1] == pytest.approx(1.0, abs=1e-9)


def test_r0_matches_thm2_single_decoder():
    q = doubly_symmetric_binary(0.2)
    a = minimize_thm2(q, [0.08], HAM, cfg=FAST)[1]
    b = minimize_r0(q, [0.08], HAM, cfg=FAST)[1]
    assert a == pytest.approx(b, abs=2e-3)


def test_r0_example3_hand_seeded():
    ex = example3_instance()
    cfg = SearchConfig(aux_sizes=dict(zip(["U123", "U12", "U13", "U23", "U1", "U2", "U3"], ex.aux_sizes)),
                       restarts=1, max_iter=5)
    sys, val = minimize_r0(ex.source, (0, 0, 0), example3_measures(), cfg=cfg, init=[ex])
    assert val == pytest.approx(0.0, abs=1e-12)
    assert check_P2(sys, (0, 0, 0), example3_measures()).passed


def test_generous_distortion_gives_zero():
    q = doubly_symmetric_binary(0.3)
    assert minimize_r0(q, [0.5], HAM, cfg=FAST)[1] == pytest.approx(0.0, abs=1e-12)
    assert trace_inner_boundary(q, [0.6], HAM, weights=[(1.0,)], cfg=FAST)[0][1] == pytest.approx((0.0,), abs=1e-12)


def test_infeasible_target_raises():
    q = JointSourcePmf.from_table(np.full((2, 1), 0.5))
    with pytest.raises(InfeasibleError):
        minimize_thm2(q, [0.0], HAM, cfg=SearchConfig(aux_sizes={"U1": 1}, restarts=2, max_iter=5))


def test_estimator_protocol_and_determinism():
    q = doubly_symmetric_binary(0.15)
    est = Thm2Minimizer(restarts=3, max_iter=60, seed=11)
    assert clone(est).get_params() == est.get_params()
    est.set_params(seed=12)
    a = est.fit(q, [0.05], HAM)
    b = clone(est).fit(q, [0.05], HAM)
    assert f"{a.value_:.12g}" == f"{b.value_:.12g}"
    assert a.value_ <= min(a.restart_values_) + 1e-15
    assert a.value_ == pytest.approx(thm2_value(a.system_), abs=1e-12)
    assert check_P2(a.system_, [0.05], HAM).passed


def test_grid_oracle_monotone_in_d():
    q = doubly_symmetric_binary(0.1)
    cfg = SearchConfig(engine="grid", grid_step=1 / 16)
    vals = [minimize_thm2(q, [d], HAM, cfg=cfg)[1] for d in (0.0, 0.03, 0.06, 0.1)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_default_sizes():
    assert default_aux_sizes(1, 2) == {1: 3}
    assert default_aux_sizes(2, 2) == {0b11: 7, 0b01: 15, 0b10: 15}
    chain = default_aux_sizes(2, 2, chain_only=True)
    assert chain[0b01] == 1 and chain[0b11] == 2 - 1 + 1 + 3 and chain[0b10] == 2 * 5 - 1 + 0 + 1


def _chain_grid_boundary(q, measures, d, weights, step=1 / 16):
    """Grid over chain-only channels p(u12, u2 | x) with binary auxiliaries."""
    rows = O.simplex_grid(4, int(round(1 / step)))
    best = {w: math.inf for w in weights}
    R = len(rows)
    tab = q.table  # (x, y1, y2)
    for a in range(R):
        ch = np.stack([np.broadcast_to(rows[a], rows.shape), rows], axis=1).reshape(R, 2, 2, 2)
        p = tab[None, :, :, :, None, None] * ch[:, :, None, None, :, :]  # (B, x, y1, y2, u12, u2)
        for b in range(R):
            pb = p[b]
            c1 = O.cmi(pb, (0,), (3,), (1,))
            c2 = c1 + O.cmi(pb, (0,), (4,), (2, 3))
            p1 = pb.sum(axis=(2, 4))  # (x, y1, u12)
            p2 = pb.sum(axis=1)  # (x, y2, u12, u2)
            d1 = np.einsum("xab,xk->abk", p1, measures[0].table).min(axis=-1).sum()
            d2 = np.einsum("xabc,xk->abck", p2, measures[1].table).min(axis=-1).sum()
            if d1 <= d[0] + 1e-12 and d2 <= d[1] + 1e-12:
                for w in weights:
                    best[w] = min(best[w], w[0] * c1 + w[1] * c2)
    return best


@pytest.mark.slow
def test_degraded_boundary_against_grid():
    q = chain_source([0.5, 0.5], [O.bsc(0.1), O.bsc(0.2)])
    ms = [DistortionMeasure.hamming(1, 2), DistortionMeasure.hamming(2, 2)]
    d = (0.15, 0.05)
    weights = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    cfg = SearchConfig(aux_sizes={"U12": 2, "U2": 2, "U1": 1}, restarts=4, max_iter=150, lists="canonical")
    got = trace_inner_boundary(q, d, ms, weights=weights, cfg=cfg)
    ref = _chain_grid_boundary(q, ms, d, weights, step=1 / 8)
    for w, c in got:
        assert w[0] * c[0] + w[1] * c[1] <= ref[w] + 5e-3
