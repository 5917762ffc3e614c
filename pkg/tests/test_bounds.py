import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from sirefine._validation import InfeasibleError, ValidationError
from sirefine.aux import AuxSystem, example3_instance, example3_measures
from sirefine.bounds import (RateRegion, degraded_rd_value, hb_r0, inner_region, latent_region_contains,
                             lossless_region, phi, phi_table, scalable_region, slepian_wolf_rate,
                             td_degraded_region, thm2_value)
from sirefine.lattice import enumerate_lists
from sirefine.source import DistortionMeasure, JointSourcePmf, chain_source, random_source


def _random_sys(seed, t=2, max_size=3):
    rng = np.random.default_rng(seed)
    q = random_source(rng, int(rng.integers(2, max_size + 1)), tuple(rng.integers(1, max_size + 1, t)))
    lists = enumerate_lists(t)
    v = lists[int(rng.integers(len(lists)))]
    sizes = tuple(int(s) for s in rng.integers(1, 3 if t == 3 else max_size + 1, len(v)))
    return AuxSystem.random(rng, q, v, sizes)


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2, 3]))
def test_phi_matches_oracle(seed, t):
    sys = _random_sys(seed, t, 2)
    subsets = sys.v.as_lists()
    for j in range(len(subsets)):
        for l in range(min(subsets[j]), t + 1):
            assert phi(sys, j, l) == pytest.approx(O.phi(sys.table, subsets, t, j, l), abs=1e-10)
    assert thm2_value(sys) == pytest.approx(O.thm2(sys.table, subsets, t), abs=1e-10)
    assert hb_r0(sys) == pytest.approx(O.hb_r0(sys.table, subsets, t), abs=1e-10)


def test_phi_rejects_disjoint_prefix():
    sys = _random_sys(1)
    with pytest.raises(ValueError):
        phi(sys, sys.v.index((2,)), 1)


def test_degenerate_everything_zero():
    q = random_source(np.random.default_rng(0), 2, (2, 2))
    sys = AuxSystem.degenerate(q)
    assert inner_region(sys).prefix_bounds == (0.0, 0.0)
    assert hb_r0(sys) == 0 and thm2_value(sys) == 0
    assert all(v == 0 for row in phi_table(sys).values() for v in row.values())


def test_copy_single_decoder():
    q = JointSourcePmf.from_table(np.array([0.5, 0.25, 0.25]).reshape(3, 1))
    sys = AuxSystem.from_kernels(q, None, {(1,): np.eye(3)})
    assert inner_region(sys).prefix_bounds[0] == pytest.approx(1.5)
    assert degraded_rd_value(sys) == pytest.approx(1.5)
    assert hb_r0(sys) == pytest.approx(1.5)


def test_example3_values():
    sys = example3_instance()
    assert hb_r0(sys, (0, 0, 0), example3_measures()) == 0.0
    assert thm2_value(sys) == pytest.approx(2 * math.log2(3), abs=1e-12)
    assert slepian_wolf_rate(sys.source, example3_measures()) == pytest.approx(math.log2(3), abs=1e-12)


def test_inner_region_requires_p2():
    q = JointSourcePmf.from_table(np.full((2, 1), 0.5))
    sys = AuxSystem.degenerate(q)
    with pytest.raises(InfeasibleError):
        inner_region(sys, (0.0,), [DistortionMeasure.hamming(1, 2)])


def test_slepian_wolf_examples():
    q = JointSourcePmf.from_table(0.5 * np.eye(2)[:, :, None] * np.eye(2)[:, None, :])
    assert slepian_wolf_rate(q) == 0.0
    q = JointSourcePmf.from_table(0.5 * np.ones((2, 1, 1)) * np.eye(2)[:, None, :])
    assert slepian_wolf_rate(q) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        slepian_wolf_rate(q, [DistortionMeasure(1, [[0, 0], [1, 0]]), DistortionMeasure.hamming(2, 2)])


def test_degraded_value_rejects_off_chain():
    rng = np.random.default_rng(0)
    q = random_source(rng, 2, (2, 2))
    sys = AuxSystem.from_kernels(q, None, {"U1": O.random_kernel(rng, 2, 2)})
    with pytest.raises(ValidationError):
        degraded_rd_value(sys)


def test_td_region_matches_inner_on_chain():
    rng = np.random.default_rng(2)
    q = chain_source([0.4, 0.6], [O.random_kernel(rng, 2, 2), O.random_kernel(rng, 2, 2)])
    sys = AuxSystem.from_kernels(q, None, {"U12": O.random_kernel(rng, 2, 2), "U2": O.random_kernel(rng, 2, 2)})
    assert td_degraded_region(sys).prefix_bounds == pytest.approx(inner_region(sys).prefix_bounds, abs=1e-9)


def test_scalable_needs_two_decoders():
    with pytest.raises(ValueError):
        scalable_region(example3_instance())


def test_scalable_special_case():
    # Y1 = Y2 constant, U1 = X, others degenerate
    q = JointSourcePmf.from_table(np.array([0.5, 0.5]).reshape(2, 1, 1))
    sys = AuxSystem.from_kernels(q, None, {"U1": np.eye(2)})
    assert scalable_region(sys).prefix_bounds[0] == pytest.approx(1.0)


def test_lossless_examples():
    q = JointSourcePmf.from_table(np.full((4, 1, 1), 0.25))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert lossless_region(q, (2, 2)).prefix_bounds == pytest.approx((1.0, 2.0))
    # W1 = Y1: first bound vanishes; Y2 is a copy of Y1 so the chain holds
    tab = np.zeros((2, 2, 2, 2))
    for w1 in range(2):
        for w2 in range(2):
            tab[w1, w2, w1, w1] = 0.25
    q = JointSourcePmf.from_table(tab.reshape(4, 2, 2))
    assert lossless_region(q, (2, 2)).prefix_bounds[0] == 0.0
    with pytest.raises(ValidationError):
        lossless_region(q, (3, 2))


def test_lossless_warns_when_not_degraded():
    tab = np.zeros((2, 2, 2, 1))
    for w1 in range(2):
        for w2 in range(2):
            tab[w1, w2, w1, 0] = 0.25
    q = JointSourcePmf.from_table(tab.reshape(4, 2, 1))
    with pytest.warns(RuntimeWarning):
        lossless_region(q, (2, 2))


def test_latent_region():
    assert latent_region_contains((1, 1), (1, 1))
    assert latent_region_contains((1, 1), (2, 0))
    assert not latent_region_contains((1, 1), (0, 2))
    with pytest.raises(ValueError):
        latent_region_contains((1, -1), (1, 1))


@given(st.lists(st.floats(0, 3), min_size=3, max_size=3), st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_region_membership_monotone(c, bump):
    c = tuple(np.cumsum(c))
    region = RateRegion(3, c)
    r = region.corner()
    assert region.contains(r, tol=1e-12)
    assert region.contains(tuple(a + b for a, b in zip(r, bump)), tol=1e-12)
