import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from sirefine._validation import ValidationError
from sirefine.source import (DistortionMeasure, JointSourcePmf, chain_source, doubly_symmetric_binary,
                             is_degraded, marginal, parse_source_spec, product_source, random_chain_source,
                             random_source, source_spec_dict, validate_source, SourceProblem)


def test_validate_reports():
    assert validate_source(JointSourcePmf(3, (3, 1, 1, 1), np.full(3, 1 / 3))) == []
    assert "sum ≠ 1" in " ".join(validate_source(JointSourcePmf(1, (2, 1), np.array([0.45, 0.45]))))
    assert "negative mass" in " ".join(validate_source(JointSourcePmf(1, (2, 1), np.array([1.1, -0.1]))))


def test_marginals():
    q = JointSourcePmf(3, (3, 1, 1, 1), np.full(3, 1 / 3))
    assert np.allclose(marginal(q, [0]), [1 / 3] * 3)
    q = doubly_symmetric_binary(0.1)
    assert np.allclose(marginal(q, [1]), [0.5, 0.5], atol=1e-15)
    p = product_source([0.2, 0.8], [[0.3, 0.7], [0.3, 0.7]])
    assert np.allclose(np.outer(marginal(p, [0]), marginal(p, [1])), p.table)
    with pytest.raises(ValueError):
        marginal(q, [])


@given(st.integers(0, 10 ** 6))
def test_marginal_consistency(seed):
    q = random_source(np.random.default_rng(seed), 2, (3, 2))
    assert np.allclose(marginal(q, [0]), marginal(q, [0, 2]).sum(axis=1), atol=1e-15)
    assert validate_source(q) == []


def test_degradedness_examples():
    assert is_degraded(product_source([0.5, 0.5], np.ones((2, 1)), [[0.9, 0.1], [0.2, 0.8]]))
    copy_y1 = JointSourcePmf.from_table(0.5 * np.eye(2)[:, :, None])
    # axes (x, y1, y2) with y1 = x, y2 constant
    assert not is_degraded(copy_y1)
    assert is_degraded(doubly_symmetric_binary(0.2))


@given(st.integers(0, 10 ** 6), st.integers(2, 3))
def test_chain_constructions_are_degraded(seed, t):
    rng = np.random.default_rng(seed)
    q = random_chain_source(rng, 2, (2,) * t)
    assert is_degraded(q, 1e-9)
    assert validate_source(q) == []


def test_chain_source_layout_matches_oracle():
    rng = np.random.default_rng(1)
    px = rng.dirichlet(np.ones(2))
    ks = [O.random_kernel(rng, 2, 3), O.random_kernel(rng, 3, 2)]
    assert np.allclose(chain_source(px, ks).table, O.degraded_joint(px, ks))


def test_distortion_normality():
    with pytest.raises(ValidationError):
        DistortionMeasure(1, [[1.0, 1.0], [0.0, 1.0]])
    assert DistortionMeasure.hamming(1, 3).is_error_indicator()


def test_json_round_trip_and_errors():
    q = doubly_symmetric_binary(0.1)
    prob = SourceProblem(q, (DistortionMeasure.hamming(1, 2),), (0.05,))
    import json
    text = json.dumps(source_spec_dict(prob), indent=1)
    back = parse_source_spec(text)
    assert np.array_equal(back.source.table, q.table) and back.d == (0.05,)
    bad = '{\n "t": 1,\n "alphabets": [2, 2],\n "pmf": [0.5, 0.5, 0.1]\n}'
    with pytest.raises(ValidationError, match=":4:"):
        parse_source_spec(bad)
