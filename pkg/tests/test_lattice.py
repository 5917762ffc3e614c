import pytest
from hypothesis import given, strategies as st

import oracles as O
from sirefine.lattice import SubsetList, canonical_list, count_lists, derive_sets, enumerate_lists


def test_canonical_lists():
    assert canonical_list(1).as_lists() == [[1]]
    assert canonical_list(2).as_lists() == [[1, 2], [1], [2]]
    assert [tuple(s) for s in canonical_list(4).as_lists()] == O.TABLE_LIST
    with pytest.raises(ValueError):
        canonical_list(6)


def test_enumeration_counts():
    assert [len(enumerate_lists(t)) for t in (1, 2, 3)] == [1, 2, 36]
    assert count_lists(3) == 36
    assert len({v.masks for v in enumerate_lists(3)}) == 36
    with pytest.raises(ValueError, match="too large"):
        enumerate_lists(4)


def test_rejects_bad_order():
    with pytest.raises(ValueError):
        SubsetList.from_members(2, [[1], [1, 2], [2]])
    with pytest.raises(ValueError):
        SubsetList.from_members(2, [[1, 2], [1], [1]])


def test_full_set_sets():
    L = derive_sets(canonical_list(3))
    assert L.superset[0] == L.minus[0] == L.dagger[0] == ()
    assert all(x == () for x in L.ddagger[0].values())
    # every later subset meets the full set
    assert L.plus[0] == tuple(range(1, 7))


@given(st.sampled_from(enumerate_lists(3) + enumerate_lists(2)))
def test_matches_predicate_oracle(v):
    L = derive_sets(v)
    ref = O.lattice(v.as_lists())
    for j, (sup, minus, plus, dag, ddag) in enumerate(ref):
        assert set(L.superset[j]) == sup and set(L.minus[j]) == minus
        assert set(L.plus[j]) == plus and set(L.dagger[j]) == dag
        assert {l: set(x) for l, x in L.ddagger[j].items()} == ddag
        assert set(L.superset[j]) | set(L.minus[j]) == set(range(j))
        assert set(L.dagger[j]) <= set(L.minus[j])


def test_large_subsets_see_everything_before():
    v = canonical_list(4)
    L = derive_sets(v)
    for j in range(len(v)):
        if len(v.members(j)) >= 3:
            assert set(L.superset[j]) | set(L.dagger[j]) == set(range(j))
