"""Ordered lists of decoder subsets and the index sets derived from them.

Subsets of ``[t] = {1, ..., t}`` are bitmasks (bit ``l-1`` set when decoder
``l`` belongs). Positions in a list are 0-based; decoders are 1-based.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

MAX_T = 5
MAX_ENUM_T = 3


def mask_of(members) -> int:
    m = 0
    for l in members:
        m |= 1 << (int(l) - 1)
    return m


def members_of(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def subset_label(mask: int) -> str:
    return "U" + "".join(str(l) for l in members_of(mask))


def full_mask(t: int) -> int:
    return (1 << t) - 1


def _popcount(m: int) -> int:
    return bin(m).count("1")


@dataclass(frozen=True)
class SubsetList:
    """Ordered list ``S_1, ..., S_{2^t - 1}`` with non-increasing cardinality."""

    t: int
    masks: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.t <= MAX_T:
            raise ValueError(f"t = {self.t} outside supported range 1..{MAX_T}")
        masks = tuple(int(m) for m in self.masks)
        object.__setattr__(self, "masks", masks)
        if sorted(masks) != list(range(1, 1 << self.t)):
            raise ValueError("list must contain every nonempty subset of [t] exactly once")
        sizes = [_popcount(m) for m in masks]
        if any(a < b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("subset cardinalities must be non-increasing along the list")

    @classmethod
    def from_members(cls, t: int, subsets) -> "SubsetList":
        return cls(t, tuple(mask_of(s) for s in subsets))

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def members(self, j: int) -> tuple[int, ...]:
        return members_of(self.masks[j])

    def index(self, subset) -> int:
        mask = subset if isinstance(subset, int) else mask_of(subset)
        return self.masks.index(mask)

    def as_lists(self) -> list[list[int]]:
        return [list(members_of(m)) for m in self.masks]

    @cached_property
    def sets(self) -> "LatticeSets":
        return derive_sets(self)


@dataclass(frozen=True)
class LatticeSets:
    """For each list position ``j``: superset, minus, plus and dagger sets.

    ``ddagger[j]`` maps each decoder ``l`` in ``S_j`` to its sub-dagger set.
    Every set is a sorted tuple of list positions.
    """

    superset: tuple[tuple[int, ...], ...]
    minus: tuple[tuple[int, ...], ...]
    plus: tuple[tuple[int, ...], ...]
    dagger: tuple[tuple[int, ...], ...]
    ddagger: tuple[dict, ...]


def canonical_list(t: int) -> SubsetList:
    """Decreasing cardinality, lexicographic within a cardinality class."""
    if not 1 <= t <= MAX_T:
        raise ValueError(f"t = {t} outside supported range 1..{MAX_T}")
    order = []
    for size in range(t, 0, -1):
        order += [mask_of(c) for c in itertools.combinations(range(1, t + 1), size)]
    return SubsetList(t, tuple(order))


def derive_sets(v: SubsetList) -> LatticeSets:
    masks = v.masks
    n = len(masks)
    sup, minus, plus, dag, ddag = [], [], [], [], []
    for j, S in enumerate(masks):
        a_sup = tuple(i for i in range(n) if masks[i] & S == S and masks[i] != S)
        a_minus = tuple(i for i in range(j) if masks[i] & S != S)
        a_plus = tuple(k for k in range(j + 1, n) if masks[k] & S)
        a_dag = tuple(i for i in a_minus if any(masks[i] & masks[k] for k in a_plus))
        a_dd = {l: tuple(i for i in a_dag if masks[i] >> (l - 1) & 1) for l in members_of(S)}
        sup.append(a_sup)
        minus.append(a_minus)
        plus.append(a_plus)
        dag.append(a_dag)
        ddag.append(a_dd)
    return LatticeSets(tuple(sup), tuple(minus), tuple(plus), tuple(dag), tuple(ddag))


def count_lists(t: int) -> int:
    return math.prod(math.factorial(math.comb(t, k)) for k in range(1, t + 1))


def enumerate_lists(t: int) -> list[SubsetList]:
    """Every valid ordering; refuses ``t > 3`` where the count explodes."""
    if t > MAX_ENUM_T:
        raise ValueError(f"t = {t} too large for exhaustive list enumeration "
                         f"({count_lists(t)} lists); limit is t ≤ {MAX_ENUM_T}")
    if t < 1:
        raise ValueError("t must be ≥ 1")
    classes = [[mask_of(c) for c in itertools.combinations(range(1, t + 1), size)]
               for size in range(t, 0, -1)]
    out = []
    for perms in itertools.product(*(itertools.permutations(c) for c in classes)):
        out.append(SubsetList(t, tuple(itertools.chain.from_iterable(perms))))
    return out
