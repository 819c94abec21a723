from __future__ import annotations

import numpy as np
import pytest

from oracles import tree_walk_return
from powers_lab.errors import BudgetExceeded, UsageError
from powers_lab.free_subgroup import FoldedGraph, subgroup_rank, support_basis
from powers_lab.group_algebra import AlgebraElement, default_free_schedule, parse_element, powers_average, random_element
from powers_lab.group_core import GroupSpec, Word
from powers_lab.moments import free_basis_moments, vector_moments

F2 = GroupSpec.free(2)
F3 = GroupSpec.free(3)


def runs(spec, text):
    return Word.parse(spec, text).data


@pytest.mark.parametrize(
    "words, rank",
    [
        (["a"], 1),
        (["a", "a b"], 2),
        (["a^2", "a^3"], 1),
        (["a^2", "a^4"], 1),
        (["a", "b", "a b"], 2),
        (["a b a^-1", "a^2 b a^-2", "a^3 b a^-3"], 3),
        (["b a b^-1", "b^-1 a b", "a"], 3),
    ],
)
def test_subgroup_rank(words, rank):
    assert subgroup_rank(F2, [runs(F2, w) for w in words]) == rank


def test_folded_graph_membership():
    g = FoldedGraph([runs(F2, "a^2"), runs(F2, "b a b^-1")])
    assert g.accepts(runs(F2, "a^4"))
    assert g.accepts(runs(F2, "b a^3 b^-1 a^-2"))
    assert not g.accepts(runs(F2, "a"))
    assert not g.accepts(runs(F2, "b"))


def test_support_basis_detection():
    assert support_basis(F2, [runs(F2, "a"), runs(F2, "a^-1"), ()]).rank == 1
    assert support_basis(F2, [runs(F2, "a"), runs(F2, "b"), runs(F2, "a b")]) is None
    assert support_basis(F2, [runs(F2, "a^2"), runs(F2, "a^3")]) is None
    assert support_basis(GroupSpec.free_abelian(1), [(1,)]) is None


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_free_family_moments_match_tree_walk(n):
    avg = powers_average(Word.parse(F2, "b"), default_free_schedule(F2, Word.parse(F2, "b"), n))
    fm = free_basis_moments(avg, 20)
    expected = [tree_walk_return(n, m) for m in range(21)]
    assert np.allclose(fm.normalized, expected, rtol=1e-12, atol=0)


def test_basis_moments_match_vector_moments():
    rng = np.random.default_rng(6)
    checked = 0
    for _ in range(200):
        a = random_element(F3, rng, 2, max_terms=4)
        if support_basis(F3, [g for g, _ in a.items()]) is None:
            continue
        direct = vector_moments(a, 6)
        fast = free_basis_moments(a, 6)
        scaled = fast.normalized * fast.scale ** (2 * np.arange(7))
        assert np.allclose(scaled, direct, rtol=1e-10, atol=1e-14)
        checked += 1
    assert checked > 50


def test_identity_coefficient_handled():
    a = parse_element(F2, "0.5 + (0+0.25i)*u[a] - 0.25*u[b^2]")
    direct = vector_moments(a, 8)
    fast = free_basis_moments(a, 8)
    assert np.allclose(fast.normalized * fast.scale ** (2 * np.arange(9)), direct, rtol=1e-12)


def test_errors():
    with pytest.raises(UsageError):
        free_basis_moments(parse_element(F2, "u[a] + u[b] + u[a b]"), 3)
    with pytest.raises(UsageError):
        free_basis_moments(AlgebraElement.zero(F2), 3)
    with pytest.raises(BudgetExceeded):
        vector_moments(parse_element(F2, "u[a] + u[b] + u[a^-1] + u[b^-1]"), 12, budget=1000)
