from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import free_ball_size, free_inverse, free_reduce, letters_from_runs
from powers_lab.errors import BudgetExceeded, UsageError
from powers_lab.group_core import GroupSpec, Word, ball, conj, inv, mul, word_length

F2 = GroupSpec.free(2)


def W(spec, text):
    return Word.parse(spec, text)


def is_reduced(runs) -> bool:
    return all(e != 0 for _, e in runs) and all(a[0] != b[0] for a, b in zip(runs, runs[1:]))


def random_free_word(rng, k, max_len=8) -> str:
    letters = "".join(chr(ord("a") + i) for i in range(k))
    letters += letters.upper()
    n = int(rng.integers(0, max_len + 1))
    return free_reduce("".join(rng.choice(list(letters), n)))


def runs_of(spec, letters: str):
    """Word from a letter string, built through the package's own multiplication."""
    w = Word.identity(spec)
    for ch in letters:
        g = ord(ch.lower()) - ord("a") + 1
        w = w * Word(spec, ((g, 1 if ch.islower() else -1),))
    return w


class TestExamples:
    def test_free_cancellation(self):
        assert mul(W(F2, "a"), W(F2, "a^-1")).is_identity

    def test_free_forced_reduction(self):
        assert mul(W(F2, "a b"), W(F2, "b^-1 a")) == W(F2, "a^2")

    def test_cyclic_product(self):
        Z5 = GroupSpec.cyclic(5)
        assert mul(Word(Z5, 3), Word(Z5, 4)).data == 2

    def test_inverses(self):
        assert inv(W(F2, "a b^2")) == W(F2, "b^-2 a^-1")
        assert inv(Word.identity(F2)).is_identity
        Z2 = GroupSpec.free_abelian(2)
        assert inv(Word(Z2, (3, -1))).data == (-3, 1)

    def test_conjugation(self):
        Z1 = GroupSpec.free_abelian(1)
        assert conj(Word(Z1, (5,)), Word(Z1, (3,))).data == (3,)
        assert str(conj(W(F2, "a"), W(F2, "b"))) == "a b a^-1"
        assert conj(W(F2, "a"), W(F2, "a^3")) == W(F2, "a^3")

    def test_ball_sizes(self):
        assert len(ball(F2, 1)) == 5
        assert len(ball(F2, 2)) == 17
        assert len(ball(GroupSpec.cyclic(4), 10)) == 4
        assert len(ball(GroupSpec.free_abelian(2), 2)) == 13

    def test_word_length(self):
        assert word_length(W(F2, "a^2 b^-1")) == 3
        assert word_length(Word.identity(F2)) == 0
        assert word_length(Word(GroupSpec.cyclic(5), 4)) == 1

    def test_mismatched_groups(self):
        with pytest.raises(UsageError):
            mul(W(F2, "a"), Word(GroupSpec.free(3), ((1, 1),)))

    def test_invalid_specs(self):
        for text in ("F0", "Zmod:1", "Zd:0", "Q"):
            with pytest.raises(UsageError):
                GroupSpec.parse(text)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("radius", range(0, 7))
def test_free_ball_matches_formula_and_enumeration(k, radius):
    spec = GroupSpec.free(k)
    words = spec.ball(radius)
    # brute force: reduce every letter string of length <= radius
    alphabet = [chr(ord("a") + i) for i in range(k)] + [chr(ord("A") + i) for i in range(k)]
    brute = {""}
    frontier = {""}
    for _ in range(radius):
        frontier = {free_reduce(w + ch) for w in frontier for ch in alphabet}
        brute |= frontier
    assert len(words) == len(set(words)) == len(brute) == free_ball_size(k, radius) == spec.ball_size(radius)
    assert {letters_from_runs(w) for w in words} == brute
    keys = [spec.sort_key(w) for w in words]
    assert keys == sorted(keys)


def test_ball_budget():
    with pytest.raises(BudgetExceeded, match="POWERS_LAB_BUDGET"):
        F2.ball(12, budget=1000)


def test_budget_env(monkeypatch):
    monkeypatch.setenv("POWERS_LAB_BUDGET", "10")
    with pytest.raises(BudgetExceeded):
        F2.ball(2)


def test_group_laws_many_cases():
    rng = np.random.default_rng(11)
    for k in (2, 3):
        spec = GroupSpec.free(k)
        for _ in range(5000):
            x, y, z = (random_free_word(rng, k) for _ in range(3))
            wx, wy, wz = (runs_of(spec, s) for s in (x, y, z))
            prod = wx * wy
            assert letters_from_runs(prod.data) == free_reduce(x + y)
            assert is_reduced(prod.data)
            assert (wx * wy) * wz == wx * (wy * wz)
            assert (wx * wx.inverse()).is_identity
            assert letters_from_runs(wx.inverse().data) == free_inverse(x)
            c = wy.conj(wx)
            assert len(c) <= 2 * len(wy) + len(wx)
            assert is_reduced(c.data)


@pytest.mark.parametrize("text", ["Z", "Zd:3", "Zmod:7"])
def test_abelian_laws(text):
    spec = GroupSpec.parse(text)
    words = spec.ball(3)
    rng = np.random.default_rng(5)
    for _ in range(2000):
        x, y, z = (Word(spec, words[int(i)]) for i in rng.integers(0, len(words), 3))
        assert (x * y) * z == x * (y * z)
        assert x * y == y * x
        assert (x * x.inverse()).is_identity
        assert x.conj(y) == y


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(-4, 4)), max_size=8))
def test_text_round_trip(runs):
    spec = GroupSpec.free(3)
    w = Word.identity(spec)
    for g, e in runs:
        if e:
            w = w * Word(spec, ((g, e),))
    assert Word.parse(spec, str(w)) == w
    assert is_reduced(w.data)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-9, 9), min_size=2, max_size=2))
def test_abelian_text_round_trip(vec):
    spec = GroupSpec.free_abelian(2)
    w = Word(spec, tuple(vec))
    assert Word.parse(spec, str(w)) == w
