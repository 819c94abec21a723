from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powers_lab.errors import BudgetExceeded, UsageError
from powers_lab.group_algebra import (
    AlgebraElement,
    PowersSchedule,
    basis,
    convolve,
    default_free_schedule,
    parse_element,
    powers_average,
    random_element,
    simplicity_witness,
)
from powers_lab.group_core import GroupSpec, Word

F2 = GroupSpec.free(2)
Z = GroupSpec.free_abelian(1)


def E(spec, text):
    return parse_element(spec, text)


def W(spec, text):
    return Word.parse(spec, text)


class TestExamples:
    def test_basis(self):
        assert basis(Word.identity(F2)) == AlgebraElement.one(F2)
        assert basis(W(F2, "a")).terms == [(W(F2, "a"), 1.0)]
        assert basis(W(F2, "a")) * basis(W(F2, "b")) == basis(W(F2, "a b"))

    def test_convolve(self):
        x = E(F2, "2*u[a] - 0.5*u[b^-1]")
        assert x * AlgebraElement.one(F2) == x
        s = E(Z, "u[1] + u[-1]")
        assert s * s == E(Z, "u[2] + 2 + u[-2]")
        assert (basis(W(F2, "a")) * basis(W(F2, "b"))) * basis(W(F2, "b^-1")) == basis(W(F2, "a"))

    def test_convolve_budget(self):
        x = random_element(F2, np.random.default_rng(0), 2, max_terms=5)
        with pytest.raises(BudgetExceeded):
            convolve(x, x, budget=len(x) ** 2 - 1)

    def test_star(self):
        a = E(F2, "(0+1i)*u[a]")
        assert a.star() == E(F2, "(0-1i)*u[a^-1]")
        b = E(F2, "(1+2i)*u[a b] + 3*u[b^2] - 1")
        assert b.star().star() == b

    def test_vee(self):
        assert E(F2, "u[a]").vee() == E(F2, "u[a^-1]")
        b = E(F2, "(1+2i)*u[a b] + 3*u[b^2]")
        assert b.vee().vee() == b
        assert b.vee() == b.conjugate_coefficients().star()

    def test_trace(self):
        assert AlgebraElement.one(F2).trace() == 1
        assert basis(W(F2, "a b")).trace() == 0
        a = E(F2, "2*u[a] + (0+1i)*u[b^-1] + 4")
        assert (a * basis(W(F2, "b"))).trace() == 1j

    def test_powers_average(self):
        Z_ = GroupSpec.free_abelian(1)
        g = Word(Z_, (3,))
        sched = PowersSchedule(tuple(Word(Z_, (j,)) for j in (1, 5, -2)))
        assert powers_average(g, sched) == basis(g)
        avg = powers_average(W(F2, "b"), PowersSchedule((W(F2, "a"), W(F2, "a^2"))))
        assert avg == E(F2, "0.5*u[a b a^-1] + 0.5*u[a^2 b a^-2]")
        assert avg.trace() == 0
        with pytest.raises(UsageError):
            powers_average(Word.identity(F2), sched_f2())

    def test_default_free_schedule(self):
        assert [str(h) for h in default_free_schedule(F2, W(F2, "b"), 3).conjugators] == ["a^2", "a^4", "a^6"]
        assert [str(h) for h in default_free_schedule(F2, W(F2, "a"), 2).conjugators] == ["b^2", "b^4"]
        with pytest.raises(UsageError):
            default_free_schedule(F2, Word.identity(F2), 2)

    def test_simplicity_witness(self):
        sched = PowersSchedule((W(F2, "a^2"), W(F2, "a^4")))
        assert simplicity_witness(AlgebraElement.one(F2), sched) == AlgebraElement.one(F2)
        b = E(F2, "1 + 0.3*u[b]")
        x = simplicity_witness(b, sched)
        assert x.allclose(E(F2, "1 + 0.15*u[a^2 b a^-2] + 0.15*u[a^4 b a^-4]"), 1e-15)
        with pytest.raises(UsageError):
            simplicity_witness(E(F2, "2 + u[a]"), sched)

    def test_text_and_json_round_trip(self):
        a = E(F2, "1 + 0.3*u[b] + (0-1i)*u[a^2 b^-1]")
        assert parse_element(F2, str(a)) == a
        assert AlgebraElement.from_json(F2, a.to_json()) == a

    def test_canonical_dust(self):
        a = AlgebraElement(F2, {W(F2, "a").data: 1.0, W(F2, "b").data: 1e-17, (): 0.0})
        assert len(a) == 1


def sched_f2():
    return PowersSchedule((W(F2, "a"),))


def test_default_schedule_conjugates_distinct():
    rng = np.random.default_rng(3)
    words = [w for w in F2.ball(3) if w]
    for _ in range(100):
        g = Word(F2, words[int(rng.integers(0, len(words)))])
        n = int(rng.integers(1, 20))
        sched = default_free_schedule(F2, g, n)
        conjugates = {g.spec.conj(h.data, g.data) for h in sched.conjugators}
        assert len(conjugates) == n


def test_simplicity_witness_preserves_trace():
    rng = np.random.default_rng(4)
    sched = default_free_schedule(F2, W(F2, "b"), 5)
    for _ in range(100):
        b = random_element(F2, rng, 2)
        b = b - b.trace() + 1
        assert abs(simplicity_witness(b, sched).trace() - 1) <= 1e-12


gauss = st.builds(complex, st.integers(-3, 3), st.integers(-3, 3))
small_terms = st.dictionaries(st.sampled_from([w for w in F2.ball(2)]), gauss, max_size=5)


@settings(max_examples=300, deadline=None)
@given(small_terms, small_terms, small_terms)
def test_ring_laws(x, y, z):
    x, y, z = (AlgebraElement(F2, t) for t in (x, y, z))
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert (x * y).star() == y.star() * x.star()
    assert (x * y).trace() == (y * x).trace()
    pos = (x.star() * x).trace()
    assert pos.imag == 0 and pos.real == sum(c.real**2 + c.imag**2 for _, c in x.items())
    assert x.star().l1() == x.l1()


@settings(max_examples=200, deadline=None)
@given(small_terms)
def test_faithfulness(terms):
    a = AlgebraElement(F2, terms)
    probes = [a.spec.inv(g) for g, _ in a.items()]
    if all((a * AlgebraElement(F2, {g: 1.0})).trace() == 0 for g in probes):
        assert not a
