from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import kesten_norm, symbol_sup_z
from powers_lab.errors import UsageError, VerificationFailure
from powers_lab.group_algebra import (
    AlgebraElement,
    default_free_schedule,
    parse_element,
    powers_average,
    random_element,
)
from powers_lab.group_core import GroupSpec, Word
from powers_lab.op_norms import (
    InterpSpec,
    NormBracket,
    apply,
    bpstar_bracket,
    duality_transfer,
    fourier_oracle_zd,
    l1_upper,
    l2_bracket_trace,
    lp_bracket,
    norm_bracket,
    ratio_estimate_l2,
    riesz_thorin_upper,
    trace_moments,
    truncated_lower,
)
from powers_lab.seq_norms import FinVector, NormSpec

F2 = GroupSpec.free(2)
Z = GroupSpec.free_abelian(1)
Z2 = GroupSpec.free_abelian(2)
SLACK = 1e-9


def E(spec, text):
    return parse_element(spec, text)


FOUR = E(F2, "u[a] + u[a^-1] + u[b] + u[b^-1]")
COS = E(Z, "u[1] + u[-1]")


class TestApply:
    def test_examples(self):
        g, h = Word.parse(F2, "a b"), Word.parse(F2, "b^-1 a")
        out = apply(AlgebraElement(F2, {g.data: 1.0}), FinVector.delta(h))
        assert out == FinVector.delta(g * h)
        xi = FinVector.from_mapping(F2, {Word.parse(F2, "a").data: 2.0, (): -1j})
        assert apply(AlgebraElement.one(F2), xi) == xi

    def test_linearity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = random_element(F2, rng, 2), random_element(F2, rng, 2)
            xi = FinVector.from_mapping(F2, {w: complex(rng.standard_normal()) for w in F2.ball(1)})
            lhs = apply(a + 2.5 * b, xi).as_dict()
            r1, r2 = apply(a, xi).as_dict(), apply(b, xi).as_dict()
            for k in set(lhs) | set(r1) | set(r2):
                assert abs(lhs.get(k, 0) - r1.get(k, 0) - 2.5 * r2.get(k, 0)) <= 1e-12


def test_l1_upper_examples():
    avg = powers_average(Word.parse(F2, "b"), default_free_schedule(F2, Word.parse(F2, "b"), 7))
    assert l1_upper(avg) == pytest.approx(1.0, abs=1e-15)
    assert l1_upper(E(F2, "u[a]")) == 1
    assert l1_upper(E(F2, "2*u[a] - u[b]")) == 3


class TestTruncatedLower:
    @pytest.mark.parametrize("norm", ["lp:2", "lp:1.5", "lp:3", "orlicz:power:2.5", "lorentz:p=2,r=1.5"])
    def test_isometry(self, norm):
        assert truncated_lower(E(F2, "u[a b]"), norm, 2) == pytest.approx(1.0, abs=1e-12)

    def test_cosine_on_z(self):
        assert truncated_lower(COS, "lp:2", 50) >= 1.99

    def test_free_sum_below_kesten(self):
        lower = truncated_lower(FOUR, "lp:2", 4)
        assert 3.0 < lower <= 2 * math.sqrt(3) + SLACK

    def test_deterministic(self):
        a = E(F2, "u[a] - 0.5*u[b a] + (0+1i)*u[b^-2]")
        assert truncated_lower(a, "lp:3", 2, seed=4) == truncated_lower(a, "lp:3", 2, seed=4)


class TestTraceBracket:
    def test_isometry(self):
        br = l2_bracket_trace(E(F2, "u[a b^2]"))
        assert (br.lower, br.upper) == (1.0, 1.0)

    def test_cosine_on_z(self):
        br = l2_bracket_trace(COS, 6)
        assert br.lower >= 1.93
        assert br.upper == 2.0

    def test_free_sum_straddles(self):
        br = l2_bracket_trace(FOUR, 6)
        assert br.lower <= 2 * math.sqrt(3) <= br.upper

    def test_budget_gives_partial(self):
        a = E(F2, "u[a] + u[b] + u[a b] + u[b^2 a]")
        br = l2_bracket_trace(a, 6, budget=2000)
        assert br.partial
        assert br.lower <= br.upper

    def test_free_family(self):
        for n in (2, 3, 6):
            b = Word.parse(F2, "b")
            br = l2_bracket_trace(powers_average(b, default_free_schedule(F2, b, n)))
            assert br.lower <= kesten_norm(n) <= br.upper <= 1.0


class TestRatioEstimate:
    def test_examples(self):
        assert ratio_estimate_l2(E(F2, "u[a]")) == 1.0
        assert abs(ratio_estimate_l2(COS, 8) - 2) <= 0.05 * 2
        with pytest.raises(UsageError):
            ratio_estimate_l2(AlgebraElement.zero(F2))

    def test_monotone_in_m(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            a = random_element(F2, rng, 2, max_terms=3)
            est = [ratio_estimate_l2(a, m) for m in range(1, 7)]
            assert all(x <= y * (1 + 1e-12) for x, y in zip(est, est[1:]))

    def test_trace_moments_consistent(self):
        mom = trace_moments(COS, 4)
        assert list(mom) == [1, 2, 6, 20, 70]


class TestInterpolation:
    def test_examples(self):
        spec = InterpSpec.between(1, 2, 4 / 3)
        assert spec.theta == pytest.approx(0.5, abs=1e-15)
        assert riesz_thorin_upper(spec, 1.0, 1.0) == 1.0
        assert riesz_thorin_upper(spec, 1.0, 0.36) == pytest.approx(0.6, rel=1e-14)
        near = InterpSpec.between(1, 2, 1 + 1e-9)
        assert riesz_thorin_upper(near, 3.0, 5.0) == pytest.approx(3.0, rel=1e-8)

    def test_lambda_rule(self):
        for p in (1.1, 1.5, 1.9):
            assert InterpSpec.between(1, 2, p).theta == pytest.approx(2 * (1 - 1 / p), abs=1e-14)

    def test_invalid(self):
        with pytest.raises(UsageError):
            InterpSpec(1, 2, 1.5, 0.9)
        with pytest.raises(UsageError):
            InterpSpec.between(1, 2, 3)

    def test_duality_record(self):
        a = E(F2, "u[a] + u[a^-1]")
        rec = duality_transfer(a, 4)
        assert rec.q == pytest.approx(4 / 3) and rec.target == a and not rec.is_identity
        assert duality_transfer(a, 2).is_identity
        assert not duality_transfer(E(F2, "u[a]"), 2).is_identity
        with pytest.raises(UsageError):
            duality_transfer(a, 1)


class TestBpstar:
    def test_self_adjoint(self):
        a = E(F2, "u[a] + u[a^-1] + 0.5")
        both = bpstar_bracket(a, 3)
        single = lp_bracket(a, 3)
        assert (both.lower, both.upper) == (single.lower, single.upper)

    def test_isometry(self):
        br = bpstar_bracket(E(F2, "u[b]"), 1.5)
        assert (br.lower, br.upper) == (1.0, 1.0)

    def test_l1_strategy(self):
        a = E(F2, "u[a] + (0+2i)*u[b a]")
        br = bpstar_bracket(a, 3, strategy="l1")
        assert br.upper == pytest.approx(3.0)
        assert br.lower == pytest.approx((1 + 2**3) ** (1 / 3))
        with pytest.raises(UsageError):
            bpstar_bracket(a, 3, strategy="magic")


class TestFourierOracle:
    def test_examples(self):
        assert fourier_oracle_zd(COS).contains(2.0)
        assert fourier_oracle_zd(E(Z2, "u[1,0] + u[0,1]")).contains(2.0)
        br = fourier_oracle_zd(E(Z, "u[5]"))
        assert (br.lower, br.upper) == (1.0, 1.0)
        with pytest.raises(UsageError):
            fourier_oracle_zd(FOUR)

    def test_contains_dense_symbol_sup(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            a = random_element(Z, rng, 4)
            coeffs = {g[0]: c for g, c in a.items()}
            assert fourier_oracle_zd(a, 8192).contains(symbol_sup_z(coeffs))


def test_bracket_soundness_on_z():
    rng = np.random.default_rng(3)
    for _ in range(40):
        a = random_element(Z, rng, 3)
        lowers = [truncated_lower(a, "lp:2", 10), l2_bracket_trace(a).lower, fourier_oracle_zd(a).lower]
        uppers = [l2_bracket_trace(a).upper, fourier_oracle_zd(a).upper, l1_upper(a)]
        assert max(lowers) <= min(uppers) + SLACK


def test_powers_average_uppers_at_most_one():
    b = Word.parse(F2, "a b")
    for n in (1, 3, 6):
        avg = powers_average(b, default_free_schedule(F2, b, n))
        for norm in ("lp:2", "lp:4/3", "lp:3", "orlicz:power:1.5", "lorentz:p=3,r=2"):
            assert norm_bracket(avg, NormSpec.parse(norm), 2).upper <= 1 + SLACK


def test_submultiplicative_upper():
    rng = np.random.default_rng(5)
    for _ in range(15):
        x, y = random_element(F2, rng, 2, max_terms=3), random_element(F2, rng, 2, max_terms=3)
        assert l2_bracket_trace(x * y, 3).upper <= l1_upper(x) * l1_upper(y) + SLACK


def test_duality_overlap_p2():
    rng = np.random.default_rng(6)
    for _ in range(10):
        a = random_element(F2, rng, 2, max_terms=4)
        assert l2_bracket_trace(a, 4).overlaps(l2_bracket_trace(a.vee(), 4))


def test_norm_bracket_validation():
    with pytest.raises(VerificationFailure):
        NormBracket(2.0, 1.0, "x", "y")
    with pytest.raises(VerificationFailure):
        NormBracket(math.nan, 1.0, "x", "y")
    br = NormBracket(1.0, 2.0, "lo", "hi", {"k": 1})
    assert br.to_json() == {"lower": 1.0, "upper": 2.0, "lower_method": "lo", "upper_method": "hi", "params": {"k": 1}}
