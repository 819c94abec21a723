"""Norms of finitely supported sequences: ``l^p``, Orlicz (Luxemburg), Lorentz.

All norms depend only on the multiset of magnitudes.  Sums run over the
magnitudes in sorted order, so permuting a vector (in particular, translating
it by a group element) leaves every norm bit-for-bit unchanged.

The Lorentz norm ``d(beta, r)`` is defined as a supremum over bijections
``sigma``.  Because the weights ``beta_n`` are nonincreasing, the rearrangement
inequality says the supremum is attained by pairing the largest magnitudes
with the largest weights, i.e. by the nonincreasing rearrangement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidFunction, UsageError
from .group_core import GroupSpec, Word
from .orlicz_functions import (  # noqa: F401  (re-exported)
    CONCAVE,
    CONVEX,
    Custom,
    GeometricMean,
    NumericInverse,
    OrliczFunction,
    Power,
    ScaledArg,
    UnitNormalized,
    orlicz_inverse,
    parse_orlicz,
)

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class FinVector:
    """A finitely supported vector ``xi = (xi_g)`` over a group."""

    spec: GroupSpec
    entries: tuple = field(default=())

    def __post_init__(self):
        key = self.spec.sort_key
        clean = {}
        for g, v in dict(self.entries).items():
            v = complex(v)
            if v != 0:
                clean[g.data if isinstance(g, Word) else g] = v
        object.__setattr__(self, "entries", tuple(sorted(clean.items(), key=lambda kv: key(kv[0]))))

    @classmethod
    def from_mapping(cls, spec: GroupSpec, values: Mapping) -> "FinVector":
        return cls(spec, tuple(values.items()))

    @classmethod
    def delta(cls, g: Word) -> "FinVector":
        return cls(g.spec, ((g.data, 1.0),))

    @classmethod
    def from_values(cls, values: Iterable[complex], spec: GroupSpec | None = None) -> "FinVector":
        """Place the values on ``0, 1, 2, ...`` in ``Z`` (or on a ball in ``spec``)."""
        vals = list(values)
        spec = spec or GroupSpec.free_abelian(1)
        if spec == GroupSpec.free_abelian(1):
            keys = [(i,) for i in range(len(vals))]
        else:
            radius = 0
            while spec.ball_size(radius) < len(vals):
                radius += 1
            keys = spec.ball(radius)[: len(vals)]
        return cls(spec, tuple(zip(keys, vals)))

    def as_dict(self) -> dict:
        return dict(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.entries], dtype=complex)

    def __len__(self) -> int:
        return len(self.entries)


def random_values(rng, max_support: int = 50, signed: bool = True) -> np.ndarray:
    """Seeded random vector with 1 to ``max_support`` nonzero entries.

    Magnitudes are uniform in ``(0, 1]``, with occasional repeated values so
    that ties in the decreasing rearrangement are exercised.
    """
    n = int(rng.integers(1, max_support + 1))
    vals = 1.0 - rng.uniform(0.0, 1.0, n)
    if n > 1 and rng.uniform() < 0.3:
        k = int(rng.integers(2, n + 1))
        vals[:k] = vals[0]
    if signed:
        vals = vals * rng.choice([-1.0, 1.0], n)
    return vals


def magnitudes(x) -> np.ndarray:
    """Absolute values of a FinVector, mapping or array-like."""
    if isinstance(x, FinVector):
        return np.abs(x.values)
    if isinstance(x, Mapping):
        return np.abs(np.fromiter(x.values(), dtype=complex, count=len(x)))
    return np.abs(np.asarray(x, dtype=complex)).ravel()


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise UsageError(f"exponent must be in [1, inf], got {p}")
    return p


def lp_norm(x, p: float) -> float:
    """``(sum |x_g|^p)^(1/p)``, or the maximum for ``p = inf``."""
    p = _check_p(p)
    m = np.sort(magnitudes(x))
    if m.size == 0:
        return 0.0
    if math.isinf(p):
        return float(m[-1])
    top = m[-1]
    if top == 0:
        return 0.0
    if p == 1:
        return float(np.sum(m))
    return float(top * np.sum((m / top) ** p) ** (1.0 / p))


def lp_norm_batch(X: np.ndarray, p: float) -> np.ndarray:
    """Column-wise :func:`lp_norm` of a 2-d array."""
    p = _check_p(p)
    m = np.sort(np.abs(X), axis=0)
    if math.isinf(p):
        return m[-1].astype(float)
    top = m[-1]
    safe = np.where(top > 0, top, 1.0)
    if p == 1:
        return np.sum(m, axis=0)
    return np.where(top > 0, top * np.sum((m / safe) ** p, axis=0) ** (1.0 / p), 0.0)


def _require_convex(M: OrliczFunction) -> None:
    if not isinstance(M, OrliczFunction):
        raise InvalidFunction(f"expected an OrliczFunction, got {type(M).__name__}")
    if M.role != CONVEX:
        raise InvalidFunction("the Luxemburg norm needs an Orlicz function in the convex role")


def orlicz_norm(M: OrliczFunction, x, tol: float = DEFAULT_TOL) -> float:
    """Luxemburg norm ``inf{rho > 0 : sum M(|x_g| / rho) <= 1}``.

    ``rho -> sum M(|x_g| / rho)`` is continuous and strictly decreasing, so
    the infimum is the unique root of ``sum M(|x_g| / rho) = 1``.  Convexity
    with ``M(0) = 0`` brackets it in ``[max|x| / c, sum|x| / c]`` with
    ``c = M^{-1}(1)``; the root is then found by Brent's method in ``log rho``.
    """
    _require_convex(M)
    m = np.sort(magnitudes(x))
    m = m[m > 0]
    if m.size == 0:
        return 0.0
    c = float(orlicz_inverse(M, 1.0))
    lo, hi = float(m[-1]) / c, float(np.sum(m)) / c
    if m.size == 1 or lo == hi:
        return lo

    def excess(log_rho: float) -> float:
        return float(np.sum(np.asarray(M(m / math.exp(log_rho))))) - 1.0

    a, b = math.log(lo), math.log(hi)
    fa, fb = excess(a), excess(b)
    if fa < 0 or fb > 0:
        # sampled non-convexity: widen geometrically
        while fa < 0:
            a -= math.log(2.0)
            fa = excess(a)
        while fb > 0:
            b += math.log(2.0)
            fb = excess(b)
    if fa == 0:
        return math.exp(a)
    if fb == 0:
        return math.exp(b)
    root = brentq(excess, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    rho = math.exp(root)
    if abs(excess(root)) > max(tol, 1e-9):
        raise InvalidFunction(f"Luxemburg root not resolved: residual {excess(root):.3e}")
    return rho


def orlicz_residual(M: OrliczFunction, x, rho: float) -> float:
    """``sum M(|x_g| / rho) - 1``."""
    m = np.sort(magnitudes(x))
    return float(np.sum(np.asarray(M(m / rho)))) - 1.0


def orlicz_norm_batch(M: OrliczFunction, X: np.ndarray, iters: int = 80) -> np.ndarray:
    """Column-wise Luxemburg norms by vectorized bisection in ``log rho``.

    For ``Power(p)`` this reduces to :func:`lp_norm_batch`.
    """
    _require_convex(M)
    if isinstance(M, Power):
        return lp_norm_batch(X, M.p)
    A = np.sort(np.abs(X), axis=0)
    c = float(orlicz_inverse(M, 1.0))
    top = A[-1]
    nz = top > 0
    out = np.zeros(A.shape[1])
    if not np.any(nz):
        return out
    A = A[:, nz]
    lo = np.log(A[-1] / c)
    hi = np.log(np.sum(A, axis=0) / c)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s = np.sum(M(A / np.exp(mid)), axis=0)
        big = s > 1.0
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    out[nz] = np.exp(0.5 * (lo + hi))
    return out


# ----------------------------------------------------------------------
# Lorentz norms


def _beta_pr(n: np.ndarray, s: float) -> np.ndarray:
    """``n^s - (n-1)^s`` without cancellation: ``n^s * (1 - (1 - 1/n)^s)``."""
    n = np.asarray(n, dtype=float)
    out = np.ones_like(n)
    big = n > 1
    nb = n[big]
    out[big] = nb**s * -np.expm1(s * np.log1p(-1.0 / nb))
    return out


@dataclass
class LorentzWeights:
    """Weights ``beta_n = n^(r/p) - (n-1)^(r/p)`` with a cached prefix."""

    p: float
    r: float
    _cache: np.ndarray = field(default_factory=lambda: np.ones(0), repr=False)

    def __post_init__(self):
        if not (1 <= self.r < self.p < math.inf):
            raise UsageError(f"Lorentz weights need 1 <= r < p < inf, got p={self.p}, r={self.r}")
        self.p = float(self.p)
        self.r = float(self.r)

    @property
    def exponent(self) -> float:
        return self.r / self.p

    def __call__(self, count: int) -> np.ndarray:
        """``beta_1, ..., beta_count``."""
        if count > self._cache.size:
            size = max(count, 2 * self._cache.size, 64)
            self._cache = _beta_pr(np.arange(1, size + 1), self.exponent)
        return self._cache[:count]

    def partial_sum(self, n: int) -> float:
        """``sum_{k <= n} beta_k = n^(r/p)``, which is unbounded in ``n``."""
        return float(n) ** self.exponent

    @property
    def admissible(self) -> bool:
        """``beta_1 = 1``, nonincreasing, tending to 0, with divergent sum.

        For this family these hold exactly because ``0 < r/p < 1``.
        """
        return 0 < self.exponent < 1


def lorentz_beta_norm(beta, r: float, x) -> float:
    """``(sum_n (x*_n)^r beta_n)^(1/r)`` with ``x*`` the nonincreasing rearrangement.

    ``beta`` is a :class:`LorentzWeights` or any callable ``count -> weights``.
    """
    r = float(r)
    if not r >= 1 or math.isinf(r):
        raise UsageError(f"Lorentz exponent r must be in [1, inf), got {r}")
    m = np.sort(magnitudes(x))[::-1]
    m = m[m > 0]
    if m.size == 0:
        return 0.0
    w = np.asarray(beta(m.size), dtype=float)
    top = m[0]
    terms = np.sort((m / top) ** r * w)
    return float(top * np.sum(terms) ** (1.0 / r))


def lorentz_beta_norm_batch(beta, r: float, X: np.ndarray) -> np.ndarray:
    A = -np.sort(-np.abs(X), axis=0)
    w = np.asarray(beta(A.shape[0]), dtype=float)[:, None]
    top = A[0]
    safe = np.where(top > 0, top, 1.0)
    s = np.sum((A / safe) ** r * w, axis=0)
    return np.where(top > 0, top * s ** (1.0 / r), 0.0)


def _check_pr(p: float, r: float) -> None:
    if not (1 < r < p < math.inf):
        raise UsageError(f"l^(p,r) needs 1 < r < p < inf, got p={p}, r={r}")


def lorentz_pr_norm(p: float, r: float, x) -> float:
    """``(p/r)^(1/r) * ||x||_(beta, r)`` with ``beta_n = n^(r/p) - (n-1)^(r/p)``."""
    _check_pr(p, r)
    return (p / r) ** (1.0 / r) * lorentz_beta_norm(LorentzWeights(p, r), r, x)


def lorentz_pr_norm_batch(p: float, r: float, X: np.ndarray) -> np.ndarray:
    _check_pr(p, r)
    return (p / r) ** (1.0 / r) * lorentz_beta_norm_batch(LorentzWeights(p, r), r, X)


def lorentz_pr_integral(p: float, r: float, x) -> float:
    """Independent evaluation from the distribution function.

    Uses ``||x||_(p,r)^r = p * int_0^inf s^(r-1) d(s)^(r/p) ds`` with the
    distribution ``d(s) = #{g : |x_g| > s}``, which is piecewise constant.
    On each constancy interval ``(v_(k+1), v_k]`` the integrand is a power of
    ``s`` and the antiderivative is closed form, giving
    ``(p/r) * sum_k k^(r/p) (v_k^r - v_(k+1)^r)`` over the distinct levels.
    """
    _check_pr(p, r)
    m = magnitudes(x)
    m = m[m > 0]
    if m.size == 0:
        return 0.0
    levels, counts = np.unique(m, return_counts=True)
    levels, counts = levels[::-1], counts[::-1]
    cum = np.cumsum(counts)
    top = levels[0]
    v = levels / top
    nxt = np.append(v[1:], 0.0)
    total = float(np.sum(np.sort(cum.astype(float) ** (r / p) * (v**r - nxt**r))))
    return top * ((p / r) * total) ** (1.0 / r)


# ----------------------------------------------------------------------
# norm specs


def parse_number(text: str) -> float:
    """Parse ``"1.5"`` or an exact fraction such as ``"4/3"``."""
    return float(Fraction(text.strip()))


@dataclass(frozen=True)
class NormSpec:
    """A parsed norm specification such as ``lp:2`` or ``lorentz:p=2,r=1.5``."""

    kind: str
    p: float = 2.0
    r: float | None = None
    orlicz: OrliczFunction | None = field(default=None, compare=False)
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        t = text.strip()
        kind, _, rest = t.partition(":")
        try:
            if kind == "lp":
                p = math.inf if rest in ("inf", "infinity") else parse_number(rest)
                _check_p(p)
                return cls("lp", p=p, text=t)
            if kind == "orlicz":
                M = parse_orlicz(rest)
                _require_convex(M)
                return cls("orlicz", p=getattr(M, "p", math.nan), orlicz=M, text=t)
            if kind == "lorentz":
                params = dict(kv.split("=", 1) for kv in rest.split(","))
                p, r = parse_number(params["p"]), parse_number(params["r"])
                _check_pr(p, r)
                return cls("lorentz", p=p, r=r, text=t)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad norm spec {text!r}") from exc
        raise UsageError(f"bad norm spec {text!r}; expected lp:<p>, orlicz:power:<p> or lorentz:p=<p>,r=<r>")

    @classmethod
    def lp(cls, p: float) -> "NormSpec":
        return cls("lp", p=float(p), text=f"lp:{p}")

    @property
    def is_l2(self) -> bool:
        return self.kind == "lp" and self.p == 2.0

    def __call__(self, x) -> float:
        if self.kind == "lp":
            return lp_norm(x, self.p)
        if self.kind == "orlicz":
            return orlicz_norm(self.orlicz, x)
        return lorentz_pr_norm(self.p, self.r, x)

    def batch(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "lp":
            return lp_norm_batch(X, self.p)
        if self.kind == "orlicz":
            return orlicz_norm_batch(self.orlicz, X)
        return lorentz_pr_norm_batch(self.p, self.r, X)

    def __str__(self) -> str:
        return self.text or self.kind
