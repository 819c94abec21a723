"""Evaluable increasing functions on ``[0, inf)`` used as Orlicz functions.

Every function carries a role flag: ``"convex"`` for Orlicz functions ``M``
and ``"concave"`` for their inverses ``phi = M^{-1}``.  The flag is checked by
a sampled midpoint test when the object is created, together with strict
monotonicity on the sampled points.

Besides values, every function exposes :meth:`OrliczFunction.local_exponent`

    e(lam, t) = log(M(lam t) / M(lam)) / log t,

which is the quantity that index estimation works with.  Power-like
constructions override it with exact formulas, so that for example the
exponent of ``t^p`` is exactly ``p`` instead of a rounded quotient of logs.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidFunction

CONVEX = "convex"
CONCAVE = "concave"

_INVERSE_TOL = 1e-13


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def _opposite(role: str) -> str:
    return CONCAVE if role == CONVEX else CONVEX


class OrliczFunction:
    """Base class.  Subclasses implement :meth:`_eval` on float arrays."""

    role: str = CONVEX
    #: smallest positive argument at which the function may be evaluated
    domain_min: float = 0.0

    def __init__(self, role: str, *, check: bool = True):
        if role not in (CONVEX, CONCAVE):
            raise InvalidFunction(f"role must be {CONVEX!r} or {CONCAVE!r}, got {role!r}")
        self.role = role
        if check:
            self.verify()

    # -- evaluation -----------------------------------------------------

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t):
        arr, scalar = _as_array(t)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DomainError("Orlicz functions are evaluated on finite t >= 0")
        positive = arr > 0
        if self.domain_min > 0 and np.any(positive & (arr < self.domain_min * (1 - 1e-12))):
            raise DomainError(f"{self!r} is only defined on [{self.domain_min:.3e}, inf)")
        out = np.zeros_like(arr)
        if np.any(positive):
            out[positive] = self._eval(arr[positive])
        return float(out) if scalar else out

    def inverse(self) -> "OrliczFunction":
        """The inverse function, with the opposite role."""
        return NumericInverse(self)

    def inv(self, y, tol: float = _INVERSE_TOL):
        """Values of the inverse function."""
        return NumericInverse(self, tol, check=False)(y)

    def local_exponent(self, lam, t):
        """``log(M(lam t) / M(lam)) / log t`` for ``0 < t < 1``."""
        lam = np.asarray(lam, dtype=float)
        t = np.asarray(t, dtype=float)
        num = np.log(self(lam * t)) - np.log(self(lam))
        return num / np.log(t)

    def delta2_ratio(self, lam):
        """``M(2 lam) / M(lam)`` computed through the local exponent."""
        return 2.0 ** self.local_exponent(2.0 * np.asarray(lam, dtype=float), 0.5)

    # -- checks ---------------------------------------------------------

    def sample_points(self, n: int = 64) -> np.ndarray:
        lo = max(self.domain_min, 1e-6)
        return np.geomspace(lo, max(10.0, 10 * lo), n)

    def verify(self, n: int = 64, slack: float = 1e-10) -> None:
        """Sampled checks: ``f(0) = 0``, strict increase, and the role's midpoint test."""
        xs = self.sample_points(n)
        ys = np.asarray(self(xs), dtype=float)
        if not np.all(np.isfinite(ys)) or np.any(ys <= 0):
            raise InvalidFunction(f"{self!r} must be finite and positive for t > 0")
        if np.any(np.diff(ys) <= 0):
            raise InvalidFunction(f"{self!r} is not strictly increasing on sampled points")
        a, b = np.meshgrid(xs[::4], xs[::4])
        a, b = a.ravel(), b.ravel()
        mid = np.asarray(self(0.5 * (a + b)))
        avg = 0.5 * (np.asarray(self(a)) + np.asarray(self(b)))
        scale = slack * np.maximum(1.0, avg)
        if self.role == CONVEX:
            bad = mid > avg + scale
        else:
            bad = mid < avg - scale
        if np.any(bad):
            raise InvalidFunction(f"{self!r} failed the sampled {self.role} midpoint test")


class Power(OrliczFunction):
    """``t -> t^p``; convex for ``p >= 1`` and concave for ``p <= 1``."""

    def __init__(self, p: float, role: str | None = None):
        if not (p > 0 and math.isfinite(p)):
            raise InvalidFunction(f"power exponent must be positive and finite, got {p}")
        self.p = float(p)
        super().__init__(role or (CONVEX if p >= 1 else CONCAVE))

    def _eval(self, t):
        return t**self.p

    def inverse(self):
        return Power(1.0 / self.p, _opposite(self.role) if self.p != 1 else self.role)

    def inv(self, y, tol: float = _INVERSE_TOL):
        arr, scalar = _as_array(y)
        out = arr ** (1.0 / self.p)
        return float(out) if scalar else out

    def local_exponent(self, lam, t):
        return np.full(np.broadcast(np.asarray(lam), np.asarray(t)).shape, self.p)[()]

    def __repr__(self):
        return f"Power({self.p!r})"


class ScaledArg(OrliczFunction):
    """``t -> inner(scale * t)``."""

    def __init__(self, inner: OrliczFunction, scale: float):
        if not scale > 0:
            raise InvalidFunction("argument scale must be positive")
        self.inner = inner
        self.scale = float(scale)
        self.domain_min = inner.domain_min / self.scale
        super().__init__(inner.role, check=False)

    def _eval(self, t):
        return self.inner(self.scale * t)

    def inv(self, y, tol: float = _INVERSE_TOL):
        out = np.asarray(self.inner.inv(y, tol), dtype=float) / self.scale
        return float(out) if out.ndim == 0 else out

    def local_exponent(self, lam, t):
        return self.inner.local_exponent(self.scale * np.asarray(lam, dtype=float), t)

    def __repr__(self):
        return f"ScaledArg({self.inner!r}, {self.scale!r})"


class UnitNormalized(OrliczFunction):
    """``t -> inner(t) / inner(1)``, so the value at 1 is exactly 1."""

    def __init__(self, inner: OrliczFunction):
        self.inner = inner
        self.c = float(inner(1.0))
        self.domain_min = inner.domain_min
        super().__init__(inner.role, check=False)

    def _eval(self, t):
        out = self.inner(t) / self.c
        if np.ndim(out) == 0:
            return out
        out[t == 1.0] = 1.0
        return out

    def inv(self, y, tol: float = _INVERSE_TOL):
        arr, scalar = _as_array(y)
        out = np.asarray(self.inner.inv(arr * self.c, tol), dtype=float)
        out = np.where(arr == 1.0, 1.0, out)
        return float(out) if scalar else out

    def local_exponent(self, lam, t):
        return self.inner.local_exponent(lam, t)

    def __repr__(self):
        return f"UnitNormalized({self.inner!r})"


class GeometricMean(OrliczFunction):
    """``t -> A(t)^(1 - theta) * B(t)^theta``.

    For two concave increasing functions the weighted geometric mean is again
    concave, which is how interpolated inverse functions are formed.
    """

    def __init__(self, theta: float, a: OrliczFunction, b: OrliczFunction, role: str | None = None):
        if not 0 <= theta <= 1:
            raise InvalidFunction(f"theta must lie in [0, 1], got {theta}")
        self.theta = float(theta)
        self.a = a
        self.b = b
        self.domain_min = max(a.domain_min, b.domain_min)
        if role is None:
            role = a.role if a.role == b.role else CONCAVE
        super().__init__(role)

    def _eval(self, t):
        th = self.theta
        return np.asarray(self.a(t)) ** (1 - th) * np.asarray(self.b(t)) ** th

    def local_exponent(self, lam, t):
        th = self.theta
        return (1 - th) * np.asarray(self.a.local_exponent(lam, t)) + th * np.asarray(self.b.local_exponent(lam, t))

    def __repr__(self):
        return f"GeometricMean({self.theta!r}, {self.a!r}, {self.b!r})"


class Custom(OrliczFunction):
    """Wrap a vectorized callable."""

    def __init__(self, fn: Callable, role: str = CONVEX, name: str = "custom", domain_min: float = 0.0):
        self.fn = fn
        self.name = name
        self.domain_min = domain_min
        super().__init__(role)

    def _eval(self, t):
        return np.asarray(self.fn(t), dtype=float)

    def __repr__(self):
        return f"Custom({self.name})"


def invert_increasing(f: Callable, y: np.ndarray, tol: float = _INVERSE_TOL, lo_limit: float = 0.0) -> np.ndarray:
    """Solve ``f(x) = y`` elementwise for increasing ``f`` by bracketing bisection.

    Brackets start at ``[y/2, 2y]`` clipped to the domain and grow by a factor
    of 2 until they contain the root; bisection then runs in log space until
    the bracket is relatively narrower than ``tol``.
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    if not np.any(pos):
        return out
    yy = y[pos]
    lo = np.maximum(yy / 2, lo_limit) if lo_limit > 0 else yy / 2
    hi = np.maximum(2 * yy, 2 * lo)
    for _ in range(2100):
        flo = f(lo)
        grow = flo > yy
        if not np.any(grow):
            break
        if lo_limit > 0 and np.any(grow & (lo <= lo_limit)):
            raise DomainError("inverse value lies below the domain of the function")
        lo = np.where(grow, np.maximum(lo / 2, lo_limit), lo)
    else:
        raise InvalidFunction("could not bracket the inverse from below")
    for _ in range(2100):
        fhi = f(hi)
        grow = fhi < yy
        if not np.any(grow):
            break
        hi = np.where(grow, hi * 2, hi)
    else:
        raise InvalidFunction("could not bracket the inverse from above; function may be bounded")
    if np.any(f(lo) > f(hi)):
        raise InvalidFunction("non-monotone samples detected while inverting")
    llo, lhi = np.log(lo), np.log(hi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        fm = f(np.exp(mid))
        below = fm < yy
        llo = np.where(below, mid, llo)
        lhi = np.where(below, lhi, mid)
        if np.all(lhi - llo <= tol):
            break
    out[pos] = np.exp(0.5 * (llo + lhi))
    return out


class NumericInverse(OrliczFunction):
    """Inverse of a strictly increasing function, evaluated by bisection."""

    def __init__(self, inner: OrliczFunction, tol: float = _INVERSE_TOL, *, check: bool = True):
        self.inner = inner
        self.tol = tol
        self.domain_min = float(inner(inner.domain_min)) if inner.domain_min > 0 else 0.0
        super().__init__(_opposite(inner.role), check=check)

    def _eval(self, y):
        inner = self.inner
        return invert_increasing(lambda x: np.asarray(inner(x)), y, self.tol, inner.domain_min)

    def inverse(self):
        return self.inner

    def inv(self, y, tol: float = _INVERSE_TOL):
        return self.inner(y)

    def __repr__(self):
        return f"NumericInverse({self.inner!r})"


def orlicz_inverse(M: OrliczFunction, y, tol: float = _INVERSE_TOL):
    """``M^{-1}(y)``: exact where the function knows its inverse, else bisection."""
    return M.inv(y, tol)


def parse_orlicz(text: str) -> OrliczFunction:
    """Parse ``power:<p>`` (the only textual family)."""
    kind, _, arg = text.partition(":")
    if kind == "power":
        try:
            return Power(float(arg))
        except ValueError as exc:
            raise InvalidFunction(f"bad power exponent in {text!r}") from exc
    raise InvalidFunction(f"unknown Orlicz function {text!r}; expected power:<p>")
