"""Build an Orlicz function ``N`` so that ``l^M`` is an interpolation space of ``(l^p, l^N)``.

Pipeline, for a convex ``M`` with ``M(1) = 1`` and grid indices in ``(1, inf)``:

1. ``phi = M^{-1}`` has indices ``0 < alpha0(phi) <= alpha1(phi) < 1``.
2. ``eps = min(alpha0(phi), 1 - alpha1(phi)) / p`` and ``gamma = 1 - p eps``;
   the interpolation parameter is ``theta = gamma``.
3. Pick ``q0 < alpha0(phi)`` and ``q1 > alpha1(phi)``, set
   ``s_i = (q_i - eps) / gamma``, and normalize ``phi`` to ``phi0`` with
   ``phi0(lam) t^q1 <= phi0(lam t) <= phi0(lam) t^q0`` for ``t <= t0``.
4. Build the concave piece ``f0`` and a scale ``tau < t0``.
5. Build ``psi`` level by level on ``[tau^(n+1), tau^n]`` from scaled copies
   of ``f0`` or ``f1(t) = t^s1``, steering ``t^eps psi(t)^gamma`` to stay
   within a fixed factor of ``phi0``.
6. ``N = psi^{-1}``; then ``t^eps psi(t)^gamma`` (the inverse of the
   interpolated Orlicz function) is equivalent to ``phi`` at zero.

Index sets are suprema and infima over continua, so every estimate here is a
grid estimate; each later stage re-verifies what it relies on, so a poor
estimate surfaces as a :class:`ConstructionFailure` rather than a silent
error.  The finite depth ``N`` truncates the infinite construction:
evaluating ``psi`` below ``tau^N`` raises :class:`DomainError`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConstructionFailure, DomainError, InvalidFunction, UsageError
from .orlicz_functions import (
    CONCAVE,
    CONVEX,
    GeometricMean,
    OrliczFunction,
    Power,
    ScaledArg,
    UnitNormalized,
)

DEFAULT_T0 = 0.5
EQUIV_SLACK = 1e-12


# ----------------------------------------------------------------------
# indices


@dataclass(frozen=True)
class IndexEstimate:
    """Grid estimates of ``alpha0(M, t0)`` and ``alpha1(M, t0)``.

    ``grid_tol`` is the largest change of the local exponent between
    neighbouring grid nodes, a measure of grid resolution.
    """

    alpha0: float
    alpha1: float
    t0: float
    lambdas: tuple
    ts: tuple
    grid_tol: float

    def to_json(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "t0": self.t0,
            "lambda_range": [min(self.lambdas), max(self.lambdas)],
            "t_range": [min(self.ts), max(self.ts)],
            "grid_shape": [len(self.lambdas), len(self.ts)],
            "grid_tol": self.grid_tol,
        }


def default_lambda_grid(lo: float = 1e-8, count: int = 49) -> np.ndarray:
    return np.geomspace(lo, 1.0, count)


def default_t_grid(t0: float = DEFAULT_T0, lo: float = 1e-8, count: int = 49) -> np.ndarray:
    return np.geomspace(lo, t0, count)


def estimate_indices(M: OrliczFunction, t0: float = DEFAULT_T0, lambdas=None, ts=None) -> IndexEstimate:
    """Min and max of ``e(lam, t) = log(M(lam t)/M(lam)) / log t`` over the grid.

    Since ``t < 1``, a bounded ratio ``M(lam t) / (M(lam) t^r)`` on the grid
    is equivalent to ``r`` lying between these exponent statistics, so they
    estimate ``alpha0`` and ``alpha1``.
    """
    if not 0 < t0 <= 1:
        raise UsageError("t0 must lie in (0, 1]")
    lam = np.asarray(default_lambda_grid() if lambdas is None else lambdas, dtype=float)
    t = np.asarray(default_t_grid(t0) if ts is None else ts, dtype=float)
    if np.any(lam <= 0) or np.any(lam > 1) or np.any(t <= 0) or np.any(t > t0) or np.any(t >= 1):
        raise UsageError("grids must satisfy 0 < lambda <= 1 and 0 < t <= t0, t < 1")
    e = np.asarray(M.local_exponent(lam[:, None], t[None, :]), dtype=float)
    e = np.broadcast_to(e, (lam.size, t.size))
    if not np.all(np.isfinite(e)):
        raise InvalidFunction(f"non-finite local exponents for {M!r}")
    tol = 0.0
    if lam.size > 1:
        tol = max(tol, float(np.max(np.abs(np.diff(e, axis=0)))))
    if t.size > 1:
        tol = max(tol, float(np.max(np.abs(np.diff(e, axis=1)))))
    return IndexEstimate(float(e.min()), float(e.max()), float(t0), tuple(lam.tolist()), tuple(t.tolist()), tol)


# ----------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class Normalization:
    """``N(t) = M(t1 t) / M(t1)`` with the two-sided power bounds verified for ``t <= t0``."""

    function: OrliczFunction
    t1: float
    t0: float
    margin: float
    beta0: float
    beta1: float


def _power_bound_margin(N: OrliczFunction, beta0: float, beta1: float, lam, t) -> float:
    e = np.asarray(N.local_exponent(lam[:, None], t[None, :]), dtype=float)
    return float(min(np.min(e - beta0), np.min(beta1 - e)))


def normalize_function(
    M: OrliczFunction,
    beta0: float,
    beta1: float,
    t0: float = DEFAULT_T0,
    lambdas=None,
    ts=None,
    max_halvings: int = 60,
) -> Normalization:
    """Find ``t1`` with ``N(lam) t^beta1 <= N(lam t) <= N(lam) t^beta0`` on the grid.

    ``N(t) = M(t1 t) / M(t1)``; ``t1`` runs through ``1, 1/2, 1/4, ...``
    until grid verification passes.
    """
    if not beta0 < beta1:
        raise UsageError("need beta0 < beta1")
    lam = np.asarray(default_lambda_grid() if lambdas is None else lambdas, dtype=float)
    t = np.asarray(default_t_grid(t0) if ts is None else ts, dtype=float)
    est = estimate_indices(M, t0, lam, t)
    if not (beta0 < est.alpha0 + est.grid_tol and beta1 > est.alpha1 - est.grid_tol):
        raise UsageError(
            f"need beta0 < alpha0 and beta1 > alpha1; got beta=({beta0}, {beta1}), alpha=({est.alpha0}, {est.alpha1})"
        )
    best = -math.inf
    t1 = 1.0
    for _ in range(max_halvings + 1):
        if t1 == 1.0:
            N = M if M(1.0) == 1.0 else UnitNormalized(M)
        else:
            N = UnitNormalized(ScaledArg(M, t1))
        margin = _power_bound_margin(N, beta0, beta1, lam, t)
        best = max(best, margin)
        if margin >= 0:
            return Normalization(N, t1, float(t0), margin, float(beta0), float(beta1))
        t1 /= 2
    raise ConstructionFailure("normalize", "power bounds not verified for any scale t1", best)


# ----------------------------------------------------------------------
# the f0 lemma


@dataclass(frozen=True)
class F0Params:
    """``f0 = g_omega`` (or ``t^s1`` when ``s0 = s1``) with its root ``tau``.

    ``g_omega(t) = 1 + (s1/omega)(t^omega - 1)``.
    """

    s0: float
    s1: float
    omega: float
    tau_root: float
    t0: float
    power_branch: bool
    residuals: dict = field(default_factory=dict)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.power_branch:
            return t**self.s1
        return 1.0 + (self.s1 / self.omega) * (t**self.omega - 1.0)

    def fprime(self, t):
        t = np.asarray(t, dtype=float)
        if self.power_branch:
            return self.s1 * t ** (self.s1 - 1.0)
        return self.s1 * t ** (self.omega - 1.0)

    def finv(self, y):
        y = np.asarray(y, dtype=float)
        if self.power_branch:
            return y ** (1.0 / self.s1)
        return (1.0 + (y - 1.0) * self.omega / self.s1) ** (1.0 / self.omega)

    def c_omega(self) -> float:
        return c_omega(self.s0, self.s1, self.omega)

    def conditions(self, tol: float = 1e-10) -> dict:
        """Residuals of the five lemma conditions (all should be <= tol)."""
        tau = self.tau_root
        res = {
            "f(1)=1": abs(float(self.f(1.0)) - 1.0),
            "f'(1)=s1": abs(float(self.fprime(1.0)) - self.s1),
            "0<tau<t0": 0.0 if 0 < tau < self.t0 else abs(tau - min(max(tau, 0.0), self.t0)) + tol + 1,
            "f(tau)=tau^s0": abs(float(self.f(tau)) - tau**self.s0),
            "f'(tau)<=s1 tau^(s1-1)": max(0.0, float(self.fprime(tau)) - self.s1 * tau ** (self.s1 - 1.0)),
        }
        return res

    def to_json(self) -> dict:
        return {
            "s0": self.s0,
            "s1": self.s1,
            "omega": self.omega,
            "tau_root": self.tau_root,
            "t0": self.t0,
            "power_branch": self.power_branch,
            "residuals": self.residuals,
        }


def c_omega(s0: float, s1: float, omega: float) -> float:
    """``exp(-(1/(omega - s0)) log(s1/s0))``, the critical point of ``h_omega``."""
    return math.exp(-math.log(s1 / s0) / (omega - s0))


def build_f0(t0: float, s0: float, s1: float, tol: float = 1e-10, grid: int = 2001, max_steps: int = 60) -> F0Params:
    """Construct ``f0`` and ``tau`` with ``f(1)=1``, ``f'(1)=s1``, ``0<tau<t0``,
    ``f(tau)=tau^s0`` and ``f'(tau) <= s1 tau^(s1-1)``.

    For ``s0 < s1``: try ``omega = 1``; if ``c_1 > t0``, move ``omega`` toward
    ``s1`` (halving the gap each step) until ``g_omega`` is within ``delta/2``
    of ``t^s1`` on a ``[t0, 1]`` grid, where ``delta`` is the minimum of
    ``t^s0 - t^s1`` on ``[t0, c_1]``.  The root ``tau`` of
    ``h_omega = g_omega - t^s0`` on ``(0, c_omega)`` is found by Brent's method.
    """
    if not (0 < s0 <= s1 < 1):
        raise UsageError(f"need 0 < s0 <= s1 < 1, got s0={s0}, s1={s1}")
    if not 0 < t0 < 1:
        raise UsageError(f"need 0 < t0 < 1, got {t0}")
    if s0 == s1:
        params = F0Params(s0, s1, s1, t0 / 2, t0, True)
        return _finish_f0(params, tol)

    def root(omega: float) -> float:
        c = c_omega(s0, s1, omega)

        def h(t):
            return 1.0 + (s1 / omega) * (t**omega - 1.0) - t**s0

        return brentq(h, 0.0, c, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    c1 = c_omega(s0, s1, 1.0)
    if c1 <= t0:
        return _finish_f0(F0Params(s0, s1, 1.0, root(1.0), t0, False), tol)
    ts = np.linspace(t0, c1, grid)
    delta = float(np.min(np.abs(ts**s0 - ts**s1)))
    check = np.linspace(t0, 1.0, grid)
    target = check**s1
    for k in range(1, max_steps + 1):
        omega = s1 + (1.0 - s1) * 0.5**k
        g = 1.0 + (s1 / omega) * (check**omega - 1.0)
        if float(np.max(np.abs(g - target))) < delta / 2:
            tau = root(omega)
            if tau < t0:
                return _finish_f0(F0Params(s0, s1, omega, tau, t0, False), tol)
    raise ConstructionFailure("build_f0", f"no omega in {max_steps} steps gives tau < t0={t0}")


def _finish_f0(params: F0Params, tol: float) -> F0Params:
    res = params.conditions(tol)
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        raise ConstructionFailure("build_f0", f"lemma conditions violated: {bad}", -max(bad.values()))
    return F0Params(params.s0, params.s1, params.omega, params.tau_root, params.t0, params.power_branch, res)


# ----------------------------------------------------------------------
# the inductive psi


class PiecewisePsi(OrliczFunction):
    """Concave ``psi`` with ``psi(1) = 1``, built on ``[tau^N, 1]`` level by level.

    On ``[tau^(n+1), tau^n]``: ``psi(t) = psi(tau^n) f_eta(n)(tau^-n t)`` with
    ``f_0`` from :func:`build_f0` and ``f_1(t) = t^s1``; for ``t > 1``,
    ``psi(t) = 1 + s1 (t - 1)``.
    """

    def __init__(self, f0: F0Params, eta: tuple, anchors: np.ndarray, eps: float, gamma: float, q0: float, q1: float):
        self.f0 = f0
        self.tau = f0.tau_root
        self.s0 = f0.s0
        self.s1 = f0.s1
        self.eta = tuple(int(b) for b in eta)
        self.anchors = np.asarray(anchors, dtype=float)
        self.depth = len(self.eta)
        self.eps = eps
        self.gamma = gamma
        self.q0 = q0
        self.q1 = q1
        self.tau_pows = self.tau ** np.arange(self.depth + 1, dtype=float)
        self.domain_min = float(self.tau_pows[-1])
        super().__init__(CONCAVE)

    @property
    def tau_scale(self) -> float:
        return self.tau

    def _level(self, t: np.ndarray) -> np.ndarray:
        n = np.floor(np.log(t) / math.log(self.tau)).astype(int)
        n = np.clip(n, 0, self.depth - 1)
        # settle rounding at the level boundaries
        n = np.where((n > 0) & (t > self.tau_pows[np.maximum(n, 0)]), n - 1, n)
        n = np.where((n < self.depth - 1) & (t < self.tau_pows[np.minimum(n + 1, self.depth)]), n + 1, n)
        return n

    def _piece(self, bit: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.where(bit == 0, self.f0.f(u), u**self.s1)

    def _piece_prime(self, bit: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.where(bit == 0, self.f0.fprime(u), self.s1 * u ** (self.s1 - 1.0))

    def _eval(self, t):
        out = np.empty_like(t)
        big = t > 1
        out[big] = 1.0 + self.s1 * (t[big] - 1.0)
        small = ~big
        if np.any(small):
            ts = t[small]
            n = self._level(ts)
            bits = np.asarray(self.eta)[n]
            u = ts / self.tau_pows[n]
            out[small] = self.anchors[n] * self._piece(bits, u)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.domain_min * (1 - 1e-12)):
            raise DomainError("derivative below tau^N")
        out = np.full_like(t, self.s1)
        small = t <= 1
        n = self._level(t[small])
        bits = np.asarray(self.eta)[n]
        u = t[small] / self.tau_pows[n]
        out[small] = self.anchors[n] / self.tau_pows[n] * self._piece_prime(bits, u)
        return out

    def one_sided_derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """``(D-, D+)`` at the anchors ``tau^n``, ``n = 0..N-1``, in closed form.

        ``D-`` comes from the piece on ``[tau^(n+1), tau^n]`` (at its right
        end ``u = 1``) and ``D+`` from the piece above (at ``u = tau``); above
        ``t = 1`` the slope is ``s1``.
        """
        n = np.arange(self.depth)
        dminus = self.anchors[n] / self.tau_pows[n] * self.s1
        dplus = np.empty(self.depth)
        dplus[0] = self.s1
        if self.depth > 1:
            m = n[1:] - 1
            bits = np.asarray(self.eta)[m]
            dplus[1:] = self.anchors[m] / self.tau_pows[m] * self._piece_prime(bits, np.full(m.size, self.tau))
        return dminus, dplus

    def inverse(self) -> "PiecewisePsiInverse":
        return PiecewisePsiInverse(self)

    def inv(self, y, tol: float = 0.0):
        return self.inverse()(y)

    def sample_points(self, n: int = 64) -> np.ndarray:
        return np.geomspace(self.domain_min, 10.0, n)

    def anchor_rows(self, phi0: OrliczFunction | None = None) -> list[dict]:
        rows = []
        for k in range(self.depth + 1):
            row = {
                "n": k,
                "t": float(self.tau_pows[k]),
                "psi": float(self.anchors[k]),
                "eta": self.eta[k] if k < self.depth else "",
            }
            if phi0 is not None:
                row["phi0"] = float(phi0(self.tau_pows[k]))
            rows.append(row)
        return rows

    def anchor_csv(self, phi0: OrliczFunction | None = None) -> str:
        rows = self.anchor_rows(phi0)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def __repr__(self):
        return f"PiecewisePsi(tau={self.tau!r}, s0={self.s0!r}, s1={self.s1!r}, depth={self.depth})"


class PiecewisePsiInverse(OrliczFunction):
    """``N = psi^{-1}`` in closed form, piece by piece."""

    def __init__(self, psi: PiecewisePsi):
        self.psi = psi
        self.domain_min = float(psi.anchors[-1])
        self._rev = psi.anchors[::-1].copy()
        super().__init__(CONVEX)

    def _eval(self, y):
        psi = self.psi
        out = np.empty_like(y)
        big = y > 1
        out[big] = 1.0 + (y[big] - 1.0) / psi.s1
        small = ~big
        if np.any(small):
            ys = y[small]
            # level n with anchors[n+1] <= y <= anchors[n]
            k = np.searchsorted(self._rev, ys, side="left")
            n = np.clip(psi.depth - k, 0, psi.depth - 1)
            bits = np.asarray(psi.eta)[n]
            v = ys / psi.anchors[n]
            u = np.where(bits == 0, psi.f0.finv(np.minimum(v, 1.0)), np.minimum(v, 1.0) ** (1.0 / psi.s1))
            out[small] = psi.tau_pows[n] * u
        return out

    def inverse(self) -> PiecewisePsi:
        return self.psi

    def inv(self, y, tol: float = 0.0):
        return self.psi(y)

    def sample_points(self, n: int = 64) -> np.ndarray:
        return np.geomspace(self.domain_min, 10.0, n)

    def __repr__(self):
        return f"PiecewisePsiInverse({self.psi!r})"


@dataclass(frozen=True)
class DiscEstReport:
    """Log-margins of ``(tau^n)^eps psi^gamma <= phi0 <= tau^(gamma(s0-s1)) (tau^n)^eps psi^gamma``."""

    lower_margins: np.ndarray
    upper_margins: np.ndarray

    @property
    def min_margin(self) -> float:
        return float(min(self.lower_margins.min(), self.upper_margins.min()))


def disc_est(psi: PiecewisePsi, phi0: OrliczFunction) -> DiscEstReport:
    t = psi.tau_pows
    low = psi.eps * np.log(t) + psi.gamma * np.log(psi.anchors)
    mid = np.log(np.asarray(phi0(t)))
    high = low + psi.gamma * (psi.s0 - psi.s1) * math.log(psi.tau)
    return DiscEstReport(mid - low, high - mid)


def build_psi(
    phi0: OrliczFunction,
    q0: float,
    q1: float,
    eps: float,
    gamma: float,
    depth: int,
    t0: float = DEFAULT_T0,
    f0: F0Params | None = None,
    tol: float = 1e-12,
) -> PiecewisePsi:
    """Run the inductive construction to ``depth`` levels.

    At level ``n`` the branch test
    ``(tau^n)^eps psi(tau^n)^gamma tau^(eps + gamma s0) <= phi0(tau^(n+1))``
    selects ``eta(n) = 0`` (next anchor ratio ``tau^s0``, piece ``f0``);
    otherwise ``eta(n) = 1`` (ratio ``tau^s1``, piece ``t^s1``).
    """
    if depth < 1:
        raise UsageError("depth must be >= 1")
    if phi0.role != CONCAVE:
        raise InvalidFunction("phi0 must be in the concave role")
    if abs(float(phi0(1.0)) - 1.0) > 1e-12:
        raise UsageError("phi0 must satisfy phi0(1) = 1")
    if not (gamma > 0 and eps > 0):
        raise UsageError("need eps > 0 and gamma > 0")
    s0 = (q0 - eps) / gamma
    s1 = (q1 - eps) / gamma
    if f0 is None:
        f0 = build_f0(t0, s0, s1)
    elif abs(f0.s0 - s0) > 1e-12 or abs(f0.s1 - s1) > 1e-12:
        raise UsageError("f0 was built for different s0, s1")
    tau = f0.tau_root
    ratio0, ratio1 = tau**s0, tau**s1
    anchors = [1.0]
    eta = []
    for n in range(depth):
        tn = tau**n
        lhs = tn**eps * anchors[n] ** gamma * tau ** (eps + gamma * s0)
        if lhs <= float(phi0(tau ** (n + 1))):
            eta.append(0)
            anchors.append(anchors[n] * ratio0)
        else:
            eta.append(1)
            anchors.append(anchors[n] * ratio1)
    psi = PiecewisePsi(f0, tuple(eta), np.array(anchors), eps, gamma, q0, q1)
    report = disc_est(psi, phi0)
    if report.min_margin < -tol:
        n_bad = int(np.argmin(np.minimum(report.lower_margins, report.upper_margins)))
        raise ConstructionFailure("build_psi", f"DiscEst violated at anchor n={n_bad}", report.min_margin)
    return psi


# ----------------------------------------------------------------------
# verifications


@dataclass(frozen=True)
class ContEstReport:
    """Log-margins of the two continuous estimates on a grid."""

    points: np.ndarray
    lower_margins: np.ndarray
    upper_margins: np.ndarray
    lower_constant: float
    upper_constant: float

    @property
    def min_margin(self) -> float:
        return float(min(self.lower_margins.min(), self.upper_margins.min()))

    @property
    def ok(self) -> bool:
        return self.min_margin >= -1e-12

    def to_json(self) -> dict:
        return {
            "points": int(self.points.size),
            "min_lower_margin": float(self.lower_margins.min()),
            "min_upper_margin": float(self.upper_margins.min()),
            "lower_constant": self.lower_constant,
            "upper_constant": self.upper_constant,
            "ok": self.ok,
        }


def check_cont_est(psi: PiecewisePsi, phi0: OrliczFunction, eps: float, gamma: float, q1: float, grid=None) -> ContEstReport:
    """Check ``tau^q1 A(t) <= phi0(t) <= tau^(gamma(s0-s1)) tau^(-eps-gamma s1) A(t)``,
    ``A(t) = t^eps psi(t)^gamma``, on ``grid`` (default: 1000 log-spaced points in ``[tau^N, 1]``).

    Margins are reported as differences of logarithms, so a margin of ``-1e-12``
    is a relative violation of about ``1e-12``.  Violations are reported, not raised.
    """
    t = np.asarray(np.geomspace(psi.domain_min, 1.0, 1000) if grid is None else grid, dtype=float)
    if np.any(t < psi.domain_min * (1 - 1e-12)) or np.any(t > 1):
        raise UsageError("grid must lie in [tau^N, 1]")
    tau = psi.tau
    log_a = eps * np.log(t) + gamma * np.log(np.asarray(psi(t)))
    log_phi = np.log(np.asarray(phi0(t)))
    lower_c = q1 * math.log(tau)
    upper_c = (gamma * (psi.s0 - psi.s1) - eps - gamma * psi.s1) * math.log(tau)
    return ContEstReport(t, log_phi - (lower_c + log_a), (upper_c + log_a) - log_phi, math.exp(lower_c), math.exp(upper_c))


@dataclass(frozen=True)
class EquivalenceWitness:
    """``c0^-1 N(t / c1) <= M(t) <= c0 N(c1 t)`` on the grid ``[lo, t0]``."""

    c0: float
    c1: float
    t0: float
    lo: float
    margin: float
    ok: bool

    def to_json(self) -> dict:
        return {"c0": self.c0, "c1": self.c1, "t0": self.t0, "grid_lo": self.lo, "margin": self.margin, "ok": self.ok}


def default_lattice(steps_per_octave: int = 12, octaves: int = 10) -> np.ndarray:
    return 2.0 ** (np.arange(steps_per_octave * octaves + 1) / steps_per_octave)


def check_equivalent_at_zero(
    M: OrliczFunction,
    N: OrliczFunction,
    grid=None,
    t0: float = DEFAULT_T0,
    lattice=None,
    points: int = 400,
) -> EquivalenceWitness:
    """Search a log-spaced ``(c0, c1)`` lattice for an equivalence witness near 0.

    The default grid runs from the larger of the two domain minima (or
    ``1e-12 t0`` when both are 0) to ``t0``.  For each ``c1`` only the grid
    points with ``t / c1`` inside the domain of ``N`` are used, and the
    smallest admissible ``c0`` follows in closed form; among passing lattice
    pairs the one with the smallest ``c0 * c1`` wins.  Log-margins down to
    ``-EQUIV_SLACK`` count as passing (rounding noise).  On failure ``ok`` is
    False and ``margin`` is the best (negative) log-margin found.
    """
    lat = np.asarray(default_lattice() if lattice is None else lattice, dtype=float)
    if np.any(lat < 1):
        raise UsageError("lattice values must be >= 1")
    if grid is None:
        lo = max(M.domain_min, N.domain_min)
        if lo <= 0:
            lo = t0 * 1e-12
        t = np.geomspace(lo, t0, points)
    else:
        t = np.sort(np.asarray(grid, dtype=float))
        t0 = float(t[-1])
    log_m = np.log(np.asarray(M(t)))
    log_lat = np.log(lat)
    best = None
    for j, c1 in enumerate(lat):
        use = t >= N.domain_min * c1
        if use.sum() < min(2, t.size):
            continue
        tu = t[use]
        need = max(
            float(np.max(log_m[use] - np.log(np.asarray(N(c1 * tu))))),
            float(np.max(np.log(np.asarray(N(tu / c1))) - log_m[use])),
            0.0,
        )
        i = min(int(np.searchsorted(log_lat, need - EQUIV_SLACK)), lat.size - 1)
        margin = float(log_lat[i] - need)
        ok = margin >= -EQUIV_SLACK
        cand = (ok, -(log_lat[i] + log_lat[j]) if ok else margin, margin, lat[i], c1, float(tu[0]))
        if best is None or cand[:2] > best[:2]:
            best = cand
    if best is None:
        return EquivalenceWitness(math.nan, math.nan, float(t0), math.nan, -math.inf, False)
    ok, _, margin, c0, c1, lo = best
    return EquivalenceWitness(float(c0), float(c1), float(t0), lo, margin, bool(ok))


@dataclass(frozen=True)
class Delta2Report:
    """Observed ``sup N(2 lam) / N(lam)`` on a grid in ``(0, lam0]``."""

    sup: float
    argmax: float
    lam0: float
    points: int

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.sup)

    def to_json(self) -> dict:
        return {"sup": self.sup, "argmax": self.argmax, "lam0": self.lam0, "points": self.points, "bounded": self.bounded}


def check_delta2_at_zero(N: OrliczFunction, lam0: float, grid=None, points: int = 400) -> Delta2Report:
    if grid is None:
        lo = max(N.domain_min, lam0 * 1e-12, 1e-300)
        grid = np.geomspace(lo, lam0, points)
    lam = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(lam > lam0 * (1 + 1e-12)) or np.any(lam <= 0):
        raise UsageError("grid must lie in (0, lam0]")
    ratios = np.asarray(N.delta2_ratio(lam), dtype=float)
    ratios = np.broadcast_to(ratios, lam.shape)
    i = int(np.argmax(ratios))
    return Delta2Report(float(ratios[i]), float(lam[i]), float(lam0), int(lam.size))


@dataclass(frozen=True)
class Delta2Bound:
    """The bound ``sup_{lam <= 2^-n} N(2 lam)/N(lam) <= C^-1 2^(n r)``."""

    r: float
    C: float
    n: int
    t0: float
    bound: float
    observed: Delta2Report

    @property
    def ok(self) -> bool:
        return self.observed.bounded and self.observed.sup <= self.bound * (1 + 1e-12)

    def to_json(self) -> dict:
        return {"r": self.r, "C": self.C, "n": self.n, "t0": self.t0, "bound": self.bound, "observed": self.observed.to_json(), "ok": self.ok}


def delta2_bound(N: OrliczFunction, r: float, t0: float = DEFAULT_T0, points: int = 200) -> Delta2Bound:
    """Estimate ``C = min N(lam t) / (N(lam) t^r)`` and compare with the observed sup.

    ``n`` is the least integer with ``2^-n < t0``.  The ``C`` grid contains
    ``t = 2^-n`` and the points ``2^n lam`` for every ``lam`` in the sup grid,
    so the comparison covers exactly the chain of inequalities it stands for.
    """
    n = 1
    while 2.0**-n >= t0:
        n += 1
    lam0 = 2.0**-n
    lo = max(N.domain_min * 4, lam0 * 1e-12)
    sup_grid = np.geomspace(lo, lam0, points)
    lam_c = np.unique(np.concatenate([sup_grid * 2.0**n, np.geomspace(lo / lam0 * 1.0, 1.0, points)]))
    lam_c = lam_c[lam_c <= 1.0]
    t_c = np.unique(np.concatenate([np.geomspace(lo, t0, points), [lam0]]))
    t_c = t_c[t_c <= t0]
    L, T = np.meshgrid(lam_c, t_c, indexing="ij")
    ok = L * T >= N.domain_min
    e = np.asarray(N.local_exponent(L[ok], T[ok]), dtype=float)
    log_ratio = (e - r) * np.log(T[ok])
    C = float(np.exp(np.min(log_ratio)))
    observed = check_delta2_at_zero(N, lam0, sup_grid)
    return Delta2Bound(float(r), C, n, float(t0), C**-1 * 2.0 ** (n * r), observed)


def concavity_margin(f: OrliczFunction, lo: float, hi: float, samples: int = 2000, seed: int = 0) -> float:
    """Smallest ``f((a+b)/2) - (f(a)+f(b))/2`` over sampled pairs in ``[lo, hi]``.

    Half the pairs are log-uniform over the whole range, half are close
    pairs (ratio below 2) where curvature is resolved.
    """
    rng = np.random.default_rng(seed)
    half = samples // 2
    a = np.exp(rng.uniform(math.log(lo), math.log(hi), samples))
    b_far = np.exp(rng.uniform(math.log(lo), math.log(hi), half))
    b_near = np.minimum(a[half:] * (1 + rng.uniform(0, 1, samples - half)), hi)
    b = np.concatenate([b_far, b_near])
    mid = np.asarray(f(0.5 * (a + b)))
    avg = 0.5 * (np.asarray(f(a)) + np.asarray(f(b)))
    return float(np.min(mid - avg))


# ----------------------------------------------------------------------
# pipeline


@dataclass
class PipelineResult:
    theta: float
    N: PiecewisePsiInverse
    psi: PiecewisePsi
    phi: OrliczFunction
    phi0: OrliczFunction
    report: dict

    def anchor_csv(self) -> str:
        return self.psi.anchor_csv(self.phi0)


def choose_q(alpha0: float, alpha1: float, eps: float, gamma: float) -> tuple[float, float]:
    """``q0 = alpha0 - 0.1 (alpha0 - eps)`` and ``q1 = alpha1 + 0.1``.

    ``s1 = (q1 - eps)/gamma`` must stay below 1, i.e. ``q1 < eps + gamma``;
    when ``alpha1 + 0.1`` breaks that, ``q1`` is the midpoint of
    ``(alpha1, eps + gamma)`` instead.
    """
    q0 = alpha0 - 0.1 * (alpha0 - eps)
    q1 = alpha1 + 0.1
    if q1 >= eps + gamma:
        q1 = 0.5 * (alpha1 + eps + gamma)
    return q0, q1


def anchor_recurrence_margin(psi: PiecewisePsi) -> float:
    """Smallest log-margin of ``tau^(s1(m-n)) <= psi(tau^m)/psi(tau^n) <= tau^(s0(m-n))`` over ``m >= n``."""
    logs = np.log(psi.anchors)
    k = np.arange(logs.size)
    diff = logs[:, None] - logs[None, :]
    gap = (k[:, None] - k[None, :]) * math.log(psi.tau)
    upper = psi.s0 * gap - diff
    lower = diff - psi.s1 * gap
    mask = k[:, None] >= k[None, :]
    return float(min(upper[mask].min(), lower[mask].min()))


def interpolation_pipeline(M: OrliczFunction, p: float, depth: int = 30, t0: float = DEFAULT_T0, grid_points: int = 1000) -> PipelineResult:
    """Build ``N`` and ``theta`` so that the interpolated inverse ``t^eps psi^gamma`` matches ``M^{-1}``.

    Raises :class:`ConstructionFailure` tagged with the failing stage.
    """
    if not 1 <= p < math.inf:
        raise UsageError(f"p must lie in [1, inf), got {p}")
    if M.role != CONVEX:
        raise InvalidFunction("M must be in the convex role")
    if float(M(1.0)) != 1.0:
        M = UnitNormalized(M)
    est_m = estimate_indices(M, t0)
    if not (1 < est_m.alpha0 <= est_m.alpha1 < math.inf):
        raise ConstructionFailure("indices", f"need 1 < alpha0 <= alpha1 < inf, got ({est_m.alpha0}, {est_m.alpha1})")
    phi = M.inverse()
    est_phi = estimate_indices(phi, t0)
    a0, a1 = est_phi.alpha0, est_phi.alpha1
    if not (0 < a0 <= a1 < 1):
        raise ConstructionFailure("indices", f"inverse indices outside (0, 1): ({a0}, {a1})")
    eps = min(a0, 1.0 - a1) / p
    gamma = 1.0 - p * eps
    theta = gamma
    if not 0 < theta < 1:
        raise ConstructionFailure("parameters", f"theta = {theta} outside (0, 1)")
    q0, q1 = choose_q(a0, a1, eps, gamma)
    s0, s1 = (q0 - eps) / gamma, (q1 - eps) / gamma
    if not (0 < s0 < s1 < 1):
        raise ConstructionFailure("parameters", f"need 0 < s0 < s1 < 1, got ({s0}, {s1})")
    try:
        norm = normalize_function(phi, q0, q1, t0)
    except UsageError as exc:
        raise ConstructionFailure("normalize", str(exc)) from exc
    phi0 = norm.function
    f0 = build_f0(norm.t0, s0, s1)
    psi = build_psi(phi0, q0, q1, eps, gamma, depth, norm.t0, f0)
    disc = disc_est(psi, phi0)

    cont = check_cont_est(psi, phi0, eps, gamma, q1, np.geomspace(psi.domain_min, 1.0, grid_points))
    if not cont.ok:
        raise ConstructionFailure("cont_est", "continuous estimate violated", cont.min_margin)

    psi_theta = GeometricMean(theta, Power(1.0 / p), psi)
    witness = check_equivalent_at_zero(phi, psi_theta, t0=norm.t0)
    if not witness.ok:
        raise ConstructionFailure("equivalence", "no equivalence witness on the lattice", witness.margin)

    span = (psi.domain_min, 1.0)
    conc_psi = concavity_margin(psi, *span)
    conc_theta = concavity_margin(psi_theta, *span)
    if min(conc_psi, conc_theta) < -1e-10:
        raise ConstructionFailure("concavity", "sampled midpoint test failed", min(conc_psi, conc_theta))
    dminus, dplus = psi.one_sided_derivatives()
    gluing = float(np.min((dminus - dplus) / np.maximum(1.0, dplus)))
    if gluing < -1e-10:
        raise ConstructionFailure("concavity", "one-sided derivatives out of order at an anchor", gluing)

    recurrence = anchor_recurrence_margin(psi)
    if recurrence < -1e-12:
        raise ConstructionFailure("anchors", "anchor ratio recurrence violated", recurrence)

    N = psi.inverse()
    d2 = delta2_bound(N, 1.0 / s0, norm.t0)
    if not d2.ok:
        raise ConstructionFailure("delta2", "observed sup exceeds the bound", d2.bound - d2.observed.sup)

    report = {
        "theta": theta,
        "p": p,
        "eps": eps,
        "gamma": gamma,
        "q0": q0,
        "q1": q1,
        "s0": s0,
        "s1": s1,
        "tau_scale": psi.tau,
        "depth": depth,
        "eta_bits": "".join(str(b) for b in psi.eta),
        "indices": {"M": est_m.to_json(), "phi": est_phi.to_json()},
        "normalization": {"t1": norm.t1, "t0": norm.t0, "margin": norm.margin},
        "f0": f0.to_json(),
        "witnesses": {"equivalence": witness.to_json()},
        "margins": {
            "disc_est": disc.min_margin,
            "cont_est": cont.to_json(),
            "concavity_psi": conc_psi,
            "concavity_psi_theta": conc_theta,
            "derivative_gluing": gluing,
            "anchor_recurrence": recurrence,
        },
        "delta2": d2.to_json(),
    }
    return PipelineResult(theta, N, psi, phi, phi0, report)
