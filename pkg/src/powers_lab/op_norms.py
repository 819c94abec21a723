"""Certified brackets for norms of convolution operators ``rho(a)``.

``rho(a)`` acts on finitely supported vectors by ``(rho(a) xi)_h = sum_g a_g
xi_{g^{-1} h}``.  Every left translation is an isometry of each norm used here
(they only see the multiset of magnitudes), so ``sum_g |a_g|`` is always an
upper bound.  Lower bounds come from trial vectors; on ``l^2`` further upper
bounds come from trace moments and, in free groups, Haagerup's inequality.
Endpoint bounds are combined with Riesz-Thorin interpolation and duality.

Operator norms on infinite groups are not computed exactly: results are
:class:`NormBracket` intervals.  The point estimator
:func:`ratio_estimate_l2` is heuristic and kept separate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceeded, UsageError, VerificationFailure
from .free_subgroup import support_basis
from .group_algebra import AlgebraElement, convolve
from .group_core import FREE, FREE_ABELIAN, element_budget
from .moments import free_basis_moments, vector_moments
from .seq_norms import FinVector, NormSpec, lp_norm

SOUNDNESS_SLACK = 1e-9
DEFAULT_DOUBLINGS = 6


@dataclass(frozen=True)
class NormBracket:
    """A certified interval ``[lower, upper]`` for an operator norm."""

    lower: float
    upper: float
    lower_method: str
    upper_method: str
    params: dict = field(default_factory=dict)
    partial: bool = False

    def __post_init__(self):
        lo, up = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(up)) or lo < 0:
            raise VerificationFailure(f"bracket must be finite and nonnegative: ({lo}, {up})")
        if lo > up + SOUNDNESS_SLACK * max(1.0, up):
            raise VerificationFailure(f"unsound bracket: lower {lo!r} > upper {up!r}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    def contains(self, value: float, slack: float = SOUNDNESS_SLACK) -> bool:
        return self.lower - slack * max(1.0, value) <= value <= self.upper + slack * max(1.0, value)

    def overlaps(self, other: "NormBracket", slack: float = SOUNDNESS_SLACK) -> bool:
        tol = slack * max(1.0, self.upper, other.upper)
        return self.lower <= other.upper + tol and other.lower <= self.upper + tol

    def to_json(self) -> dict:
        out = {
            "lower": self.lower,
            "upper": self.upper,
            "lower_method": self.lower_method,
            "upper_method": self.upper_method,
            "params": self.params,
        }
        if self.partial:
            out["partial"] = True
        return out


# ----------------------------------------------------------------------
# the operator


def apply(a: AlgebraElement, xi: FinVector) -> FinVector:
    """``(rho(a) xi)_h = sum_g a_g xi_{g^{-1} h}``."""
    if xi.spec != a.spec:
        raise UsageError("element and vector come from different groups")
    mul = a.spec.mul
    out: dict = {}
    for g, c in a.items():
        for h, v in xi.entries:
            k = mul(g, h)
            out[k] = out.get(k, 0) + c * v
    return FinVector.from_mapping(a.spec, out)


def l1_upper(a: AlgebraElement) -> float:
    """``sum_g |a_g|``, an upper bound on every norm considered here."""
    return a.l1()


@dataclass
class TruncatedOperator:
    """``rho(a)`` restricted to vectors supported on ``ball(R)``, as a sparse matrix."""

    a: AlgebraElement
    radius: int
    domain: list
    image: list
    matrix: sp.csr_matrix

    @classmethod
    def build(cls, a: AlgebraElement, radius: int, budget: int | None = None) -> "TruncatedOperator":
        spec = a.spec
        domain = spec.ball(radius, budget)
        image_index: dict = {}
        rows, cols, vals = [], [], []
        mul = spec.mul
        for j, h in enumerate(domain):
            for g, c in a.items():
                k = mul(g, h)
                i = image_index.setdefault(k, len(image_index))
                rows.append(i)
                cols.append(j)
                vals.append(c)
        budget = element_budget() if budget is None else budget
        if len(image_index) > budget:
            raise BudgetExceeded("truncated operator image", len(image_index), budget)
        shape = (max(len(image_index), 1), len(domain))
        matrix = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=shape)
        return cls(a, radius, domain, list(image_index), matrix)

    @property
    def is_real(self) -> bool:
        return self.a.is_real()


def _l2_power_iteration(A: sp.csr_matrix, x0: np.ndarray, iters: int, stall: float) -> tuple[float, np.ndarray]:
    AH = A.conj().T.tocsr()
    x = x0 / np.linalg.norm(x0)
    best, best_x = 0.0, x
    prev = -1.0
    for _ in range(iters):
        y = A @ x
        ny = np.linalg.norm(y)
        ratio = ny
        if ratio > best:
            best, best_x = ratio, x
        if ny == 0:
            break
        q = ny * ny
        if prev > 0 and abs(q - prev) <= stall * q:
            break
        prev = q
        z = AH @ y
        nz = np.linalg.norm(z)
        if nz == 0:
            break
        x = z / nz
    return best, best_x


def _batch_ratio(A, norm: NormSpec, X: np.ndarray) -> np.ndarray:
    num = norm.batch(np.asarray(A @ X))
    den = norm.batch(X)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _ascent(A, norm: NormSpec, x0: np.ndarray, iters: int, complex_params: bool) -> tuple[float, np.ndarray]:
    """Steepest ascent on ``||A x|| / ||x||`` with central finite differences."""
    n = A.shape[1]
    x = x0.astype(complex)
    x /= max(np.max(np.abs(x)), 1e-300)
    best = float(_batch_ratio(A, norm, x[:, None])[0])
    directions = [np.eye(n, dtype=complex)]
    if complex_params:
        directions.append(1j * np.eye(n, dtype=complex))
    D = np.hstack(directions)
    step = 0.25
    for _ in range(iters):
        scale = float(np.max(np.abs(x)))
        h = 1e-6 * scale
        plus = _batch_ratio(A, norm, x[:, None] + h * D)
        minus = _batch_ratio(A, norm, x[:, None] - h * D)
        grad = (plus - minus) / (2 * h)
        direction = D @ grad
        gnorm = np.linalg.norm(direction)
        if not np.isfinite(gnorm) or gnorm == 0:
            break
        direction *= np.linalg.norm(x) / gnorm
        improved = False
        while step > 1e-10:
            y = x + step * direction
            ry = float(_batch_ratio(A, norm, y[:, None])[0])
            if ry > best * (1 + 1e-15):
                x = y / np.max(np.abs(y))
                best = ry
                step = min(step * 2, 1.0)
                improved = True
                break
            step /= 2
        if not improved:
            break
    return best, x


def truncated_lower(
    a: AlgebraElement,
    norm: NormSpec | str = "lp:2",
    radius: int = 3,
    restarts: int = 3,
    iters: int | None = None,
    seed: int = 0,
    budget: int | None = None,
    *,
    operator: TruncatedOperator | None = None,
) -> float:
    """Best achieved ratio ``||rho(a) xi|| / ||xi||`` over trial vectors on ``ball(radius)``.

    On ``l^2`` this is the top singular value of the truncated matrix,
    found by power iteration on ``A^H A`` from the all-ones vector and
    ``restarts - 1`` random starts.  For other norms the ratio is increased by
    steepest ascent started from the ``l^2`` top vector and random vectors.
    The returned value is always a ratio actually achieved by some vector, so
    it is a certified lower bound.
    """
    norm = NormSpec.parse(norm) if isinstance(norm, str) else norm
    if not a:
        return 0.0
    op = operator or TruncatedOperator.build(a, radius, budget)
    A = op.matrix
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    starts = [np.ones(n, dtype=complex)]
    for _ in range(max(restarts, 1) - 1):
        starts.append(rng.standard_normal(n) + (0j if op.is_real else 1j * rng.standard_normal(n)))
    l2_iters = 3000 if iters is None else iters
    best2, top = 0.0, starts[0]
    for x0 in starts:
        r, x = _l2_power_iteration(A, x0, l2_iters, 1e-10)
        if r > best2:
            best2, top = r, x
    if norm.is_l2:
        return float(best2)
    asc_iters = 60 if iters is None else iters
    best = 0.0
    complex_params = not op.is_real
    for x0 in [top] + starts[1:]:
        r, _ = _ascent(A, norm, x0, asc_iters, complex_params)
        best = max(best, r)
    return float(best)


# ----------------------------------------------------------------------
# l^2 brackets from trace moments


def _haagerup_from_element(b: AlgebraElement, m: int) -> float:
    """``(sum_l (l+1) ||b_l||_2)^(1/2m)`` for ``b = (a* a)^m`` in a free group."""
    spheres: dict = {}
    for g, c in b.items():
        length = b.spec.length(g)
        spheres[length] = spheres.get(length, 0.0) + abs(c) ** 2
    total = math.fsum((l + 1) * math.sqrt(s) for l, s in spheres.items())
    return total ** (1.0 / (2 * m))


def _haagerup_from_moment(log_tau_2m: float, m: int, max_len: int) -> float:
    """Haagerup bound from ``tau((a* a)^(2m))`` when ``(a* a)^m`` has length <= ``max_len``.

    ``||a||^(2m) = ||c|| <= sum_l (l+1) ||c_l||_2 <= sqrt(sum_l (l+1)^2) ||c||_2`` with
    ``||c||_2^2 = tau((a* a)^(2m))``.
    """
    weight = math.fsum((l + 1) ** 2 for l in range(max_len + 1))
    return math.exp((0.5 * math.log(weight) + 0.5 * log_tau_2m) / (2 * m))


def l2_bracket_trace(a: AlgebraElement, doublings: int = DEFAULT_DOUBLINGS, budget: int | None = None) -> NormBracket:
    """Bracket for ``||rho_2(a)||`` from moments of ``a* a``.

    With ``m = 2^doublings``: lower ``tau((a* a)^m)^(1/2m)``; upper the
    smallest of ``sum|a_g|``, the coefficient-``l^1`` bound
    ``||(a* a)^j||_1^(1/2j)`` at each completed doubling, and (free groups)
    Haagerup's inequality.  When the support is a free basis of the
    subgroup it generates, moments come from the first-passage recursion and
    the Haagerup bound is taken in that basis.  If the term budget runs out
    the bracket from the last completed doubling is returned with
    ``partial=True``.
    """
    if doublings < 1:
        raise UsageError("doublings must be >= 1")
    if not a:
        return NormBracket(0.0, 0.0, "zero", "zero", {"doublings": doublings})
    l1 = a.l1()
    spec = a.spec
    basis = support_basis(spec, [g for g, _ in a.items()]) if spec.kind == FREE else None
    if basis is not None:
        m = 2**doublings
        fm = free_basis_moments(a, 2 * m, basis)
        upper, upper_method = l1, "l1"
        for j in range(0, doublings + 1):
            mj = 2**j
            h = _haagerup_from_moment(fm.log_moment(2 * mj), mj, 2 * mj)
            if h < upper:
                upper, upper_method = h, "haagerup_moment"
        lower = min(fm.root(m), upper)
        params = {"doublings": doublings, "m": m, "moments": "free_basis_recursion", "basis_rank": basis.rank}
        return NormBracket(lower, upper, "trace_moment", upper_method, params)

    upper, upper_method = l1, "l1"
    lower = 0.0
    partial = False
    completed = 0
    b = convolve(a.star(), a, budget, dust=0)
    m = 1
    try:
        while True:
            cand = b.l1() ** (1.0 / (2 * m))
            if cand < upper:
                upper, upper_method = cand, "coefficient_l1"
            if spec.kind == FREE:
                h = _haagerup_from_element(b, m)
                if h < upper:
                    upper, upper_method = h, "haagerup"
            tr = b.trace().real
            lower = max(tr, 0.0) ** (1.0 / (2 * m))
            if completed == doublings:
                break
            b = convolve(b, b, budget, dust=0)
            m *= 2
            completed += 1
    except BudgetExceeded:
        partial = True
    lower = min(lower, upper)
    params = {"doublings": doublings, "m": m, "completed_doublings": completed, "moments": "squaring"}
    return NormBracket(lower, upper, "trace_moment", upper_method, params, partial)


def trace_moments(a: AlgebraElement, count: int, budget: int | None = None) -> np.ndarray:
    """``tau((a* a)^t)`` for ``t = 0..count`` by the cheapest available route."""
    basis = support_basis(a.spec, [g for g, _ in a.items()]) if a.spec.kind == FREE else None
    if basis is not None:
        fm = free_basis_moments(a, count, basis)
        return fm.normalized * fm.scale ** (2.0 * np.arange(count + 1))
    return vector_moments(a, count, budget)


def ratio_estimate_l2(a: AlgebraElement, m: int = 8, budget: int | None = None) -> float:
    """Heuristic point estimate ``sqrt(tau((a* a)^(m+1)) / tau((a* a)^m))`` of ``||rho_2(a)||``.

    Not a certified bound; the ratios increase to ``||rho_2(a)||^2``.
    """
    if m < 1:
        raise UsageError("m must be >= 1")
    if not a:
        raise UsageError("the ratio estimate is undefined for a = 0")
    basis = support_basis(a.spec, [g for g, _ in a.items()]) if a.spec.kind == FREE else None
    if basis is not None:
        fm = free_basis_moments(a, m + 1, basis)
        return math.exp(0.5 * (fm.log_moment(m + 1) - fm.log_moment(m)))
    mom = vector_moments(a, m + 1, budget)
    if mom[m] <= 0:
        raise UsageError("zero moment")
    return math.sqrt(mom[m + 1] / mom[m])


# ----------------------------------------------------------------------
# interpolation and duality


def _recip(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


@dataclass(frozen=True)
class InterpSpec:
    """Exponents with ``1/p = (1 - theta)/p0 + theta/p1``."""

    p0: float
    p1: float
    p: float
    theta: float

    def __post_init__(self):
        for q in (self.p0, self.p1, self.p):
            if not q >= 1:
                raise UsageError(f"exponents must be >= 1, got {q}")
        if self.p0 == self.p1:
            raise UsageError("endpoints must differ")
        if not 0 <= self.theta <= 1:
            raise UsageError(f"theta must lie in [0, 1], got {self.theta}")
        lhs = _recip(self.p)
        rhs = (1 - self.theta) * _recip(self.p0) + self.theta * _recip(self.p1)
        if abs(lhs - rhs) > 1e-12:
            raise UsageError(f"1/p = (1-theta)/p0 + theta/p1 fails by {lhs - rhs:.3e}")

    @classmethod
    def between(cls, p0: float, p1: float, p: float) -> "InterpSpec":
        r0, r1, r = _recip(p0), _recip(p1), _recip(p)
        if r0 == r1:
            raise UsageError("endpoints must differ")
        return cls(float(p0), float(p1), float(p), (r0 - r) / (r0 - r1))


def riesz_thorin_upper(spec: InterpSpec, U0: float, U1: float) -> float:
    """``U0^(1 - theta) * U1^theta``."""
    if U0 < 0 or U1 < 0:
        raise UsageError("endpoint bounds must be nonnegative")
    th = spec.theta
    if th == 0:
        return float(U0)
    if th == 1:
        return float(U1)
    return float(U0 ** (1 - th) * U1**th)


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


@dataclass(frozen=True)
class DualityRecord:
    """Any bracket for ``||rho_q(vee(a))||`` is a bracket for ``||rho_p(a)||``.

    The adjoint of ``rho_p(a)`` on ``l^q`` is convolution by
    ``g -> a_{g^{-1}}``; conjugating coefficients as well would not change
    any norm here, so ``vee(a)`` suffices.
    """

    p: float
    q: float
    source: AlgebraElement
    target: AlgebraElement

    @property
    def is_identity(self) -> bool:
        return self.p == self.q and self.source == self.target

    def describe(self) -> str:
        return f"||rho_{self.p}(a)|| = ||rho_{self.q}(vee(a))||"


def duality_transfer(a: AlgebraElement, p: float) -> DualityRecord:
    if not 1 < p < math.inf:
        raise UsageError(f"duality transfer needs 1 < p < inf, got {p}")
    return DualityRecord(float(p), conjugate_exponent(p), a, a.vee())


def lp_bracket(
    a: AlgebraElement,
    p: float,
    radius: int = 3,
    doublings: int = DEFAULT_DOUBLINGS,
    seed: int = 0,
    l2: NormBracket | None = None,
    iters: int | None = None,
    budget: int | None = None,
) -> NormBracket:
    """Bracket for ``||rho_p(a)||``.

    ``p = 1`` and ``p = inf`` are exact (``sum|a_g|``).  Otherwise the upper
    bound interpolates between ``l^1`` and ``l^2`` for ``p < 2`` and between
    ``l^2`` and ``l^inf`` for ``p > 2``, using ``sum|a_g|`` at the ends and the
    trace bracket at 2; the lower bound is :func:`truncated_lower`.
    """
    p = float(p)
    if not p >= 1:
        raise UsageError(f"p must be >= 1, got {p}")
    l1 = a.l1()
    params = {"p": p, "radius": radius, "doublings": doublings, "seed": seed}
    if p == 1 or math.isinf(p):
        return NormBracket(l1, l1, "exact_l1", "exact_l1", params)
    if len(a) == 1:
        return NormBracket(l1, l1, "isometry", "isometry", params)
    if l2 is None:
        l2 = l2_bracket_trace(a, doublings, budget)
    if p == 2:
        upper, method = l2.upper, l2.upper_method
    elif p < 2:
        upper = riesz_thorin_upper(InterpSpec.between(1, 2, p), l1, l2.upper)
        method = f"riesz_thorin(l1,{l2.upper_method})"
    else:
        upper = riesz_thorin_upper(InterpSpec.between(2, math.inf, p), l2.upper, l1)
        method = f"riesz_thorin({l2.upper_method},l1)"
    if upper > l1:
        upper, method = l1, "l1"
    lower = truncated_lower(a, NormSpec.lp(p), radius, seed=seed, iters=iters, budget=budget)
    lower_method = "truncated"
    if p == 2 and l2.lower > lower:
        lower, lower_method = l2.lower, l2.lower_method
    params["l2_upper"] = l2.upper
    return NormBracket(min(lower, upper), upper, lower_method, method, params, l2.partial)


def norm_bracket(
    a: AlgebraElement,
    norm: NormSpec | str,
    radius: int = 3,
    doublings: int = DEFAULT_DOUBLINGS,
    seed: int = 0,
    budget: int | None = None,
) -> NormBracket:
    """Bracket on any supported norm; non-``l^p`` norms get the ``l^1`` upper bound only."""
    norm = NormSpec.parse(norm) if isinstance(norm, str) else norm
    if norm.kind == "lp":
        return lp_bracket(a, norm.p, radius, doublings, seed, budget=budget)
    l1 = a.l1()
    params = {"norm": str(norm), "radius": radius, "seed": seed}
    if len(a) <= 1:
        # a multiple of a translation: |c| times an isometry
        return NormBracket(l1, l1, "isometry", "isometry", params)
    lower = truncated_lower(a, norm, radius, seed=seed, budget=budget)
    return NormBracket(min(lower, l1), l1, "truncated", "l1", params)


def bpstar_bracket(a: AlgebraElement, p: float, strategy: str = "interp", **kwargs) -> NormBracket:
    """Bracket for ``max(||rho_p(a)||, ||rho_p(a*)||)``.

    ``strategy="interp"`` uses :func:`lp_bracket` on both sides;
    ``strategy="l1"`` uses the cheap bracket ``[||a||_p, sum|a_g|]`` whose
    lower side is the ratio at ``delta_e``.
    """
    if not 1 < p < math.inf:
        raise UsageError(f"bpstar needs 1 < p < inf, got {p}")

    def one(x: AlgebraElement) -> NormBracket:
        if strategy == "interp":
            return lp_bracket(x, p, **kwargs)
        if strategy == "l1":
            vals = np.array([c for _, c in x.items()])
            return NormBracket(lp_norm(vals, p), x.l1(), "delta_e", "l1", {"p": p})
        raise UsageError(f"unknown strategy {strategy!r}")

    left, right = one(a), one(a.star())
    params = {"p": p, "strategy": strategy, "a": left.to_json(), "a_star": right.to_json()}
    return NormBracket(
        max(left.lower, right.lower),
        max(left.upper, right.upper),
        left.lower_method if left.lower >= right.lower else right.lower_method,
        left.upper_method if left.upper >= right.upper else right.upper_method,
        params,
        left.partial or right.partial,
    )


# ----------------------------------------------------------------------
# Fourier oracle on Z^d


def fourier_oracle_zd(a: AlgebraElement, gridpoints: int = 4096) -> NormBracket:
    """``l^2`` bracket on ``Z^d`` from the symbol ``S(theta) = sum_g a_g e^{i g.theta}``.

    The operator norm is ``max |S|``.  The grid maximum is a lower bound; any
    point is within one grid spacing ``h`` (per coordinate) of a grid point
    and ``|grad S| <= sum_g |a_g| |g|_1`` in the sup-norm pairing, so adding
    ``sum_g |a_g| |g|_1 h`` gives an upper bound.  Both are capped at
    ``sum |a_g|``.
    """
    spec = a.spec
    if spec.kind != FREE_ABELIAN:
        raise UsageError("the Fourier oracle needs a free abelian group")
    if not a:
        return NormBracket(0.0, 0.0, "fourier_grid", "fourier_lipschitz", {"gridpoints": gridpoints})
    d = spec.n
    per_axis = max(2, int(round(gridpoints ** (1.0 / d)))) if d > 1 else gridpoints
    h = 2 * math.pi / per_axis
    theta = np.arange(per_axis) * h
    words = np.array([g for g, _ in a.items()], dtype=float)
    coeffs = np.array([c for _, c in a.items()])
    axes = np.meshgrid(*([theta] * d), indexing="ij")
    phase = sum(words[:, i][:, None] * axes[i].ravel()[None, :] for i in range(d))
    symbol = coeffs @ np.exp(1j * phase)
    l1 = a.l1()
    lower = min(float(np.max(np.abs(symbol))), l1)
    if len(a) == 1:
        lower = l1
    slack = float(np.sum(np.abs(coeffs) * np.sum(np.abs(words), axis=1))) * h
    upper = min(lower + slack, l1)
    return NormBracket(lower, upper, "fourier_grid", "fourier_lipschitz", {"gridpoints": per_axis**d, "spacing": h})


__all__ = [
    "NormBracket",
    "apply",
    "l1_upper",
    "TruncatedOperator",
    "truncated_lower",
    "l2_bracket_trace",
    "trace_moments",
    "ratio_estimate_l2",
    "InterpSpec",
    "riesz_thorin_upper",
    "conjugate_exponent",
    "DualityRecord",
    "duality_transfer",
    "lp_bracket",
    "norm_bracket",
    "bpstar_bracket",
    "fourier_oracle_zd",
]
