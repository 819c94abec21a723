"""Trace moments ``tau((a* a)^m)`` of group-ring elements.

Two routes are provided.

``vector_moments`` applies ``a`` and ``a*`` alternately to ``delta_e``:
with ``w_t`` the result of ``t`` applications, ``||w_t||^2 = tau((a* a)^t)``.
The cost is the support size of ``w_t``, which grows exponentially in
nonabelian groups.

``free_basis_moments`` handles elements of a free group whose support, apart
from the identity, is a free basis of the subgroup it generates (see
:mod:`powers_lab.free_subgroup`).  Then the moments are weighted counts of
closed walks on a regular tree and satisfy a first-passage recursion whose
cost is polynomial in the walk length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, UsageError
from .free_subgroup import SupportBasis, support_basis
from .group_algebra import AlgebraElement
from .group_core import term_budget


def _apply_raw(spec, coeffs: list, vec: dict) -> dict:
    mul = spec.mul
    out: dict = {}
    for g, c in coeffs:
        for h, v in vec.items():
            k = mul(g, h)
            out[k] = out.get(k, 0) + c * v
    return out


def vector_moments(a: AlgebraElement, count: int, budget: int | None = None) -> np.ndarray:
    """``[tau((a* a)^t) for t = 0..count]`` via alternating applications.

    Raises :class:`BudgetExceeded` when a step would exceed the term budget.
    """
    budget = term_budget() if budget is None else budget
    spec = a.spec
    ca = a.items()
    cs = a.star().items()
    vec = {spec.identity: 1.0 + 0j}
    out = [1.0]
    for t in range(1, count + 1):
        coeffs = ca if t % 2 == 1 else cs
        work = len(coeffs) * len(vec)
        if work > budget:
            raise BudgetExceeded(f"moment vector at step {t}", work, budget)
        vec = _apply_raw(spec, coeffs, vec)
        vec = {k: v for k, v in vec.items() if v != 0}
        out.append(math.fsum(sorted(abs(v) ** 2 for v in vec.values())))
    return np.array(out)


@dataclass(frozen=True)
class FreeMoments:
    """Moments of ``a / scale`` with ``scale = sum |a_g|``; see :func:`free_basis_moments`."""

    normalized: np.ndarray
    scale: float
    basis: SupportBasis

    def log_moment(self, m: int) -> float:
        """``log tau((a* a)^m)``."""
        val = self.normalized[m]
        if val <= 0:
            return -math.inf
        return math.log(val) + 2 * m * math.log(self.scale)

    def root(self, m: int) -> float:
        """``tau((a* a)^m)^(1/2m)``."""
        if m == 0:
            return 1.0
        return math.exp(self.log_moment(m) / (2 * m))


def free_basis_moments(a: AlgebraElement, count: int, basis: SupportBasis | None = None) -> FreeMoments:
    """Moments up to ``tau((a* a)^count)`` by first-passage recursion.

    Write the walk for ``(a* a)^m`` as ``2m`` right multiplications by
    letters of the support, phase 0 drawing from ``a*`` and phase 1 from
    ``a``.  ``F[s, phi, t]`` is the weight of walks of ``t`` steps starting
    in phase ``phi`` at ``e`` that first reach the neighbour ``s`` at time
    ``t``.  Splitting on the first step gives

        F[s, phi, t] = c_phi(e) F[s, phi+1, t-1] + [t = 1] c_phi(s)
            + sum_{u != s} c_phi(u) sum_{t1} F[u^-1, phi+1, t1] F[s, phi+1+t1, t-1-t1],

    because a walk that steps to ``u != s`` must come back to ``e`` before
    reaching ``s``, and the return is a translate of a first passage to
    ``u^-1``.  Closed walks ``R[phi, t]`` satisfy the same split with
    ``R`` in place of the final ``F``; the moment is ``R[0, 2m]``.
    """
    spec = a.spec
    if basis is None:
        basis = support_basis(spec, [g for g, _ in a.items()])
    if basis is None:
        raise UsageError("element support is not a free basis of the subgroup it generates")
    scale = a.l1()
    if scale == 0:
        raise UsageError("moments of the zero element")
    idx = basis.index()
    L = 2 * basis.rank
    ce = np.zeros(2, dtype=complex)
    c = np.zeros((2, L), dtype=complex)
    for g, val in a.items():
        v = val / scale
        if spec.is_identity(g):
            ce[1] = v
            ce[0] = v.conjugate()
        else:
            i = idx[g]
            c[1, i] = v
            c[0, i ^ 1] = v.conjugate()
    inv = np.arange(L) ^ 1
    T = 2 * count
    F = np.zeros((L, 2, T + 1), dtype=complex)
    R = np.zeros((2, T + 1), dtype=complex)
    R[:, 0] = 1.0
    for t in range(1, T + 1):
        for phi in (0, 1):
            nxt = 1 - phi
            f = ce[phi] * F[:, nxt, t - 1]
            r = ce[phi] * R[nxt, t - 1]
            if t == 1:
                f = f + c[phi]
            t1 = np.arange(1, t)
            if t1.size:
                # G[u, t1] = c_phi(u) F[u^-1, phi+1, t1]
                G = c[phi][:, None] * F[inv][:, nxt, 1:t]
                Gsum = G.sum(axis=0)
                ph = (phi + 1 + t1) % 2
                rest = t - 1 - t1
                Fs = F[:, ph, rest]
                f = f + ((Gsum[None, :] - G) * Fs).sum(axis=1)
                r = r + (Gsum * R[ph, rest]).sum()
            F[:, phi, t] = f
            R[phi, t] = r
    moments = R[0, 0 : T + 1 : 2]
    return FreeMoments(np.real(moments).copy(), scale, basis)

