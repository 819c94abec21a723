"""Reference implementations used only by the tests.

Each one computes its answer by a route that shares no code with the
package: letter-string free reduction, a birth-death chain for walks on the
tree, a dense Fourier grid on Z and adaptive quadrature for Lorentz norms.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np


# ----------------------------------------------------------------------
# free groups as letter strings: 'a', 'A' = a^-1, 'b', 'B' = b^-1, ...


def letters_from_runs(runs) -> str:
    out = []
    for g, e in runs:
        ch = chr(ord("a") + g - 1)
        out.append((ch if e > 0 else ch.upper()) * abs(e))
    return "".join(out)


def free_reduce(word: str) -> str:
    stack: list[str] = []
    for ch in word:
        if stack and stack[-1] != ch and stack[-1].lower() == ch.lower():
            stack.pop()
        else:
            stack.append(ch)
    return "".join(stack)


def free_inverse(word: str) -> str:
    return word[::-1].swapcase()


def free_ball_size(k: int, radius: int) -> int:
    """``1 + 2k ((2k-1)^R - 1) / (2k - 2)`` for ``k >= 2``; ``2R + 1`` for ``k = 1``."""
    if k == 1:
        return 2 * radius + 1
    return 1 + 2 * k * ((2 * k - 1) ** radius - 1) // (2 * k - 2)


# ----------------------------------------------------------------------
# free-family moments


def tree_walk_return(n: int, m: int) -> float:
    """``tau((a* a)^m)`` for ``a`` the average of ``n`` free generators.

    Alternating products of ``x_j`` and ``x_j^{-1}`` are reduced words whose
    length changes by one per step: from the identity every choice moves
    away; otherwise exactly one of the ``n`` choices cancels the last letter.
    This is a birth-death chain on the distance, and the moment is its
    return probability at time ``2m``.
    """
    dist = np.zeros(2 * m + 2)
    dist[0] = 1.0
    for _ in range(2 * m):
        nxt = np.zeros_like(dist)
        nxt[1] += dist[0]
        nxt[:-1] += dist[1:] / n
        nxt[2:] += dist[1:-1] * (n - 1) / n
        dist = nxt
    return float(dist[0])


def kesten_norm(n: int) -> float:
    """``||(1/n) sum_j u_{x_j}||`` for ``n`` free generators: ``2 sqrt(n-1)/n``, and 1 for ``n = 1``."""
    return 1.0 if n == 1 else 2.0 * math.sqrt(n - 1) / n


# ----------------------------------------------------------------------
# Z: the operator of sum a_k u_k is multiplication by the symbol


def symbol_sup_z(coeffs: dict, points: int = 1 << 16) -> float:
    theta = np.linspace(0.0, 2 * math.pi, points, endpoint=False)
    s = np.zeros(points, dtype=complex)
    for k, c in coeffs.items():
        s += c * np.exp(1j * k * theta)
    return float(np.abs(s).max())


# ----------------------------------------------------------------------
# Lorentz norm by quadrature of the rearrangement integral


def lorentz_quadrature(p: float, r: float, values) -> float:
    """``(int_0^inf (lam^(1/p) xi*(lam))^r dlam/lam)^(1/r)`` piece by piece with mpmath."""
    mpmath.mp.dps = 30
    x = sorted((abs(v) for v in values if v != 0), reverse=True)
    a = mpmath.mpf(r) / p
    # on [0, 1] substitute lam = u^k, which removes the singularity at 0
    k = math.ceil(1 / float(a)) + 1
    total = mpmath.mpf(0)
    for n, v in enumerate(x, start=1):
        if n == 1:
            piece = mpmath.quad(lambda u: k * u ** (k * a - 1), [0, 1])
        else:
            piece = mpmath.quad(lambda lam: lam ** (a - 1), [n - 1, n])
        total += mpmath.mpf(v) ** r * piece
    return float(total ** (1 / mpmath.mpf(r)))
