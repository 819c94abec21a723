"""The complex group ring of a :class:`~powers_lab.group_core.GroupSpec`.

Elements are finitely supported coefficient tables ``g -> a_g``.  The ring
product is convolution, ``a*`` conjugates coefficients and inverts words,
``vee`` only inverts words, and the trace reads off the identity coefficient.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import BudgetExceeded, UsageError
from .group_core import GroupSpec, Word, term_budget

# relative threshold below which convolution products are treated as zero
DUST = 1e-15


def _canonical(terms: Mapping, dust: float = DUST) -> dict:
    out = {g: complex(c) for g, c in terms.items() if c != 0}
    if out and dust > 0:
        cut = dust * max(abs(c) for c in out.values())
        out = {g: c for g, c in out.items() if abs(c) >= cut}
    return out


class AlgebraElement:
    """A finitely supported element ``sum_g a_g u_g`` of the group ring.

    Coefficients are stored as complex doubles keyed by raw word data.  The
    element is treated as immutable.
    """

    __slots__ = ("spec", "_terms", "_hash")

    def __init__(self, spec: GroupSpec, terms: Mapping | None = None, *, dust: float = DUST):
        self.spec = spec
        self._terms = _canonical(terms or {}, dust)
        self._hash = None

    # -- construction ---------------------------------------------------

    @classmethod
    def from_words(cls, spec: GroupSpec, pairs: Iterable[tuple[Word, complex]]) -> "AlgebraElement":
        acc: dict = {}
        for w, c in pairs:
            if w.spec != spec:
                raise UsageError("word from a different group")
            acc[w.data] = acc.get(w.data, 0) + c
        return cls(spec, acc)

    @classmethod
    def one(cls, spec: GroupSpec) -> "AlgebraElement":
        return cls(spec, {spec.identity: 1.0})

    @classmethod
    def zero(cls, spec: GroupSpec) -> "AlgebraElement":
        return cls(spec, {})

    # -- inspection -----------------------------------------------------

    @property
    def terms(self) -> list[tuple[Word, complex]]:
        """Canonical sorted list of ``(word, coefficient)``."""
        return [(Word(self.spec, g), c) for g, c in self.items()]

    def items(self) -> list[tuple[object, complex]]:
        """Raw ``(data, coefficient)`` pairs in canonical order."""
        key = self.spec.sort_key
        return sorted(self._terms.items(), key=lambda kv: key(kv[0]))

    def coeff(self, g) -> complex:
        data = g.data if isinstance(g, Word) else g
        return self._terms.get(data, 0j)

    @property
    def support(self) -> list[Word]:
        return [w for w, _ in self.terms]

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def l1(self) -> float:
        """Sum of coefficient magnitudes."""
        return float(sum(sorted(abs(c) for c in self._terms.values())))

    def l2(self) -> float:
        return float(sum(sorted(abs(c) ** 2 for c in self._terms.values()))) ** 0.5

    def max_length(self) -> int:
        return max((self.spec.length(g) for g in self._terms), default=0)

    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self._terms.values())

    # -- algebra --------------------------------------------------------

    def _same(self, other: "AlgebraElement") -> None:
        if not isinstance(other, AlgebraElement):
            raise UsageError(f"expected an AlgebraElement, got {type(other).__name__}")
        if other.spec != self.spec:
            raise UsageError(f"group mismatch: {self.spec.name} vs {other.spec.name}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = AlgebraElement(self.spec, {self.spec.identity: other})
        self._same(other)
        acc = dict(self._terms)
        for g, c in other._terms.items():
            acc[g] = acc.get(g, 0) + c
        return AlgebraElement(self.spec, acc, dust=0)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement(self.spec, {g: -c for g, c in self._terms.items()}, dust=0)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return AlgebraElement(self.spec, {g: c * other for g, c in self._terms.items()}, dust=0)
        return convolve(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        return self * (1.0 / other)

    def star(self) -> "AlgebraElement":
        inv = self.spec.inv
        return AlgebraElement(self.spec, {inv(g): c.conjugate() for g, c in self._terms.items()}, dust=0)

    def vee(self) -> "AlgebraElement":
        inv = self.spec.inv
        return AlgebraElement(self.spec, {inv(g): c for g, c in self._terms.items()}, dust=0)

    def conjugate_coefficients(self) -> "AlgebraElement":
        return AlgebraElement(self.spec, {g: c.conjugate() for g, c in self._terms.items()}, dust=0)

    def trace(self) -> complex:
        return self._terms.get(self.spec.identity, 0j)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.spec == other.spec and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.spec, frozenset(self._terms.items())))
        return self._hash

    def allclose(self, other: "AlgebraElement", tol: float = 1e-12) -> bool:
        self._same(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(g, 0) - other._terms.get(g, 0)) <= tol for g in keys)

    # -- text and JSON --------------------------------------------------

    def __str__(self) -> str:
        return format_element(self)

    def __repr__(self) -> str:
        return f"AlgebraElement({self.spec.name}, {format_element(self)!r})"

    def to_json(self) -> list[dict]:
        return [{"word": str(w), "re": c.real, "im": c.imag} for w, c in self.terms]

    @classmethod
    def from_json(cls, spec: GroupSpec, rows) -> "AlgebraElement":
        if isinstance(rows, str):
            rows = json.loads(rows)
        return cls.from_words(spec, ((Word.parse(spec, r["word"]), complex(r["re"], r["im"])) for r in rows))


def basis(g: Word) -> AlgebraElement:
    return AlgebraElement(g.spec, {g.data: 1.0})


def convolve(x: AlgebraElement, y: AlgebraElement, budget: int | None = None, *, dust: float = DUST) -> AlgebraElement:
    """Ring product ``sum_{g,h} x_g y_h u_{gh}``.

    The work ``|supp x| * |supp y|`` is checked against the term budget before
    anything is computed.  Terms below ``dust`` times the largest magnitude
    are dropped; pass ``dust=0`` when the exact product is needed (for
    certified bounds).
    """
    x._same(y)
    budget = term_budget() if budget is None else budget
    work = len(x) * len(y)
    if work > budget:
        raise BudgetExceeded("convolution terms", work, budget)
    mul = x.spec.mul
    acc: dict = {}
    ys = y.items()
    for g, c in x.items():
        for h, d in ys:
            k = mul(g, h)
            acc[k] = acc.get(k, 0) + c * d
    return AlgebraElement(x.spec, acc, dust=dust)


def star(a: AlgebraElement) -> AlgebraElement:
    return a.star()


def vee(a: AlgebraElement) -> AlgebraElement:
    return a.vee()


def trace(a: AlgebraElement) -> complex:
    return a.trace()


@dataclass(frozen=True)
class PowersSchedule:
    """Conjugators ``h_1, ..., h_n`` for a Powers average."""

    conjugators: tuple[Word, ...]

    def __post_init__(self):
        hs = tuple(self.conjugators)
        object.__setattr__(self, "conjugators", hs)
        if not hs:
            raise UsageError("a Powers schedule needs at least one conjugator")
        if len({h.spec for h in hs}) != 1:
            raise UsageError("all conjugators must come from the same group")

    @property
    def spec(self) -> GroupSpec:
        return self.conjugators[0].spec

    def __len__(self) -> int:
        return len(self.conjugators)


def powers_average(g: Word, schedule: PowersSchedule) -> AlgebraElement:
    """``(1/n) sum_j u_{h_j g h_j^{-1}}`` with coinciding conjugates merged.

    Coefficients are ``count / n`` so that a fully collapsed average is
    exactly ``u_g``.
    """
    if g.is_identity:
        raise UsageError("the Powers average is only defined for g != identity")
    if schedule.spec != g.spec:
        raise UsageError("schedule and g come from different groups")
    counts: dict = {}
    for h in schedule.conjugators:
        c = g.spec.conj(h.data, g.data)
        counts[c] = counts.get(c, 0) + 1
    n = len(schedule)
    return AlgebraElement(g.spec, {c: k / n for c, k in counts.items()}, dust=0)


def default_free_schedule(spec: GroupSpec, g: Word, n: int) -> PowersSchedule:
    """Conjugators ``t^{K}, t^{2K}, ..., t^{nK}`` with ``K = |g| + 1``.

    ``t`` is the first generator, unless ``g`` is a power of it, in which case
    ``t`` is the next generator.  Distinct powers of ``t`` give distinct
    conjugates because the centralizer of ``g`` in a free group is cyclic and
    does not contain ``t`` under this rule.
    """
    if spec.kind != "free" or spec.n < 2:
        raise UsageError("default_free_schedule needs a free group of rank >= 2")
    if g.spec != spec:
        raise UsageError("g is not in the given group")
    if g.is_identity:
        raise UsageError("g must not be the identity")
    if n < 1:
        raise UsageError("n must be >= 1")
    runs = g.data
    t = 1
    if len(runs) == 1 and runs[0][0] == 1:
        t = 2
    K = len(g) + 1
    return PowersSchedule(tuple(Word(spec, ((t, j * K),)) for j in range(1, n + 1)))


def simplicity_witness(b: AlgebraElement, schedule: PowersSchedule, tol: float = 1e-12) -> AlgebraElement:
    """``x = (1/n) sum_j u_{h_j} b u_{h_j^{-1}}`` for ``b`` with trace 1."""
    if abs(b.trace() - 1) > tol:
        raise UsageError(f"simplicity_witness needs trace(b) = 1, got {b.trace()}")
    if schedule.spec != b.spec:
        raise UsageError("schedule and b come from different groups")
    spec = b.spec
    n = len(schedule)
    acc: dict = {}
    for h in schedule.conjugators:
        for g, c in b._terms.items():
            k = spec.conj(h.data, g)
            acc[k] = acc.get(k, 0) + c
    return AlgebraElement(spec, {k: c / n for k, c in acc.items()})


def random_element(
    spec: GroupSpec,
    rng,
    radius: int = 3,
    max_terms: int = 5,
    complex_coeffs: bool = True,
) -> AlgebraElement:
    """Seeded random element: 1 to ``max_terms`` distinct words from the ball of
    ``radius``, coefficients uniform in the unit disk (or in ``[-1, 1]``).

    ``rng`` is a :class:`numpy.random.Generator`; the draw order is fixed, so
    a given seed always produces the same element.
    """
    words = spec.ball(radius)
    k = int(rng.integers(1, min(max_terms, len(words)) + 1))
    picks = rng.choice(len(words), size=k, replace=False)
    if complex_coeffs:
        r = np.sqrt(rng.uniform(0.0, 1.0, k))
        coeffs = r * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, k))
    else:
        coeffs = rng.uniform(-1.0, 1.0, k) + 0j
    return AlgebraElement(spec, {words[int(i)]: complex(c) for i, c in zip(picks, coeffs)}, dust=0)


# ----------------------------------------------------------------------
# text form:  1 + 0.3*u[b] + (0-1i)*u[a^2 b^-1]

def _format_coeff(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    return f"({c.real!r}{'+' if c.imag >= 0 or c.imag != c.imag else ''}{c.imag!r}i)"


def format_element(a: AlgebraElement, letter: str = "u") -> str:
    if not a:
        return "0"
    parts = []
    for w, c in a.terms:
        if w.is_identity and letter == "u":
            parts.append(_format_coeff(c))
        else:
            parts.append(f"{_format_coeff(c)}*{letter}[{w}]")
    return " + ".join(parts)


_TERM_SPLIT = re.compile(r"\s*([+-])\s*")


def _split_terms(text: str) -> list[str]:
    """Split on top-level + and - (outside brackets and parentheses)."""
    out, depth, cur = [], 0, ""
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if depth == 0 and ch in "+-" and cur.strip() and not re.search(r"[eE]$", cur.strip()):
            out.append(cur)
            cur = ch
        else:
            cur += ch
        i += 1
    if cur.strip():
        out.append(cur)
    return [t.strip() for t in out]


def _parse_coeff(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if t in ("", "+"):
        return 1.0
    if t == "-":
        return -1.0
    sign = 1.0
    if t[0] in "+-" and t[1:2] == "(":
        sign = -1.0 if t[0] == "-" else 1.0
        t = t[1:]
    if t.startswith("(") and t.endswith(")"):
        t = t[1:-1]
    t = t.replace("i", "j")
    try:
        return sign * complex(t)
    except ValueError as exc:
        raise UsageError(f"bad coefficient {text!r}") from exc


def parse_terms(spec: GroupSpec, text: str, letter: str = "u") -> dict:
    acc: dict = {}
    t = text.strip()
    if t in ("", "0"):
        return acc
    pat = re.compile(rf"^(.*?)\*?\s*{letter}\[(.*)\]$", re.S)
    for term in _split_terms(t):
        m = pat.match(term)
        if m:
            coeff = _parse_coeff(m.group(1).rstrip("*").strip())
            g = spec.parse_word(m.group(2))
        elif letter == "u":
            coeff = _parse_coeff(term)
            g = spec.identity
        else:
            raise UsageError(f"bad term {term!r}: expected c*{letter}[word]")
        acc[g] = acc.get(g, 0) + coeff
    return acc


def parse_element(spec: GroupSpec, text: str) -> AlgebraElement:
    """Inverse of :func:`format_element`."""
    return AlgebraElement(spec, parse_terms(spec, text, "u"), dust=0)
