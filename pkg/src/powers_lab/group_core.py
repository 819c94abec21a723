"""Exact arithmetic in free groups, free abelian groups and cyclic groups.

Group elements are kept in a compact raw form so that the group ring can use
them directly as dictionary keys:

* ``Free(k)``: a tuple of runs ``(generator, exponent)`` with generators in
  ``1..k``, nonzero exponents and no two adjacent runs on the same generator
  (so every stored word is freely reduced);
* ``FreeAbelian(d)``: a tuple of ``d`` integers;
* ``Cyclic(m)``: an integer residue in ``[0, m)``.

:class:`GroupSpec` owns the arithmetic on raw data. :class:`Word` pairs raw
data with its spec for use at API boundaries.
"""

from __future__ import annotations

import itertools
import os
import re
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterator

from .errors import BudgetExceeded, UsageError

FREE = "free"
FREE_ABELIAN = "free_abelian"
CYCLIC = "cyclic"

DEFAULT_ELEMENT_BUDGET = 2_000_000
DEFAULT_TERM_BUDGET = 5_000_000

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def element_budget() -> int:
    """Ball-size budget, overridable through ``POWERS_LAB_BUDGET``."""
    return int(os.environ.get("POWERS_LAB_BUDGET", DEFAULT_ELEMENT_BUDGET))


def term_budget() -> int:
    """Convolution work budget, overridable through ``POWERS_LAB_BUDGET``."""
    return int(os.environ.get("POWERS_LAB_BUDGET", DEFAULT_TERM_BUDGET))


@dataclass(frozen=True)
class GroupSpec:
    """One of ``Free(k)``, ``FreeAbelian(d)`` or ``Cyclic(m)``.

    ``n`` is the rank, the dimension or the modulus respectively.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (FREE, FREE_ABELIAN, CYCLIC):
            raise UsageError(f"unknown group kind {self.kind!r}")
        if not isinstance(self.n, int) or isinstance(self.n, bool):
            raise UsageError("group parameter must be an integer")
        if self.kind == FREE and not 1 <= self.n <= len(_LETTERS):
            raise UsageError(f"free rank must be in 1..{len(_LETTERS)}, got {self.n}")
        if self.kind == FREE_ABELIAN and self.n < 1:
            raise UsageError(f"free abelian dimension must be >= 1, got {self.n}")
        if self.kind == CYCLIC and self.n < 2:
            raise UsageError(f"cyclic modulus must be >= 2, got {self.n}")

    @classmethod
    def free(cls, k: int) -> "GroupSpec":
        return cls(FREE, k)

    @classmethod
    def free_abelian(cls, d: int) -> "GroupSpec":
        return cls(FREE_ABELIAN, d)

    @classmethod
    def cyclic(cls, m: int) -> "GroupSpec":
        return cls(CYCLIC, m)

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        """Parse the CLI group names ``F2``, ``Fk:<k>``, ``Z``, ``Zd:<d>``, ``Zmod:<m>``."""
        t = text.strip()
        try:
            if t == "Z":
                return cls.free_abelian(1)
            if t.startswith("Zd:"):
                return cls.free_abelian(int(t[3:]))
            if t.startswith("Zmod:"):
                return cls.cyclic(int(t[5:]))
            if t.startswith("Fk:"):
                return cls.free(int(t[3:]))
            if re.fullmatch(r"F\d+", t):
                return cls.free(int(t[1:]))
        except ValueError as exc:
            raise UsageError(f"bad group spec {text!r}") from exc
        raise UsageError(f"bad group spec {text!r}")

    @property
    def name(self) -> str:
        if self.kind == FREE:
            return f"F{self.n}"
        if self.kind == FREE_ABELIAN:
            return "Z" if self.n == 1 else f"Zd:{self.n}"
        return f"Zmod:{self.n}"

    @property
    def is_abelian(self) -> bool:
        return self.kind != FREE or self.n == 1

    # ------------------------------------------------------------------
    # raw arithmetic

    @property
    def identity(self):
        if self.kind == FREE:
            return ()
        if self.kind == FREE_ABELIAN:
            return (0,) * self.n
        return 0

    def generators(self) -> list:
        """Positive generators in raw form."""
        if self.kind == FREE:
            return [((i, 1),) for i in range(1, self.n + 1)]
        if self.kind == FREE_ABELIAN:
            return [tuple(int(i == j) for j in range(self.n)) for i in range(self.n)]
        return [1]

    def mul(self, x, y):
        if self.kind == FREE:
            return _free_mul(x, y)
        if self.kind == FREE_ABELIAN:
            return tuple(a + b for a, b in zip(x, y))
        return (x + y) % self.n

    def inv(self, x):
        if self.kind == FREE:
            return tuple((g, -e) for g, e in reversed(x))
        if self.kind == FREE_ABELIAN:
            return tuple(-a for a in x)
        return (-x) % self.n

    def conj(self, h, g):
        """``h g h^{-1}``."""
        return self.mul(self.mul(h, g), self.inv(h))

    def length(self, x) -> int:
        if self.kind == FREE:
            return sum(abs(e) for _, e in x)
        if self.kind == FREE_ABELIAN:
            return sum(abs(a) for a in x)
        return min(x, self.n - x)

    def sort_key(self, x):
        return (self.length(x), x)

    def is_identity(self, x) -> bool:
        return x == self.identity

    def validate(self, x) -> None:
        """Raise :class:`UsageError` unless ``x`` is canonical raw data for this spec."""
        if self.kind == FREE:
            if not isinstance(x, tuple):
                raise UsageError("free word must be a tuple of runs")
            prev = None
            for run in x:
                if not (isinstance(run, tuple) and len(run) == 2):
                    raise UsageError(f"bad run {run!r}")
                g, e = run
                if not 1 <= g <= self.n or e == 0 or g == prev:
                    raise UsageError(f"word {x!r} is not reduced in {self.name}")
                prev = g
        elif self.kind == FREE_ABELIAN:
            if not (isinstance(x, tuple) and len(x) == self.n):
                raise UsageError(f"expected a {self.n}-vector, got {x!r}")
        elif not (isinstance(x, int) and 0 <= x < self.n):
            raise UsageError(f"expected a residue mod {self.n}, got {x!r}")

    def reduce(self, letters) -> tuple:
        """Freely reduce a sequence of ``(generator, exponent)`` pairs."""
        out = ()
        for g, e in letters:
            if e:
                out = _free_mul(out, ((g, e),))
        return out

    # ------------------------------------------------------------------
    # enumeration

    def ball_size(self, radius: int) -> int:
        """Number of elements of word length at most ``radius``."""
        if radius < 0:
            return 0
        if self.kind == FREE:
            k = self.n
            return 1 + sum(2 * k * (2 * k - 1) ** (r - 1) for r in range(1, radius + 1))
        if self.kind == FREE_ABELIAN:
            from math import comb

            d = self.n
            return sum(2**i * comb(d, i) * comb(radius, i) for i in range(0, min(d, radius) + 1))
        return min(self.n, 2 * radius + 1)

    def ball(self, radius: int, budget: int | None = None) -> list:
        """All elements of length <= ``radius`` ordered by (length, raw data)."""
        if radius < 0:
            raise UsageError("radius must be >= 0")
        budget = element_budget() if budget is None else budget
        size = self.ball_size(radius)
        if size > budget:
            raise BudgetExceeded(f"ball of radius {radius} in {self.name}", size, budget)
        if self.kind == FREE:
            out = [w for r in range(radius + 1) for w in _free_sphere(self.n, r)]
        elif self.kind == FREE_ABELIAN:
            out = list(_abelian_ball(self.n, radius))
        else:
            out = list(range(self.n)) if 2 * radius + 1 >= self.n else sorted({r % self.n for r in range(-radius, radius + 1)})
        out.sort(key=self.sort_key)
        return out

    # ------------------------------------------------------------------
    # text form

    def format_word(self, x) -> str:
        if self.kind == FREE:
            if not x:
                return "e"
            return " ".join(_LETTERS[g - 1] if e == 1 else f"{_LETTERS[g - 1]}^{e}" for g, e in x)
        if self.kind == FREE_ABELIAN:
            if self.n == 1:
                return str(x[0])
            return "(" + ",".join(str(a) for a in x) + ")"
        return str(x)

    def parse_word(self, text: str):
        t = text.strip()
        if self.kind == FREE:
            return self._parse_free(t)
        if t == "e":
            return self.identity
        if self.kind == FREE_ABELIAN:
            body = t[1:-1] if t.startswith("(") and t.endswith(")") else t
            try:
                vec = tuple(int(s) for s in body.split(","))
            except ValueError as exc:
                raise UsageError(f"bad word {text!r} for {self.name}") from exc
            if len(vec) != self.n:
                raise UsageError(f"expected {self.n} coordinates in {text!r}")
            return vec
        try:
            return int(t) % self.n
        except ValueError as exc:
            raise UsageError(f"bad word {text!r} for {self.name}") from exc

    def _parse_free(self, t: str) -> tuple:
        if t in ("", "e", "1"):
            return ()
        letters = []
        for tok in re.split(r"[\s*]+", t):
            if not tok:
                continue
            m = re.fullmatch(r"([a-z])(?:\^\(?(-?\d+)\)?)?", tok)
            if m is None:
                raise UsageError(f"bad token {tok!r} in word {t!r}")
            g = _LETTERS.index(m.group(1)) + 1
            if g > self.n:
                raise UsageError(f"generator {m.group(1)!r} not in {self.name}")
            letters.append((g, int(m.group(2)) if m.group(2) is not None else 1))
        return self.reduce(letters)


def _free_mul(x: tuple, y: tuple) -> tuple:
    if not x:
        return y
    if not y:
        return x
    if x[-1][0] != y[0][0]:
        return x + y
    i, j = len(x), 0
    while i > 0 and j < len(y):
        g, e = x[i - 1]
        h, f = y[j]
        if g != h:
            break
        s = e + f
        if s:
            return x[: i - 1] + ((g, s),) + y[j + 1 :]
        i -= 1
        j += 1
    return x[:i] + y[j:]


def _free_sphere(k: int, r: int) -> Iterator[tuple]:
    if r == 0:
        yield ()
        return
    letters = [(g, s) for g in range(1, k + 1) for s in (1, -1)]

    def rec(prefix, last, left):
        if left == 0:
            yield prefix
            return
        for g, s in letters:
            if (g, -s) == last:
                continue
            yield from rec(prefix + ((g, s),), (g, s), left - 1)

    for seq in rec((), None, r):
        runs = []
        for g, s in seq:
            if runs and runs[-1][0] == g:
                runs[-1][1] += s
            else:
                runs.append([g, s])
        yield tuple((g, e) for g, e in runs)


def _abelian_ball(d: int, radius: int) -> Iterator[tuple]:
    for vec in itertools.product(range(-radius, radius + 1), repeat=d):
        if sum(abs(a) for a in vec) <= radius:
            yield vec


@total_ordering
@dataclass(frozen=True)
class Word:
    """A group element together with its :class:`GroupSpec`."""

    spec: GroupSpec
    data: object

    @classmethod
    def parse(cls, spec: GroupSpec, text: str) -> "Word":
        return cls(spec, spec.parse_word(text))

    @classmethod
    def identity(cls, spec: GroupSpec) -> "Word":
        return cls(spec, spec.identity)

    def _check(self, other: "Word") -> None:
        if not isinstance(other, Word) or other.spec != self.spec:
            raise UsageError(f"cannot combine words from {self.spec.name} and {getattr(other, 'spec', other)}")

    def __mul__(self, other: "Word") -> "Word":
        self._check(other)
        return Word(self.spec, self.spec.mul(self.data, other.data))

    def inverse(self) -> "Word":
        return Word(self.spec, self.spec.inv(self.data))

    def conj(self, g: "Word") -> "Word":
        """``self * g * self^{-1}``."""
        self._check(g)
        return Word(self.spec, self.spec.conj(self.data, g.data))

    def __len__(self) -> int:
        return self.spec.length(self.data)

    @property
    def is_identity(self) -> bool:
        return self.spec.is_identity(self.data)

    def __lt__(self, other: "Word") -> bool:
        self._check(other)
        return self.spec.sort_key(self.data) < self.spec.sort_key(other.data)

    def __str__(self) -> str:
        return self.spec.format_word(self.data)

    def __repr__(self) -> str:
        return f"Word({self.spec.name}, {self})"


def mul(w: Word, v: Word) -> Word:
    return w * v


def inv(w: Word) -> Word:
    return w.inverse()


def conj(h: Word, g: Word) -> Word:
    return h.conj(g)


def word_length(w: Word) -> int:
    return len(w)


def ball(spec: GroupSpec, radius: int, budget: int | None = None) -> list[Word]:
    return [Word(spec, x) for x in spec.ball(radius, budget)]
