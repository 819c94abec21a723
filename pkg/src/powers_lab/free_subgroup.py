"""Finitely generated subgroups of free groups via Stallings folding.

The folded graph of ``H = <w_1, ..., w_m>`` gives the rank of ``H`` as
``edges - vertices + 1``.  That is all the moment code needs: if the
non-identity support of an element (one representative per inverse pair) has
exactly ``rank(H)`` members, those members form a free basis of ``H``,
because a surjection between free groups of the same finite rank is an
isomorphism.  In that basis every support word has length at most one, which
lets traces of powers be computed by a first-passage recursion instead of by
expanding convolution powers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .group_core import FREE, GroupSpec


class FoldedGraph:
    """Stallings graph of a subgroup of ``Free(k)``; vertex 0 is the base point."""

    def __init__(self, words):
        self.parent: list[int] = [0]
        self.out: list[dict[int, int]] = [{}]
        for w in words:
            self._add_loop(w)

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def _new_vertex(self) -> int:
        self.parent.append(len(self.parent))
        self.out.append({})
        return len(self.parent) - 1

    def _add_edge(self, u: int, label: int, v: int) -> None:
        pending = []
        for a, lab, b in ((u, label, v), (v, -label, u)):
            a = self.find(a)
            if lab in self.out[a]:
                pending.append((self.out[a][lab], b))
            else:
                self.out[a][lab] = b
        self._merge(pending)

    def _merge(self, pending: list) -> None:
        while pending:
            x, y = pending.pop()
            x, y = self.find(x), self.find(y)
            if x == y:
                continue
            if y < x:
                x, y = y, x
            self.parent[y] = x
            moved, self.out[y] = self.out[y], {}
            for lab, z in moved.items():
                if lab in self.out[x]:
                    pending.append((self.out[x][lab], z))
                else:
                    self.out[x][lab] = z

    def _add_loop(self, word) -> None:
        letters = [(g if e > 0 else -g) for g, e in word for _ in range(abs(e))]
        if not letters:
            return
        cur = 0
        for i, lab in enumerate(letters):
            cur = self.find(cur)
            nxt = self.out[cur].get(lab)
            if i == len(letters) - 1:
                self._add_edge(cur, lab, 0)
            elif nxt is not None:
                cur = nxt
            else:
                v = self._new_vertex()
                self._add_edge(cur, lab, v)
                cur = v

    def vertices(self) -> list[int]:
        return [v for v in range(len(self.parent)) if self.find(v) == v]

    def edges(self) -> list[tuple[int, int, int]]:
        out = []
        for v in self.vertices():
            for lab, w in self.out[v].items():
                if lab > 0:
                    out.append((v, lab, self.find(w)))
        return out

    @property
    def rank(self) -> int:
        return len(self.edges()) - len(self.vertices()) + 1

    def accepts(self, word) -> bool:
        """Whether ``word`` (reduced runs) lies in the subgroup."""
        cur = 0
        for g, e in word:
            lab = g if e > 0 else -g
            for _ in range(abs(e)):
                nxt = self.out[self.find(cur)].get(lab)
                if nxt is None:
                    return False
                cur = nxt
        return self.find(cur) == 0


def subgroup_rank(spec: GroupSpec, words) -> int:
    """Rank of the subgroup of ``Free(k)`` generated by ``words`` (raw runs)."""
    if spec.kind != FREE:
        raise ValueError("subgroup_rank is defined for free groups only")
    return FoldedGraph(words).rank


@dataclass(frozen=True)
class SupportBasis:
    """Support of an element written in a free basis of the subgroup it generates.

    ``letters`` lists the basis words; letter ``2i`` is ``letters[i]`` and
    letter ``2i + 1`` is its inverse.
    """

    spec: GroupSpec
    letters: tuple

    @property
    def rank(self) -> int:
        return len(self.letters)

    def index(self) -> dict:
        """Map from raw word to letter index (including inverses)."""
        idx = {}
        for i, w in enumerate(self.letters):
            idx[w] = 2 * i
            idx[self.spec.inv(w)] = 2 * i + 1
        return idx


def support_basis(spec: GroupSpec, support) -> SupportBasis | None:
    """Return the support as a free basis when it is one, else ``None``.

    Works for free groups; the identity is ignored and ``g`` and ``g^{-1}``
    count once.
    """
    if spec.kind != FREE:
        return None
    reps = []
    seen = set()
    for g in support:
        if spec.is_identity(g) or g in seen:
            continue
        seen.add(g)
        seen.add(spec.inv(g))
        reps.append(g)
    if not reps:
        return None
    reps.sort(key=spec.sort_key)
    if subgroup_rank(spec, reps) != len(reps):
        return None
    return SupportBasis(spec, tuple(reps))
