"""Difference bound matrices over integer constants.

Entry ``d[i][j]`` bounds ``x_i - x_j``; index 0 is the constant-zero reference
clock.  A bound ``(c, <=)`` is encoded as ``2c + 1`` and ``(c, <)`` as ``2c``,
so the usual order on bounds is plain integer order and ``INF`` is a large
sentinel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

INF = 1 << 60
LE_ZERO = 1  # (0, <=)
LT_ZERO = 0  # (0, <)


def bound(c: int, strict: bool = False) -> int:
    return 2 * c + (0 if strict else 1)


def bound_value(b: int) -> int:
    return b >> 1


def is_strict(b: int) -> bool:
    return b != INF and not (b & 1)


def add(a: int, b: int) -> int:
    if a == INF or b == INF:
        return INF
    return a + b - ((a & 1) | (b & 1))


def negate(b: int) -> int:
    """Complement bound: not (x - y ≺ c)  <=>  y - x ≺' -c."""
    c = b >> 1
    return bound(-c, strict=not is_strict(b))


def format_bound(b: int) -> str:
    if b == INF:
        return "<inf"
    return ("<" if is_strict(b) else "<=") + str(b >> 1)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    """``x_i - x_j ≺ c`` with indices into the DBM (0 = reference)."""

    i: int
    j: int
    b: int

    def negated(self) -> "Constraint":
        return Constraint(self.j, self.i, negate(self.b))

    @property
    def diagonal(self) -> bool:
        return self.i != 0 and self.j != 0


Matrix = tuple[tuple[int, ...], ...]


def _close(m: list[list[int]]) -> list[list[int]]:
    n = len(m)
    for k in range(n):
        mk = m[k]
        for i in range(n):
            mik = m[i][k]
            if mik == INF:
                continue
            mi = m[i]
            for j in range(n):
                mkj = mk[j]
                if mkj == INF:
                    continue
                s = mik + mkj - ((mik & 1) | (mkj & 1))
                if s < mi[j]:
                    mi[j] = s
    return m


@dataclass(frozen=True)
class Zone:
    """A convex set of clock valuations; kept in canonical form."""

    m: Matrix

    @property
    def dim(self) -> int:
        return len(self.m)

    @property
    def clocks(self) -> int:
        return len(self.m) - 1

    @staticmethod
    def zero(clocks: int) -> "Zone":
        n = clocks + 1
        return Zone(tuple(tuple(LE_ZERO for _ in range(n)) for _ in range(n)))

    @staticmethod
    def universe(clocks: int) -> "Zone":
        n = clocks + 1
        rows = []
        for i in range(n):
            rows.append(tuple(LE_ZERO if (i == j or i == 0) else INF for j in range(n)))
        return Zone(tuple(rows))

    @staticmethod
    def from_matrix(rows: Sequence[Sequence[int]]) -> "Zone":
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionError("DBM must be square")
        return canonicalize(Zone(tuple(tuple(r) for r in rows)))

    def is_empty(self) -> bool:
        return is_empty(self)

    def includes(self, other: "Zone") -> bool:
        """``other ⊆ self`` for canonical zones."""
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch {self.dim} vs {other.dim}")
        if other.is_empty():
            return True
        return all(o <= s for ro, rs in zip(other.m, self.m) for o, s in zip(ro, rs))

    def satisfies(self, constraints: Iterable[Constraint]) -> bool:
        """Every valuation in the zone satisfies all constraints."""
        return all(self.m[c.i][c.j] <= c.b for c in constraints)

    def __str__(self) -> str:
        if self.is_empty():
            return "∅"
        parts = []
        for i in range(self.dim):
            for j in range(self.dim):
                if i != j and self.m[i][j] != INF:
                    lhs = f"x{i}" if j == 0 else ("-x%d" % j if i == 0 else f"x{i}-x{j}")
                    parts.append(f"{lhs}{format_bound(self.m[i][j])}")
        return "{" + ", ".join(parts) + "}"


def _empty(n: int) -> Zone:
    rows = [[INF] * n for _ in range(n)]
    rows[0][0] = bound(-1)
    return Zone(tuple(tuple(r) for r in rows))


def canonicalize(z: Zone) -> Zone:
    """All-pairs shortest-path closure; empty zones get a negative diagonal."""
    m = _close([list(r) for r in z.m])
    if any(m[i][i] < LE_ZERO for i in range(len(m))):
        return _empty(len(m))
    return Zone(tuple(tuple(r) for r in m))


def is_empty(z: Zone) -> bool:
    return any(z.m[i][i] < LE_ZERO for i in range(z.dim))


def up(z: Zone) -> Zone:
    """Delay: drop every upper bound against the reference clock."""
    if is_empty(z):
        return z
    rows = [list(r) for r in z.m]
    for i in range(1, len(rows)):
        rows[i][0] = INF
    return Zone(tuple(tuple(r) for r in rows))


def down(z: Zone) -> Zone:
    """Past: every valuation from which some delay reaches the zone."""
    if is_empty(z):
        return z
    rows = [list(r) for r in z.m]
    n = len(rows)
    for j in range(1, n):
        rows[0][j] = LE_ZERO
        for i in range(1, n):
            if rows[i][j] < rows[0][j]:
                rows[0][j] = rows[i][j]
    return Zone(tuple(tuple(r) for r in rows))


def reset(z: Zone, clocks: Iterable[int]) -> Zone:
    """Set the given clock indices (1-based) to zero."""
    if is_empty(z):
        return z
    rows = [list(r) for r in z.m]
    n = len(rows)
    for x in clocks:
        if not 1 <= x < n:
            raise DimensionError(f"clock index {x} out of range")
        for j in range(n):
            rows[x][j] = rows[0][j]
            rows[j][x] = rows[j][0]
        rows[x][x] = LE_ZERO
    return Zone(tuple(tuple(r) for r in rows))


def free(z: Zone, clocks: Iterable[int]) -> Zone:
    """Forget the given clocks (they may take any non-negative value)."""
    if is_empty(z):
        return z
    rows = [list(r) for r in z.m]
    n = len(rows)
    for x in clocks:
        for j in range(n):
            if j != x:
                rows[x][j] = INF
                rows[j][x] = rows[j][0]
    return canonicalize(Zone(tuple(tuple(r) for r in rows)))


def intersect(z: Zone, constraint: Constraint) -> Zone:
    """Conjoin one constraint and re-canonicalize."""
    n = z.dim
    if not (0 <= constraint.i < n and 0 <= constraint.j < n):
        raise DimensionError(f"constraint indices out of range for dimension {n}")
    if is_empty(z):
        return z
    if z.m[constraint.i][constraint.j] <= constraint.b:
        return z
    if add(z.m[constraint.j][constraint.i], constraint.b) < LE_ZERO:
        return _empty(n)
    rows = [list(r) for r in z.m]
    i, j = constraint.i, constraint.j
    rows[i][j] = constraint.b
    # Incremental closure through the tightened edge.
    for a in range(n):
        ai = rows[a][i]
        if ai == INF:
            continue
        aij = add(ai, constraint.b)
        for c in range(n):
            v = add(aij, rows[j][c])
            if v < rows[a][c]:
                rows[a][c] = v
    if any(rows[k][k] < LE_ZERO for k in range(n)):
        return _empty(n)
    return Zone(tuple(tuple(r) for r in rows))


def intersect_all(z: Zone, constraints: Iterable[Constraint]) -> Zone:
    for c in constraints:
        z = intersect(z, c)
        if is_empty(z):
            break
    return z


def extrapolate(z: Zone, k: int) -> Zone:
    """Classic k-normalization: forget bounds beyond the maximal constant."""
    if is_empty(z):
        return z
    hi = bound(k)
    lo = bound(-k, strict=True)
    rows = [list(r) for r in z.m]
    n = len(rows)
    changed = False
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            b = rows[i][j]
            if b != INF and b > hi:
                rows[i][j] = INF
                changed = True
            elif b < lo:
                rows[i][j] = lo
                changed = True
    if not changed:
        return z
    return canonicalize(Zone(tuple(tuple(r) for r in rows)))


def split_normalize(z: Zone, k: int, diagonals: Sequence[Constraint]) -> list[Zone]:
    """k-normalization that stays exact for diagonal constraints.

    The zone is first split along every diagonal constraint; each piece is
    normalized and then cut back to its side of each split.
    """
    parts = [z]
    for g in diagonals:
        nxt = []
        for p in parts:
            a = intersect(p, g)
            b = intersect(p, g.negated())
            nxt.extend(q for q in (a, b) if not is_empty(q))
        parts = nxt
    out = []
    for p in parts:
        q = extrapolate(p, k)
        for g in diagonals:
            q = intersect(q, g if p.satisfies([g]) else g.negated())
        if not is_empty(q):
            out.append(q)
    return out


def contains_point(z: Zone, point: Sequence) -> bool:
    """Membership of a concrete valuation (numbers, e.g. Fractions)."""
    vals = [0] + list(point)
    for i in range(z.dim):
        for j in range(z.dim):
            b = z.m[i][j]
            if i == j or b == INF:
                continue
            d = vals[i] - vals[j]
            c = b >> 1
            if d > c or (is_strict(b) and d == c):
                return False
    return not is_empty(z)


__all__ = [
    "INF",
    "Constraint",
    "DimensionError",
    "Zone",
    "add",
    "bound",
    "bound_value",
    "canonicalize",
    "contains_point",
    "down",
    "extrapolate",
    "format_bound",
    "free",
    "intersect",
    "intersect_all",
    "is_empty",
    "is_strict",
    "negate",
    "reset",
    "split_normalize",
    "up",
]
