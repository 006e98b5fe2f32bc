"""Resultants, discriminants, CAD-style projection and the Brown / sotd heuristics.

Everything here is exact integer arithmetic on ring dicts (see
:mod:`ordpick.polysys`).  The projection operator is the reduced
McCallum-style set: coefficients, discriminants and pairwise resultants.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Sequence

from .polysys import PolySystem, Polynomial, RingPoly, VariableOrdering, enumerate_orderings, grlex_key

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Caps:
    max_polys: int = 512
    max_tdeg: int = 64


class Blowup(Exception):
    """A projection level exceeded the configured caps."""


@dataclass(frozen=True)
class ProjectionSet:
    levels: tuple  # tuple[tuple[Polynomial, ...], ...]


@dataclass(frozen=True)
class HeuristicChoice:
    ordering: VariableOrdering
    score: object  # int for sotd (None if every ordering blew up), key tuples for Brown
    prediction_seconds: float
    blowup: bool = False


# ---------------------------------------------------------------------------
# packed ring
#
# Inside this module exponent vectors are packed into one int, variable 0 in
# the most significant field, so monomial multiplication is int addition and
# lexicographic order is int order.  Each field has a guard bit on top for the
# divisibility test in _pexquo.

_W = 24
_FIELD = (1 << (_W - 1)) - 1


class _Packer:
    def __init__(self, n_vars: int):
        self.n = n_vars
        self.shifts = [_W * (n_vars - 1 - i) for i in range(n_vars)]
        self.guard = sum(1 << (s + _W - 1) for s in self.shifts)

    def pack(self, p: RingPoly) -> dict[int, int]:
        out = {}
        for e, c in p.items():
            k = 0
            for ei, s in zip(e, self.shifts):
                if ei > _FIELD:
                    raise OverflowError("exponent too large to pack")
                k |= ei << s
            out[k] = c
        return out

    def unpack_key(self, k: int) -> tuple:
        return tuple((k >> s) & _FIELD for s in self.shifts)

    def unpack(self, p: dict[int, int]) -> RingPoly:
        return {self.unpack_key(k): c for k, c in p.items()}

    def degree(self, p: dict[int, int], v: int) -> int:
        s = self.shifts[v]
        return max(((k >> s) & _FIELD for k in p), default=0)

    def total_degree(self, p: dict[int, int]) -> int:
        return max((sum((k >> s) & _FIELD for s in self.shifts) for k in p), default=0)

    def coeffs_in(self, p: dict[int, int], v: int) -> dict[int, dict[int, int]]:
        s = self.shifts[v]
        mask = ~(_FIELD << s)
        out: dict[int, dict[int, int]] = {}
        for k, c in p.items():
            out.setdefault((k >> s) & _FIELD, {})[k & mask] = c
        return out

    def deriv(self, p: dict[int, int], v: int) -> dict[int, int]:
        s = self.shifts[v]
        one = 1 << s
        return {k - one: c * ((k >> s) & _FIELD) for k, c in p.items() if (k >> s) & _FIELD}

    def is_constant(self, p: dict[int, int]) -> bool:
        return all(k == 0 for k in p)


def _pmul(p: dict[int, int], q: dict[int, int]) -> dict[int, int]:
    if len(p) > len(q):
        p, q = q, p
    out: dict[int, int] = {}
    get = out.get
    qi = list(q.items())
    for k1, c1 in p.items():
        for k2, c2 in qi:
            k = k1 + k2
            out[k] = get(k, 0) + c1 * c2
    return {k: c for k, c in out.items() if c}


def _psub(p: dict[int, int], q: dict[int, int]) -> dict[int, int]:
    out = dict(p)
    for k, c in q.items():
        s = out.get(k, 0) - c
        if s:
            out[k] = s
        else:
            del out[k]
    return out


def _pexquo(p: dict[int, int], q: dict[int, int], guard: int) -> dict[int, int]:
    if len(q) == 1:
        (kq, cq), = q.items()
        out = {}
        for k, c in p.items():
            d, r = divmod(c, cq)
            if r or ((k | guard) - kq) & guard != guard:
                raise ArithmeticError("polynomial division is not exact")
            out[k - kq] = d
        return out
    kq = max(q)
    cq = q[kq]
    rest = dict(p)
    quot = {}
    qi = list(q.items())
    while rest:
        kp = max(rest)
        cp = rest[kp]
        d, r = divmod(cp, cq)
        if r or ((kp | guard) - kq) & guard != guard:
            raise ArithmeticError("polynomial division is not exact")
        shift = kp - kq
        quot[shift] = d
        for k, c in qi:
            t = k + shift
            s = rest.get(t, 0) - d * c
            if s:
                rest[t] = s
            else:
                del rest[t]
    return quot


# ---------------------------------------------------------------------------
# resultant / discriminant


def _sylvester(p, q, v: int, pk: _Packer) -> list[list[dict]]:
    m, n = pk.degree(p, v), pk.degree(q, v)
    cp, cq = pk.coeffs_in(p, v), pk.coeffs_in(q, v)
    size = m + n
    rows = []
    for i in range(n):
        row = [{} for _ in range(size)]
        for k in range(m + 1):
            row[i + k] = cp.get(m - k, {})
        rows.append(row)
    for i in range(m):
        row = [{} for _ in range(size)]
        for k in range(n + 1):
            row[i + k] = cq.get(n - k, {})
        rows.append(row)
    return rows


def sylvester_matrix(p: Polynomial, q: Polynomial, v: int) -> list[list[Polynomial]]:
    """Sylvester matrix of ``p`` and ``q`` with respect to variable ``v``."""
    pk = _Packer(p.n_vars)
    mat = _sylvester(pk.pack(p.to_dict()), pk.pack(q.to_dict()), v, pk)
    return [[Polynomial.from_dict(p.n_vars, pk.unpack(e)) for e in row] for row in mat]


def _bareiss(mat: list[list[dict]], pk: _Packer) -> dict[int, int]:
    """Fraction-free Gaussian elimination determinant over Z[x1..xn]."""
    size = len(mat)
    if size == 0:
        return {0: 1}
    a = [list(row) for row in mat]
    sign = 1
    prev = {0: 1}
    for k in range(size - 1):
        if not a[k][k]:
            for r in range(k + 1, size):
                if a[r][k]:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return {}
        akk = a[k][k]
        row_k = a[k]
        for i in range(k + 1, size):
            row_i = a[i]
            aik = row_i[k]
            for j in range(k + 1, size):
                if aik and row_k[j]:
                    num = _psub(_pmul(akk, row_i[j]), _pmul(aik, row_k[j]))
                elif row_i[j]:
                    num = _pmul(akk, row_i[j])
                else:
                    num = {}
                row_i[j] = _pexquo(num, prev, pk.guard) if num else {}
            row_i[k] = {}
        prev = akk
    det = a[size - 1][size - 1]
    return {k: -c for k, c in det.items()} if sign < 0 else det


def _resultant_packed(p, q, v: int, pk: _Packer) -> dict[int, int]:
    if not p or not q:
        raise ValueError("resultant of the zero polynomial is undefined here")
    if pk.degree(p, v) == 0 and pk.degree(q, v) == 0:
        raise ValueError("both polynomials are constant in the elimination variable")
    return _bareiss(_sylvester(p, q, v, pk), pk)


def resultant(p: Polynomial, q: Polynomial, v: int) -> Polynomial:
    """Res_v(p, q) as the Sylvester determinant, via Bareiss elimination."""
    pk = _Packer(p.n_vars)
    res = _resultant_packed(pk.pack(p.to_dict()), pk.pack(q.to_dict()), v, pk)
    return Polynomial.from_dict(p.n_vars, pk.unpack(res))


def _discriminant_packed(p, v: int, pk: _Packer) -> dict[int, int]:
    d = pk.degree(p, v)
    if d < 2:
        raise ValueError(f"discriminant needs degree >= 2 in the variable, got {d}")
    res = _resultant_packed(p, pk.deriv(p, v), v, pk)
    disc = _pexquo(res, pk.coeffs_in(p, v)[d], pk.guard)
    if (d * (d - 1) // 2) % 2:
        disc = {k: -c for k, c in disc.items()}
    return disc


def discriminant(p: Polynomial, v: int) -> Polynomial:
    pk = _Packer(p.n_vars)
    return Polynomial.from_dict(p.n_vars, pk.unpack(_discriminant_packed(pk.pack(p.to_dict()), v, pk)))


# ---------------------------------------------------------------------------
# projection


class _Level:
    """Deduplicated, insertion-ordered set of primitive, sign-normalized polys."""

    def __init__(self, pk: _Packer):
        self.pk = pk
        self.items: dict[frozenset, dict[int, int]] = {}

    def add(self, p: dict[int, int]) -> None:
        if not p or self.pk.is_constant(p):
            return
        g = 0
        for c in p.values():
            g = math.gcd(g, c)
        lead = max(p, key=lambda k: grlex_key(self.pk.unpack_key(k)))
        if p[lead] < 0:
            g = -g
        q = {k: c // g for k, c in p.items()}
        self.items.setdefault(frozenset(q.items()), q)

    def polys(self) -> list[dict[int, int]]:
        return list(self.items.values())


def _project(polys: Sequence[dict], v: int, pk: _Packer) -> list[dict]:
    out = _Level(pk)
    with_v = []
    for p in polys:
        d = pk.degree(p, v)
        for c in pk.coeffs_in(p, v).values():
            out.add(c)
        if d >= 2:
            out.add(_discriminant_packed(p, v, pk))
        if d >= 1:
            with_v.append(p)
    for i in range(len(with_v)):
        for j in range(i + 1, len(with_v)):
            out.add(_resultant_packed(with_v[i], with_v[j], v, pk))
    return out.polys()


def project_once(polys: Sequence[Polynomial], v: int) -> list[Polynomial]:
    """One projection step eliminating variable ``v``."""
    if not polys:
        return []
    n = polys[0].n_vars
    pk = _Packer(n)
    out = _project([pk.pack(p.to_dict()) for p in polys], v, pk)
    return [Polynomial.from_dict(n, pk.unpack(p)) for p in out]


def _check_caps(level: Sequence[dict], caps: Caps, pk: _Packer) -> None:
    if len(level) > caps.max_polys:
        raise Blowup(f"{len(level)} polynomials > {caps.max_polys}")
    for p in level:
        td = pk.total_degree(p)
        if td > caps.max_tdeg:
            raise Blowup(f"total degree {td} > {caps.max_tdeg}")


def _levels(s: PolySystem, perm: Sequence[int], caps: Caps, cache: dict | None) -> tuple[list[list[dict]], _Packer]:
    # cache maps an elimination prefix to its level (or the Blowup it raised)
    cache = {} if cache is None else cache
    pk = cache.setdefault("packer", _Packer(s.n_vars))
    levels = []
    for depth in range(s.n_vars):
        prefix = tuple(perm[:depth])
        hit = cache.get(prefix)
        if hit is None:
            try:
                if depth == 0:
                    lvl = _Level(pk)
                    for p in s.polys:
                        lvl.add(pk.pack(p.to_dict()))
                    hit = lvl.polys()
                else:
                    hit = _project(levels[-1], perm[depth - 1], pk)
                _check_caps(hit, caps, pk)
            except Blowup as exc:
                hit = exc
            cache[prefix] = hit
        if isinstance(hit, Blowup):
            raise hit
        levels.append(hit)
    return levels, pk


def full_projection(
    s: PolySystem, o: VariableOrdering, caps: Caps = Caps(), cache: dict | None = None
) -> ProjectionSet:
    """All projection levels for ordering ``o``; raises :class:`Blowup` past the caps.

    ``cache`` may be shared between calls on the *same* system and caps, so
    orderings with a common elimination prefix reuse the shared levels.
    """
    if len(o.perm) != s.n_vars:
        raise ValueError("ordering length does not match the number of variables")
    levels, pk = _levels(s, o.perm, caps, cache)
    return ProjectionSet(
        tuple(tuple(Polynomial.from_dict(s.n_vars, pk.unpack(p)) for p in lvl) for lvl in levels)
    )


def sotd_score(s: PolySystem, o: VariableOrdering, caps: Caps = Caps(), cache: dict | None = None) -> int:
    """Sum of total degrees over every polynomial of every projection level."""
    if len(o.perm) != s.n_vars:
        raise ValueError("ordering length does not match the number of variables")
    levels, pk = _levels(s, o.perm, caps, cache)
    return sum(pk.total_degree(p) for lvl in levels for p in lvl)


def sotd_scores(s: PolySystem, caps: Caps = Caps()) -> list[int | None]:
    """sotd score for each ordering in enumeration order; None marks a blowup."""
    cache: dict = {}
    out = []
    for o in enumerate_orderings(s.n_vars):
        try:
            out.append(sotd_score(s, o, caps, cache))
        except Blowup:
            out.append(None)
    return out


def sotd_choose(s: PolySystem, caps: Caps = Caps()) -> HeuristicChoice:
    t0 = time.perf_counter()
    scores = sotd_scores(s, caps)
    finite = [(sc, i) for i, sc in enumerate(scores) if sc is not None]
    if finite:
        score, idx = min(finite)
        blowup = False
    else:
        log.warning("every ordering blew up in projection; choosing ordering 0")
        score, idx, blowup = None, 0, True
    elapsed = time.perf_counter() - t0
    return HeuristicChoice(VariableOrdering.from_index(idx, s.n_vars), score, elapsed, blowup)


# ---------------------------------------------------------------------------
# Brown's heuristic


def brown_keys(s: PolySystem, remaining: Sequence[int]) -> dict[int, tuple]:
    """Per-variable key (degree, max term total degree, term count).

    Term total degrees only count the variables in ``remaining``.
    """
    keys = {}
    for v in remaining:
        deg = 0
        max_td = 0
        count = 0
        for p in s.polys:
            for exps, _ in p.monomials:
                if exps[v]:
                    count += 1
                    deg = max(deg, exps[v])
                    max_td = max(max_td, sum(exps[u] for u in remaining))
        keys[v] = (deg, max_td, count)
    return keys


def brown_choose(s: PolySystem) -> HeuristicChoice:
    t0 = time.perf_counter()
    remaining = list(range(s.n_vars))
    perm = []
    chosen_keys = []
    while remaining:
        keys = brown_keys(s, remaining)
        v = min(remaining, key=lambda u: (keys[u], u))
        perm.append(v)
        chosen_keys.append(keys[v])
        remaining.remove(v)
    elapsed = time.perf_counter() - t0
    return HeuristicChoice(VariableOrdering.from_perm(perm), tuple(chosen_keys), elapsed)
