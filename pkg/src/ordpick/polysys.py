"""Polynomial systems: data model, text formats, orderings and random generation.

Polynomials are sparse, with arbitrary-precision integer coefficients.  Two
representations are used:

* :class:`Polynomial` -- immutable, normalized, canonical monomial order
  (graded-lexicographic, descending).  This is what files and features see.
* ``dict[tuple[int, ...], int]`` -- the "ring dict" used for arithmetic.  The
  helpers ``radd``/``rmul``/... operate on these and never store zeros.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

Exps = tuple  # tuple[int, ...]
RingPoly = dict  # dict[Exps, int]

MAX_ORDERING_VARS = 6


class ParseError(ValueError):
    """Malformed problem text.  ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


# ---------------------------------------------------------------------------
# ring dict arithmetic


def grlex_key(exps: Exps) -> tuple:
    return (sum(exps), exps)


def rclean(p: RingPoly) -> RingPoly:
    return {e: c for e, c in p.items() if c}


def radd(p: RingPoly, q: RingPoly) -> RingPoly:
    out = dict(p)
    for e, c in q.items():
        s = out.get(e, 0) + c
        if s:
            out[e] = s
        else:
            out.pop(e, None)
    return out


def rneg(p: RingPoly) -> RingPoly:
    return {e: -c for e, c in p.items()}


def rsub(p: RingPoly, q: RingPoly) -> RingPoly:
    return radd(p, rneg(q))


def rscale(p: RingPoly, k: int) -> RingPoly:
    if k == 0:
        return {}
    return {e: c * k for e, c in p.items()}


def rmul(p: RingPoly, q: RingPoly) -> RingPoly:
    if len(p) > len(q):
        p, q = q, p
    out: RingPoly = {}
    get = out.get
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple([a + b for a, b in zip(e1, e2)])
            out[e] = get(e, 0) + c1 * c2
    return {e: c for e, c in out.items() if c}


def rpow(p: RingPoly, k: int, n_vars: int) -> RingPoly:
    out: RingPoly = {(0,) * n_vars: 1}
    base = p
    while k:
        if k & 1:
            out = rmul(out, base)
        k >>= 1
        if k:
            base = rmul(base, base)
    return out


def rconst(c: int, n_vars: int) -> RingPoly:
    return {(0,) * n_vars: c} if c else {}


def rleading(p: RingPoly) -> Exps:
    return max(p, key=grlex_key)


def rexquo(p: RingPoly, q: RingPoly) -> RingPoly:
    """Exact quotient ``p / q``; raises ``ArithmeticError`` if q does not divide p."""
    if not q:
        raise ZeroDivisionError("division by the zero polynomial")
    lq = rleading(q)
    cq = q[lq]
    rest = dict(p)
    quot: RingPoly = {}
    while rest:
        lp = rleading(rest)
        cp = rest[lp]
        shift = tuple(a - b for a, b in zip(lp, lq))
        if min(shift) < 0 or cp % cq:
            raise ArithmeticError("polynomial division is not exact")
        k = cp // cq
        quot[shift] = k
        for e, c in q.items():
            t = tuple(a + b for a, b in zip(e, shift))
            s = rest.get(t, 0) - k * c
            if s:
                rest[t] = s
            else:
                rest.pop(t, None)
    return quot


def rcontent(p: RingPoly) -> int:
    g = 0
    for c in p.values():
        g = math.gcd(g, c)
    return g


def rdegree(p: RingPoly, v: int) -> int:
    return max((e[v] for e in p), default=0)


def rtotal_degree(p: RingPoly) -> int:
    return max((sum(e) for e in p), default=0)


def rcoeffs_in(p: RingPoly, v: int) -> dict[int, RingPoly]:
    """Split ``p`` by powers of variable ``v``; the coefficient polys have ``v`` zeroed."""
    out: dict[int, RingPoly] = {}
    for e, c in p.items():
        k = e[v]
        out.setdefault(k, {})[e[:v] + (0,) + e[v + 1:]] = c
    return out


def rderiv(p: RingPoly, v: int) -> RingPoly:
    out: RingPoly = {}
    for e, c in p.items():
        if e[v]:
            out[e[:v] + (e[v] - 1,) + e[v + 1:]] = c * e[v]
    return out


# ---------------------------------------------------------------------------
# value types


class Monomial(NamedTuple):
    exponents: tuple
    coefficient: int


@dataclass(frozen=True)
class Polynomial:
    """Normalized sparse polynomial; the empty monomial tuple is zero."""

    n_vars: int
    monomials: tuple = ()

    @classmethod
    def from_terms(cls, n_vars: int, terms: Iterable[tuple[Sequence[int], int]]) -> "Polynomial":
        acc: RingPoly = {}
        for exps, coeff in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != n_vars:
                raise ValueError(f"exponent vector {exps} has length {len(exps)}, expected {n_vars}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            acc[exps] = acc.get(exps, 0) + int(coeff)
        return cls.from_dict(n_vars, acc)

    @classmethod
    def from_dict(cls, n_vars: int, d: RingPoly) -> "Polynomial":
        keys = sorted((e for e, c in d.items() if c), key=grlex_key, reverse=True)
        return cls(n_vars, tuple(Monomial(e, d[e]) for e in keys))

    def to_dict(self) -> RingPoly:
        return {m.exponents: m.coefficient for m in self.monomials}

    def is_zero(self) -> bool:
        return not self.monomials

    def is_constant(self) -> bool:
        return all(not any(m.exponents) for m in self.monomials)

    def __len__(self) -> int:
        return len(self.monomials)

    def __str__(self) -> str:
        return to_infix(self)


@dataclass(frozen=True)
class PolySystem:
    n_vars: int
    polys: tuple = ()

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be >= 1")
        for p in self.polys:
            if p.n_vars != self.n_vars:
                raise ValueError("polynomial arity does not match system arity")

    def __len__(self) -> int:
        return len(self.polys)


@dataclass(frozen=True)
class VariableOrdering:
    """``perm[0]`` is eliminated first; ``index`` is the lexicographic rank of ``perm``."""

    perm: tuple
    index: int

    @classmethod
    def from_perm(cls, perm: Sequence[int]) -> "VariableOrdering":
        return cls(tuple(perm), perm_to_index(perm))

    @classmethod
    def from_index(cls, index: int, n: int) -> "VariableOrdering":
        return cls(index_to_perm(index, n), index)

    def __str__(self) -> str:
        return ",".join(str(i) for i in self.perm)


@dataclass
class GenConfig:
    """Parameters of the random problem generator.

    Every quantity is drawn from a normal with the given mean/stddev, rounded
    to the nearest integer and clamped into ``[lo, cap]`` (lo is 0 for degrees,
    1 otherwise).  The defaults keep projections of three-variable systems
    cheap while leaving the best ordering predictable from degree features.
    """

    n_vars: int = 3
    degree_mean: float = 0.5
    degree_std: float = 0.9
    degree_cap: int = 2
    coeff_mean: float = 8.0
    coeff_std: float = 15.0
    coeff_cap: int = 100
    terms_mean: float = 3.0
    terms_std: float = 1.0
    terms_cap: int = 5
    polys_mean: float = 2.0
    polys_std: float = 0.8
    polys_cap: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be >= 1")
        for name in ("degree_std", "coeff_std", "terms_std", "polys_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("degree_cap", "coeff_cap", "terms_cap", "polys_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


# ---------------------------------------------------------------------------
# terms format

_TOKEN = re.compile(r"\s*(?:(-?\d+)|(.))", re.S)


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or (m.group(2) is not None and m.group(2).isspace()):
            if text[pos:].isspace():
                break
            raise ParseError("unexpected whitespace", pos)
        if m.group(1) is not None:
            toks.append(("int", int(m.group(1)), m.start(1)))
        else:
            ch = m.group(2)
            if ch not in "[](),":
                raise ParseError(f"unexpected character {ch!r}", m.start(2))
            toks.append((ch, ch, m.start(2)))
        pos = m.end()
    return toks


class _TermsParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def _peek(self):
        if self.i < len(self.toks):
            return self.toks[self.i]
        return ("eof", None, len(self.text))

    def _expect(self, kind):
        tok = self._peek()
        if tok[0] != kind:
            found = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise ParseError(f"expected {kind!r}, found {found}", tok[2])
        self.i += 1
        return tok

    def _list(self, item):
        self._expect("[")
        items = [item()]
        while self._peek()[0] == ",":
            self.i += 1
            items.append(item())
        self._expect("]")
        return items

    def _mono(self):
        start = self._peek()[2]
        self._expect("(")
        self._expect("(")
        exps = [self._expect("int")[1]]
        while self._peek()[0] == ",":
            self.i += 1
            exps.append(self._expect("int")[1])
        self._expect(")")
        self._expect(",")
        coeff = self._expect("int")[1]
        self._expect(")")
        if any(e < 0 for e in exps):
            raise ParseError("negative exponent", start)
        return tuple(exps), coeff, start

    def parse(self) -> list[list[tuple]]:
        tok = self._peek()
        if tok[0] == "eof":
            raise ParseError("empty problem", 0)
        problem = self._list(lambda: self._list(self._mono))
        tok = self._peek()
        if tok[0] != "eof":
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])
        return problem


def parse_problem(line: str) -> PolySystem:
    """Parse one problem in terms format, e.g. ``[[((1,0),3)],[((0,2),-1)]]``."""
    raw = _TermsParser(line).parse()
    n_vars = len(raw[0][0][0])
    polys = []
    for poly in raw:
        for exps, _, pos in poly:
            if len(exps) != n_vars:
                raise ParseError(
                    f"inconsistent arity: exponent vector of length {len(exps)}, expected {n_vars}", pos
                )
        polys.append(Polynomial.from_terms(n_vars, [(e, c) for e, c, _ in poly]))
    return PolySystem(n_vars, tuple(polys))


def serialize_problem(s: PolySystem) -> str:
    parts = []
    for p in s.polys:
        if p.is_zero():
            monos = [((0,) * s.n_vars, 0)]
        else:
            monos = p.monomials
        parts.append(
            "[" + ",".join("((" + ",".join(map(str, e)) + ")," + str(c) + ")" for e, c in monos) + "]"
        )
    return "[" + ",".join(parts) + "]"


def read_problems(path) -> list[PolySystem]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_problem(line))
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_problems(path, problems: Iterable[PolySystem]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in problems:
            fh.write(serialize_problem(s) + "\n")


# ---------------------------------------------------------------------------
# infix format

_INFIX_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\d*\.\d+)|(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))", re.S)


class _InfixParser:
    # expr := term (('+'|'-') term)* ; term := unary ('*' unary)* ;
    # unary := '-' unary | power ; power := atom ('^' int)? ; atom := int | name | '(' expr ')'

    def __init__(self, text: str, var_names: Sequence[str]):
        self.text = text
        self.vars = {name: i for i, name in enumerate(var_names)}
        self.n = len(var_names)
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _INFIX_TOKEN.match(text, pos)
            if m is None or (m.group(4) is not None and m.group(4).isspace()):
                break
            if m.group(1) is not None:
                raise ParseError(f"non-integer coefficient {m.group(1)!r}", m.start(1))
            if m.group(2) is not None:
                self.toks.append(("int", int(m.group(2)), m.start(2)))
            elif m.group(3) is not None:
                self.toks.append(("name", m.group(3), m.start(3)))
            else:
                ch = m.group(4)
                if ch not in "+-*^()":
                    raise ParseError(f"unexpected character {ch!r}", m.start(4))
                self.toks.append((ch, ch, m.start(4)))
            pos = m.end()
        self.i = 0

    def _peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", None, len(self.text))

    def parse(self) -> RingPoly:
        if not self.toks:
            raise ParseError("empty expression", 0)
        p = self._expr()
        tok = self._peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2])
        return p

    def _expr(self):
        p = self._term()
        while self._peek()[0] in "+-":
            op = self._peek()[0]
            self.i += 1
            q = self._term()
            p = radd(p, q) if op == "+" else rsub(p, q)
        return p

    def _term(self):
        p = self._unary()
        while self._peek()[0] == "*":
            self.i += 1
            p = rmul(p, self._unary())
        return p

    def _unary(self):
        if self._peek()[0] == "-":
            self.i += 1
            return rneg(self._unary())
        if self._peek()[0] == "+":
            self.i += 1
            return self._unary()
        return self._power()

    def _power(self):
        base = self._atom()
        if self._peek()[0] == "^":
            self.i += 1
            tok = self._peek()
            if tok[0] != "int":
                raise ParseError("exponent must be a non-negative integer", tok[2])
            self.i += 1
            base = rpow(base, tok[1], self.n)
        return base

    def _atom(self):
        kind, val, pos = self._peek()
        if kind == "int":
            self.i += 1
            return rconst(val, self.n)
        if kind == "name":
            if val not in self.vars:
                raise ParseError(f"unknown identifier {val!r}", pos)
            self.i += 1
            e = [0] * self.n
            e[self.vars[val]] = 1
            return {tuple(e): 1}
        if kind == "(":
            self.i += 1
            p = self._expr()
            tok = self._peek()
            if tok[0] != ")":
                raise ParseError("expected ')'", tok[2])
            self.i += 1
            return p
        raise ParseError("malformed expression", pos)


def parse_infix(text: str, var_names: Sequence[str]) -> PolySystem:
    """Parse ``;``-separated infix polynomials such as ``"x1^2 - 3*x2; x1*x2 + 1"``."""
    if not var_names:
        raise ValueError("at least one variable name is required")
    n = len(var_names)
    polys = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        polys.append(Polynomial.from_dict(n, _InfixParser(chunk, var_names).parse()))
    if not polys:
        raise ParseError("empty problem", 0)
    return PolySystem(n, tuple(polys))


def to_infix(p: Polynomial, var_names: Sequence[str] | None = None) -> str:
    names = var_names or [f"x{i + 1}" for i in range(p.n_vars)]
    if p.is_zero():
        return "0"
    out = []
    for exps, c in p.monomials:
        factors = [names[i] + (f"^{e}" if e > 1 else "") for i, e in enumerate(exps) if e]
        mag = abs(c)
        body = "*".join(([str(mag)] if mag != 1 or not factors else []) + factors)
        sign = "-" if c < 0 else "+"
        out.append((sign, body))
    text = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        text += f" {sign} {body}"
    return text


# ---------------------------------------------------------------------------
# orderings and degrees


def perm_to_index(perm: Sequence[int]) -> int:
    """Lexicographic rank of a permutation of ``range(len(perm))`` (Lehmer code)."""
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{tuple(perm)} is not a permutation of 0..{n - 1}")
    index = 0
    remaining = list(range(n))
    for i, p in enumerate(perm):
        pos = remaining.index(p)
        index += pos * math.factorial(n - 1 - i)
        remaining.pop(pos)
    return index


def index_to_perm(index: int, n: int) -> tuple:
    if not 0 <= index < math.factorial(n):
        raise ValueError(f"ordering index {index} out of range for n={n}")
    remaining = list(range(n))
    perm = []
    for i in range(n - 1, -1, -1):
        pos, index = divmod(index, math.factorial(i))
        perm.append(remaining.pop(pos))
    return tuple(perm)


def enumerate_orderings(n: int, cap: int = MAX_ORDERING_VARS) -> list[VariableOrdering]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cap:
        raise ValueError(f"{n} variables exceeds the ordering cap of {cap} ({math.factorial(n)} orderings)")
    return [VariableOrdering(p, i) for i, p in enumerate(itertools.permutations(range(n)))]


def degree_in(p: Polynomial, v: int) -> int:
    if not 0 <= v < p.n_vars:
        raise IndexError(f"variable index {v} out of range")
    return max((m.exponents[v] for m in p.monomials), default=0)


def total_degree(p: Polynomial) -> int:
    return max((sum(m.exponents) for m in p.monomials), default=0)


# ---------------------------------------------------------------------------
# random generation


def _draw_int(rng: np.random.Generator, mean: float, std: float, lo: int, cap: int) -> int:
    x = mean if std == 0 else rng.normal(mean, std)
    return int(min(max(round(x), lo), cap))


def _random_poly(rng: np.random.Generator, cfg: GenConfig) -> Polynomial:
    n_terms = _draw_int(rng, cfg.terms_mean, cfg.terms_std, 1, cfg.terms_cap)
    terms: RingPoly = {}
    attempts = 0
    while len(terms) < n_terms and attempts < 20 * n_terms:
        attempts += 1
        exps = tuple(
            _draw_int(rng, cfg.degree_mean, cfg.degree_std, 0, cfg.degree_cap) for _ in range(cfg.n_vars)
        )
        mag = _draw_int(rng, cfg.coeff_mean, cfg.coeff_std, 1, cfg.coeff_cap)
        sign = 1 if rng.random() < 0.5 else -1
        if exps in terms:  # repeated monomials would merge; redraw instead
            continue
        terms[exps] = sign * mag
    return Polynomial.from_dict(cfg.n_vars, terms)


def generate_random_dataset(cfg: GenConfig, count: int) -> list[PolySystem]:
    """Draw ``count`` random systems from one sequential RNG stream seeded by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(count):
        n_polys = _draw_int(rng, cfg.polys_mean, cfg.polys_std, 1, cfg.polys_cap)
        out.append(PolySystem(cfg.n_vars, tuple(_random_poly(rng, cfg) for _ in range(n_polys))))
    return out
