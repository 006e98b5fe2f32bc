"""Degree-based feature descriptors for polynomial systems.

A descriptor reads the exponent of one variable in every monomial of every
polynomial, then pushes that ragged matrix through a fixed pipeline::

    post(agg_p(pre_poly(agg_m(pre_mono(d_v)))))

``agg_m`` reduces over the monomials of a polynomial, ``agg_p`` over the
polynomials of the system.  Text form drops identity slots, so the average
over polynomials of the max exponent of x1 reads ``av_p(max_m(d_1))``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .polysys import PolySystem

TRANSFORMS = ("identity", "sign")
AGGREGATES = ("max", "sum", "av")


@dataclass(frozen=True)
class FeatureDescriptor:
    variable: int
    pre_mono: str = "identity"
    agg_mono: str = "max"
    pre_poly: str = "identity"
    agg_poly: str = "av"
    post: str = "identity"

    def __post_init__(self):
        if self.variable < 0:
            raise ValueError("variable index must be >= 0")
        for slot in ("pre_mono", "pre_poly", "post"):
            if getattr(self, slot) not in TRANSFORMS:
                raise ValueError(f"{slot} must be one of {TRANSFORMS}")
        for slot in ("agg_mono", "agg_poly"):
            if getattr(self, slot) not in AGGREGATES:
                raise ValueError(f"{slot} must be one of {AGGREGATES}")

    def __str__(self) -> str:
        return serialize_descriptor(self)


def _sign(x: float) -> float:
    return float((x > 0) - (x < 0))


def _apply(kind: str, x: float) -> float:
    return _sign(x) if kind == "sign" else x


def _aggregate(kind: str, values: Sequence[float]) -> float:
    if kind == "max":
        return float(max(values))
    total = math.fsum(values)
    if kind == "sum":
        return total
    return total / len(values)


def _exponent_rows(s: PolySystem, v: int) -> list[list[int]]:
    # zero polynomials contribute a single all-zero monomial
    return [[m.exponents[v] for m in p.monomials] or [0] for p in s.polys]


def _evaluate(d: FeatureDescriptor, rows: list[list[int]]) -> float:
    per_poly = [_aggregate(d.agg_mono, [_apply(d.pre_mono, e) for e in row]) for row in rows]
    value = _aggregate(d.agg_poly, [_apply(d.pre_poly, x) for x in per_poly])
    return _apply(d.post, value)


def evaluate_descriptor(d: FeatureDescriptor, s: PolySystem) -> float:
    if not s.polys:
        raise ValueError("cannot evaluate features on an empty system")
    if d.variable >= s.n_vars:
        raise ValueError(f"descriptor variable {d.variable + 1} exceeds system arity {s.n_vars}")
    return _evaluate(d, _exponent_rows(s, d.variable))


def generate_raw_descriptors(n_vars: int) -> list[FeatureDescriptor]:
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    return [
        FeatureDescriptor(v, *slots)
        for v in range(n_vars)
        for slots in itertools.product(TRANSFORMS, AGGREGATES, TRANSFORMS, AGGREGATES, TRANSFORMS)
    ]


def _feature_row(ds: Sequence[FeatureDescriptor], s: PolySystem) -> list[float]:
    rows_by_var: dict[int, list[list[int]]] = {}
    out = []
    for d in ds:
        if d.variable >= s.n_vars:
            raise ValueError(f"descriptor {d} needs {d.variable + 1} variables, system has {s.n_vars}")
        rows = rows_by_var.get(d.variable)
        if rows is None:
            rows = rows_by_var[d.variable] = _exponent_rows(s, d.variable)
        out.append(_evaluate(d, rows))
    return out


def evaluate_matrix(ds: Sequence[FeatureDescriptor], problems: Sequence[PolySystem]) -> np.ndarray:
    """Feature matrix, one row per problem and one column per descriptor."""
    n_vars = {s.n_vars for s in problems}
    if len(n_vars) > 1:
        raise ValueError(f"problems have mixed arity {sorted(n_vars)}")
    m = np.empty((len(problems), len(ds)), dtype=np.float64)
    for i, s in enumerate(problems):
        if not s.polys:
            raise ValueError(f"problem {i} is empty")
        m[i, :] = _feature_row(ds, s)
    return m


def simplify_descriptors(ds: Sequence[FeatureDescriptor], m: np.ndarray) -> list[FeatureDescriptor]:
    """Drop constant columns and all but the first of any identical columns."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError("feature matrix is empty")
    if m.shape[1] != len(ds):
        raise ValueError("matrix width does not match descriptor count")
    seen = set()
    keep = []
    for j, d in enumerate(ds):
        col = np.ascontiguousarray(m[:, j])
        if np.all(col == col[0]):
            continue
        key = col.tobytes()
        if key in seen:
            continue
        seen.add(key)
        keep.append(d)
    return keep


# ---------------------------------------------------------------------------
# text form


def serialize_descriptor(d: FeatureDescriptor) -> str:
    text = f"d_{d.variable + 1}"
    if d.pre_mono == "sign":
        text = f"sign({text})"
    text = f"{d.agg_mono}_m({text})"
    if d.pre_poly == "sign":
        text = f"sign({text})"
    text = f"{d.agg_poly}_p({text})"
    if d.post == "sign":
        text = f"sign({text})"
    return text


_DESCRIPTOR = re.compile(
    r"^(?P<post>sign\()?(?P<aggp>max|sum|av)_p\((?P<prep>sign\()?(?P<aggm>max|sum|av)_m\("
    r"(?P<prem>sign\()?d_(?P<var>\d+)\)?\)\)?\)\)?$"
)


def parse_descriptor(text: str, n_vars: int | None = None) -> FeatureDescriptor:
    text = text.strip()
    m = _DESCRIPTOR.match(text)
    if m is None:
        raise ValueError(f"malformed descriptor {text!r}")
    var = int(m.group("var"))
    if var < 1 or (n_vars is not None and var > n_vars):
        raise ValueError(f"variable index d_{var} out of range")
    d = FeatureDescriptor(
        variable=var - 1,
        pre_mono="sign" if m.group("prem") else "identity",
        agg_mono=m.group("aggm"),
        pre_poly="sign" if m.group("prep") else "identity",
        agg_poly=m.group("aggp"),
        post="sign" if m.group("post") else "identity",
    )
    # the regex tolerates unbalanced optional parens; the canonical form does not
    if serialize_descriptor(d) != text:
        raise ValueError(f"malformed descriptor {text!r}")
    return d


def write_descriptors(path, ds: Iterable[FeatureDescriptor]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in ds:
            fh.write(serialize_descriptor(d) + "\n")


def read_descriptors(path, n_vars: int | None = None) -> list[FeatureDescriptor]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                out.append(parse_descriptor(line, n_vars))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_matrix(path, m: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in m:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_matrix(path, n_cols: int | None = None) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() and n_cols != 0:
                continue
            try:
                row = [float(x) for x in line.split()]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if n_cols is not None and len(row) != n_cols:
                raise ValueError(f"{path}:{lineno}: expected {n_cols} values, found {len(row)}")
            rows.append(row)
    if not rows:
        return np.zeros((0, n_cols or 0))
    return np.array(rows, dtype=np.float64)
