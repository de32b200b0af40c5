"""Multivariate polynomial, trigonometric polynomial and truncated power series arithmetic.

Multi-indices are plain tuples of non-negative ints.  Sparse polynomials
(:class:`CPoly`) store a ``{alpha: coeff}`` map; truncated power series
(:class:`PowerSeries`) are dense complex arrays indexed by the box
``Gamma_n = {alpha : 0 <= alpha_j <= n_j}``.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


class DimensionError(ValueError):
    """Operands or evaluation points live in different dimensions."""


def as_index(alpha: Iterable[int], dim: int | None = None) -> MultiIndex:
    alpha = tuple(int(a) for a in alpha)
    if not alpha:
        raise ValueError("multi-index must have length >= 1")
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index entries must be >= 0, got {alpha}")
    if dim is not None and len(alpha) != dim:
        raise DimensionError(f"expected a multi-index of length {dim}, got {alpha}")
    return alpha


@dataclass(frozen=True)
class IndexBox:
    """The box ``Gamma_n`` of multi-indices below ``bound``."""

    bound: MultiIndex

    def __post_init__(self):
        object.__setattr__(self, "bound", as_index(self.bound))

    @property
    def dim(self) -> int:
        return len(self.bound)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.bound)

    def __contains__(self, alpha) -> bool:
        alpha = tuple(alpha)
        return len(alpha) == self.dim and all(0 <= a <= n for a, n in zip(alpha, self.bound))

    def __iter__(self) -> Iterator[MultiIndex]:
        # lexicographic order
        return itertools.product(*(range(n + 1) for n in self.bound))

    def __len__(self) -> int:
        return math.prod(self.shape)


def _box(box) -> IndexBox:
    return box if isinstance(box, IndexBox) else IndexBox(tuple(box))


def _points(point, dim: int) -> np.ndarray:
    z = np.asarray(point, dtype=complex)
    if z.ndim == 0 or (dim == 1 and z.shape[-1] != 1):
        z = z[..., None]
    if z.shape[-1] != dim:
        raise DimensionError(f"point has trailing dimension {z.shape[-1]}, expected {dim}")
    return z


def _power_table(z: np.ndarray, degrees: Sequence[int]) -> list[np.ndarray]:
    """``tables[j][k] = z[..., j] ** k`` for ``k <= degrees[j]``."""
    tables = []
    for j, n in enumerate(degrees):
        col = z[..., j]
        pows = np.empty((n + 1,) + col.shape, dtype=complex)
        pows[0] = 1.0
        for k in range(1, n + 1):
            pows[k] = pows[k - 1] * col
        tables.append(pows)
    return tables


# --------------------------------------------------------------------------
# sparse polynomials


class CPoly:
    """Complex polynomial in ``dim`` variables with sparse coefficient storage."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[Iterable[int], complex] | None = None, tol: float = 0.0):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)
        clean: dict[MultiIndex, complex] = {}
        for alpha, c in (terms or {}).items():
            alpha = as_index(alpha, self.dim)
            c = complex(c)
            clean[alpha] = clean.get(alpha, 0j) + c
        self.terms = {a: c for a, c in sorted(clean.items()) if abs(c) > tol}

    @classmethod
    def constant(cls, dim: int, c: complex) -> "CPoly":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def monomial(cls, alpha: Iterable[int], c: complex = 1.0) -> "CPoly":
        alpha = as_index(alpha)
        return cls(len(alpha), {alpha: c})

    @classmethod
    def from_array(cls, coeffs: np.ndarray, tol: float = 0.0) -> "CPoly":
        coeffs = np.asarray(coeffs, dtype=complex)
        terms = {tuple(int(i) for i in idx): coeffs[idx] for idx in zip(*np.nonzero(coeffs))}
        return cls(coeffs.ndim, terms, tol=tol)

    def degree(self) -> MultiIndex:
        """Multi-degree: ``n_j = deg_{z_j} p`` (zeros for the zero polynomial)."""
        if not self.terms:
            return (0,) * self.dim
        return tuple(max(a[j] for a in self.terms) for j in range(self.dim))

    def total_degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def coeff(self, alpha) -> complex:
        return self.terms.get(tuple(alpha), 0j)

    def to_array(self, shape: Sequence[int] | None = None) -> np.ndarray:
        if shape is None:
            shape = tuple(n + 1 for n in self.degree())
        out = np.zeros(tuple(shape), dtype=complex)
        for a, c in self.terms.items():
            if all(ai < s for ai, s in zip(a, shape)):
                out[a] = c
        return out

    def to_series(self, box) -> "PowerSeries":
        box = _box(box)
        return PowerSeries(self.to_array(box.shape))

    def _check(self, other: "CPoly"):
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if not isinstance(other, CPoly):
            other = CPoly.constant(self.dim, other)
        self._check(other)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0j) + c
        return CPoly(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return CPoly(self.dim, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, CPoly) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, CPoly):
            return CPoly(self.dim, {a: c * complex(other) for a, c in self.terms.items()})
        self._check(other)
        terms: dict[MultiIndex, complex] = {}
        for a, c in self.terms.items():
            for b, e in other.terms.items():
                k = tuple(x + y for x, y in zip(a, b))
                terms[k] = terms.get(k, 0j) + c * e
        return CPoly(self.dim, terms)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, CPoly) and self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, tuple(self.terms.items())))

    def allclose(self, other: "CPoly", atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.coeff(k) - other.coeff(k)) <= atol for k in keys)

    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self):
        body = " + ".join(f"({c:.6g})*z^{a}" for a, c in self.terms.items()) or "0"
        return f"CPoly(dim={self.dim}: {body})"

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "terms": [{"alpha": list(a), "re": c.real, "im": c.imag} for a, c in self.terms.items()],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "CPoly":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["dim"], {tuple(t["alpha"]): complex(t["re"], t.get("im", 0.0)) for t in data["terms"]})


def reflect(p: CPoly, n: Iterable[int]) -> CPoly:
    """Reflection ``p*(z) = z^n conj(p(1/conj z))``.

    The coefficient of ``z^alpha`` in ``p`` moves to ``z^(n - alpha)`` and is conjugated.
    """
    n = as_index(n)
    if len(n) != p.dim:
        raise DimensionError(f"reflection degree {n} does not match dimension {p.dim}")
    deg = p.degree()
    if any(d > k for d, k in zip(deg, n)):
        raise ValueError(f"reflection degree {n} is below the multi-degree {deg} of p")
    return CPoly(p.dim, {tuple(k - a for k, a in zip(n, alpha)): c.conjugate() for alpha, c in p.terms.items()})


# --------------------------------------------------------------------------
# trigonometric polynomials


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial on the torus.

    ``P(xi) = sum_{alpha in Gamma_n} cos[alpha] * Re(xi^alpha) - sin[alpha] * Im(xi^alpha)``,
    i.e. ``cos`` holds the coefficients of ``(conj(xi)^a + xi^a)/2`` and ``sin``
    those of ``(conj(xi)^a - xi^a)/(2i)``.
    """

    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cos, dtype=float)
        s = np.asarray(self.sin, dtype=float)
        if c.shape != s.shape:
            raise ValueError("cos and sin coefficient arrays must share a shape")
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)

    @classmethod
    def zeros(cls, box) -> "TrigPoly":
        shape = _box(box).shape
        return cls(np.zeros(shape), np.zeros(shape))

    @property
    def dim(self) -> int:
        return self.cos.ndim

    @property
    def box(self) -> IndexBox:
        return IndexBox(tuple(s - 1 for s in self.cos.shape))

    def degree(self) -> MultiIndex:
        nz = np.argwhere((self.cos != 0) | (self.sin != 0))
        if len(nz) == 0:
            return (0,) * self.dim
        return tuple(int(v) for v in nz.max(axis=0))

    def complex_coeffs(self) -> np.ndarray:
        """``P = Re(sum_a e[a] xi^a)`` with ``e = cos + i sin``."""
        return self.cos + 1j * self.sin

    def __call__(self, point):
        return evaluate(self, point)

    def on_grid(self, N: int) -> np.ndarray:
        """Values on the uniform ``N^d`` torus grid ``theta_k = 2 pi k / N``."""
        e = np.zeros((N,) * self.dim, dtype=complex)
        sl = tuple(slice(0, min(s, N)) for s in self.cos.shape)
        if any(s > N // 2 for s in self.cos.shape):
            raise ValueError("grid too coarse for the trigonometric degree")
        e[sl] = self.complex_coeffs()[sl]
        # sum_a e[a] exp(+i a theta_k) = N^d * ifftn(e)
        return np.real(np.fft.ifftn(e) * N**self.dim)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "box": list(self.box.bound),
            "cos": [float(v) for v in self.cos.ravel()],
            "sin": [float(v) for v in self.sin.ravel()],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "TrigPoly":
        if isinstance(data, str):
            data = json.loads(data)
        shape = tuple(n + 1 for n in data["box"])
        return cls(np.reshape(data["cos"], shape), np.reshape(data["sin"], shape))


# --------------------------------------------------------------------------
# truncated power series


class PowerSeries:
    """Truncated power series; the truncation box is ``coeffs.shape - 1``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1)
        self.coeffs = c
        self.coeffs.setflags(write=False)

    @classmethod
    def from_poly(cls, p: CPoly, box) -> "PowerSeries":
        return p.to_series(box)

    @classmethod
    def from_dict(cls, terms: Mapping, box) -> "PowerSeries":
        return CPoly(_box(box).dim, terms).to_series(box)

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def box(self) -> IndexBox:
        return IndexBox(tuple(s - 1 for s in self.coeffs.shape))

    def __getitem__(self, alpha) -> complex:
        return complex(self.coeffs[tuple(alpha)])

    def truncate(self, box) -> "PowerSeries":
        box = _box(box)
        if box.dim != self.dim:
            raise DimensionError("truncation box has the wrong dimension")
        if any(a > b for a, b in zip(box.bound, self.box.bound)):
            raise ValueError("cannot truncate to a box larger than the stored one")
        return PowerSeries(self.coeffs[tuple(slice(0, s) for s in box.shape)])

    def _common(self, other: "PowerSeries") -> tuple[np.ndarray, np.ndarray]:
        if self.dim != other.dim:
            raise DimensionError("series dimension mismatch")
        shape = tuple(min(a, b) for a, b in zip(self.coeffs.shape, other.coeffs.shape))
        sl = tuple(slice(0, s) for s in shape)
        return self.coeffs[sl], other.coeffs[sl]

    def __add__(self, other):
        if isinstance(other, PowerSeries):
            a, b = self._common(other)
            return PowerSeries(a + b)
        c = self.coeffs.copy()
        c[(0,) * self.dim] += other
        return PowerSeries(c)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs * other)
        a, b = self._common(other)
        return PowerSeries(_truncated_product(a, b))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs / other)
        return series_divide(self, other, IndexBox(tuple(min(a, b) - 1 for a, b in zip(self.coeffs.shape, other.coeffs.shape))))

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def to_poly(self, tol: float = 0.0) -> CPoly:
        return CPoly.from_array(self.coeffs, tol=tol)

    def allclose(self, other: "PowerSeries", atol: float = 1e-12) -> bool:
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(np.abs(self.coeffs - other.coeffs) <= atol))

    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self):
        return f"PowerSeries(box={self.box.bound}, coeffs={self.coeffs!r})"


def _truncated_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape, dtype=complex)
    for idx in zip(*np.nonzero(b)):
        dst = tuple(slice(i, None) for i in idx)
        src = tuple(slice(0, s - i) for s, i in zip(a.shape, idx))
        out[dst] += b[idx] * a[src]
    return out


def _lex(shape) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(s) for s in shape))


def series_divide(numer: PowerSeries, denom: PowerSeries, box) -> PowerSeries:
    """Taylor coefficients of ``numer/denom`` on ``box``.

    Solves ``denom * q = numer`` coefficient-wise in lexicographic order, which
    is compatible with the partial order of the box.
    """
    box = _box(box)
    if numer.dim != box.dim or denom.dim != box.dim:
        raise DimensionError("series_divide operands and box must share a dimension")
    b0 = denom.coeffs[(0,) * box.dim]
    if b0 == 0:
        raise ZeroDivisionError("denominator has a vanishing constant term")
    a = _fit(numer.coeffs, box.shape)
    b = _fit(denom.coeffs, box.shape)
    q = np.zeros(box.shape, dtype=complex)
    for alpha in _lex(box.shape):
        sub = tuple(slice(0, k + 1) for k in alpha)
        rev = tuple(slice(k, None, -1) for k in alpha)
        # q[alpha] is still zero, so the b0 * q[alpha] term drops out of the sum
        q[alpha] = (a[alpha] - np.sum(b[sub] * q[rev])) / b0
    return PowerSeries(q)


def _fit(c: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    sl = tuple(slice(0, min(s, t)) for s, t in zip(shape, c.shape))
    out[sl] = c[sl]
    return out


def _euler_weights(shape) -> np.ndarray:
    """``|alpha|`` over the box; the Euler operator ``sum z_j d/dz_j`` acts as multiplication by it."""
    grids = np.meshgrid(*(np.arange(s) for s in shape), indexing="ij")
    return np.sum(grids, axis=0).astype(float)


def series_log(s: PowerSeries, box=None) -> PowerSeries:
    """Principal logarithm of a power series, truncated to ``box``.

    Uses ``E(log s) = E(s) / s`` for the Euler operator ``E``.  The constant term is
    the principal logarithm of ``s(0)``.
    """
    box = s.box if box is None else _box(box)
    c0 = complex(s.coeffs[(0,) * s.dim])
    if c0 == 0:
        raise ValueError("series_log: s(0) = 0 has no logarithm")
    if c0.imag == 0 and c0.real < 0:
        raise ValueError("series_log: s(0) lies on the branch cut (negative real axis)")
    a = _fit(s.coeffs, box.shape)
    w = _euler_weights(box.shape)
    q = series_divide(PowerSeries(w * a), PowerSeries(a), box).coeffs.copy()
    nz = w > 0
    q[nz] /= w[nz]
    q[(0,) * s.dim] = cmath.log(c0)
    return PowerSeries(q)


def series_exp(s: PowerSeries, box=None) -> PowerSeries:
    """Exponential of a truncated series via ``E(exp s) = E(s) exp(s)``."""
    box = s.box if box is None else _box(box)
    a = _fit(s.coeffs, box.shape)
    w = _euler_weights(box.shape)
    ea = w * a
    out = np.zeros(box.shape, dtype=complex)
    out[(0,) * s.dim] = cmath.exp(a[(0,) * s.dim])
    for alpha in _lex(box.shape):
        k = sum(alpha)
        if k == 0:
            continue
        sub = tuple(slice(0, i + 1) for i in alpha)
        rev = tuple(slice(i, None, -1) for i in alpha)
        out[alpha] = np.sum(ea[sub] * out[rev]) / k
    return PowerSeries(out)


# --------------------------------------------------------------------------
# evaluation


def evaluate(obj, point):
    """Evaluate a CPoly, TrigPoly or PowerSeries.

    ``point`` has trailing axis of length ``dim``; extra leading axes broadcast.
    For a :class:`TrigPoly` the point is on the torus (``xi``) and the result is real.
    A scalar point is accepted when ``dim == 1``.
    """
    scalar = np.ndim(point) == 0 or (np.ndim(point) == 1 and len(point) == obj.dim)
    if isinstance(obj, CPoly):
        z = _points(point, obj.dim)
        pows = _power_table(z, obj.degree())
        out = np.zeros(z.shape[:-1], dtype=complex)
        for alpha, c in obj.terms.items():
            term = np.full(z.shape[:-1], c, dtype=complex)
            for j, a in enumerate(alpha):
                term = term * pows[j][a]
            out += term
    elif isinstance(obj, PowerSeries):
        z = _points(point, obj.dim)
        batch = z.shape[:-1]
        out = obj.coeffs.reshape(obj.coeffs.shape + (1,) * len(batch))
        # Horner along each coefficient axis, last variable first
        for j in reversed(range(obj.dim)):
            moved = np.moveaxis(out, j, 0)
            acc = moved[-1]
            for k in range(moved.shape[0] - 2, -1, -1):
                acc = acc * z[..., j] + moved[k]
            out = acc
        out = np.broadcast_to(out, batch).astype(complex)
    elif isinstance(obj, TrigPoly):
        xi = _points(point, obj.dim)
        e = CPoly.from_array(obj.complex_coeffs())
        out = np.real(evaluate(e, xi)) if e.terms else np.zeros(xi.shape[:-1])
        out = np.asarray(out)
    else:
        raise TypeError(f"cannot evaluate {type(obj).__name__}")
    if scalar:
        return out.reshape(()).item()
    return out
