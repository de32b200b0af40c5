"""Rational inner and Cayley inner functions on the polydisk, kernels and the nonuniqueness demo."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .multipoly import CPoly, IndexBox, PowerSeries, as_index, reflect, series_divide

ZERO_TOL = 1e-12
STABILITY_RADII = (0.5, 0.9, 0.99)


class UnstableError(ValueError):
    """The denominator has a zero in the open polydisk (or vanishes at the origin)."""


@dataclass(frozen=True)
class StabilityReport:
    passed: bool
    min_modulus: float
    n_samples: int
    angles_per_axis: int
    min_slice_root: float
    witness: tuple | None = None
    note: str = ("sampling certificate: product grid, random interior points and root checks on "
                 "z_1-slices; not an algebraic proof of stability")


def _product_grid(d: int, radii, n_angles: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(n_angles) / n_angles
    axis = (np.asarray(radii)[:, None] * np.exp(1j * theta)[None, :]).ravel()
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, d)


def _random_interior(d: int, count: int, rng) -> np.ndarray:
    r = np.sqrt(rng.random((count, d)))
    return r * np.exp(2j * np.pi * rng.random((count, d)))


def _slice_coefficients(p: CPoly, zrest: np.ndarray) -> np.ndarray:
    """Coefficients (highest first) of ``p`` as a polynomial in ``z_1`` at each ``z' = zrest``."""
    n1 = p.degree()[0]
    out = np.zeros((zrest.shape[0], n1 + 1), dtype=complex)
    for alpha, c in p.terms.items():
        term = np.full(zrest.shape[0], c, dtype=complex)
        for j, a in enumerate(alpha[1:]):
            if a:
                term = term * zrest[:, j] ** a
        out[:, n1 - alpha[0]] += term
    return out


def _min_root_modulus(coeffs: np.ndarray) -> float:
    best = math.inf
    for row in coeffs:
        nz = np.flatnonzero(np.abs(row) > 0)
        if nz.size == 0:
            return 0.0  # p vanishes identically on this slice
        roots = np.roots(row[nz[0]:])
        if roots.size:
            best = min(best, float(np.min(np.abs(roots))))
    return best


def stability_certificate(p: CPoly, n_angles: int = 2**10, n_random: int = 10**4, seed: int = 0,
                          max_points: int = 2**24) -> StabilityReport:
    """Sampled evidence that ``p`` has no zero in the open polydisk.

    Evaluates ``p`` on ``radii x angles`` per axis (angle count reduced in high
    dimension so the product grid stays below ``max_points``) and at random interior
    points, and checks the roots of the ``z_1``-slices over a coarser grid.
    """
    d = p.dim
    rng = np.random.default_rng(seed)
    per_axis = len(STABILITY_RADII) * n_angles
    while per_axis**d > max_points and n_angles > 8:
        n_angles //= 2
        per_axis = len(STABILITY_RADII) * n_angles
    theta = 2 * np.pi * np.arange(n_angles) / n_angles
    axis = (np.asarray(STABILITY_RADII)[:, None] * np.exp(1j * theta)[None, :]).ravel()
    min_mod = math.inf
    witness = None
    count = 0
    # chunk over the first axis to bound memory
    rest = np.stack(np.meshgrid(*([axis] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1) if d > 1 else None
    for z1 in axis:
        pts = np.full((1 if rest is None else rest.shape[0], d), z1, dtype=complex)
        if rest is not None:
            pts[:, 1:] = rest
        vals = np.abs(p(pts))
        k = int(np.argmin(vals))
        count += vals.size
        if vals[k] < min_mod:
            min_mod, witness = float(vals[k]), tuple(pts[k])
    pts = _random_interior(d, n_random, rng)
    vals = np.abs(p(pts))
    count += vals.size
    k = int(np.argmin(vals))
    if vals[k] < min_mod:
        min_mod, witness = float(vals[k]), tuple(pts[k])

    if p.degree()[0] == 0:
        slice_root = math.inf
    elif d == 1:
        slice_root = _min_root_modulus(_slice_coefficients(p, np.zeros((1, 0))))
    else:
        coarse = 32 if d == 2 else 8
        zr = np.concatenate([_product_grid(d - 1, STABILITY_RADII, coarse), _random_interior(d - 1, 1000, rng)])
        slice_root = _min_root_modulus(_slice_coefficients(p, zr))
    passed = min_mod > ZERO_TOL and slice_root >= 1 - 1e-9
    return StabilityReport(passed, min_mod, count, n_angles, slice_root, witness)


def _monomial(z: np.ndarray, m: tuple[int, ...]) -> np.ndarray:
    out = np.ones(z.shape[:-1], dtype=complex)
    for j, a in enumerate(m):
        if a:
            out = out * z[..., j] ** a
    return out


def _as_points(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z[..., None]
    if z.shape[-1] != d:
        raise ValueError(f"expected points with trailing dimension {d}")
    return z


class RationalInner:
    """``f(z) = z^m p*(z) / p(z)`` with ``p*`` reflected at the multi-degree of ``p``."""

    def __init__(self, p: CPoly, m: Iterable[int], certificate: StabilityReport | None = None):
        self.p = p
        self.m = as_index(m, p.dim)
        self.n = p.degree()
        self.p_star = reflect(p, self.n)
        self.certificate = certificate

    @property
    def dim(self) -> int:
        return self.p.dim

    @property
    def degree(self) -> tuple[int, ...]:
        """Multi-degree of ``z^m p*`` over ``p``: ``m + deg p``."""
        return tuple(a + b for a, b in zip(self.m, self.n))

    def numerator(self) -> CPoly:
        return CPoly.monomial(self.m) * self.p_star

    def __call__(self, z):
        d = self.dim
        scalar = np.ndim(z) == 0 or (np.ndim(z) == 1 and len(z) == d)
        z = _as_points(z, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _monomial(z, self.m) * self.p_star(z) / self.p(z)
        return complex(np.asarray(out).reshape(())) if scalar else out

    def taylor_section(self, n) -> PowerSeries:
        box = IndexBox(tuple(n))
        return series_divide(self.numerator().to_series(box), self.p.to_series(box), box)

    def to_json(self) -> dict:
        return {"p": self.p.to_json(), "m": list(self.m)}

    @classmethod
    def from_json(cls, data: Mapping | str, check: bool = True) -> "RationalInner":
        if isinstance(data, str):
            data = json.loads(data)
        p = CPoly.from_json(data["p"])
        m = data.get("m", [0] * p.dim)
        return rif_from_denominator(p, m) if check else cls(p, m)

    def __repr__(self):
        return f"RationalInner(p={self.p!r}, m={self.m})"


def rif_from_denominator(p: CPoly, m: Iterable[int], **cert_kwargs) -> RationalInner:
    if abs(p.coeff((0,) * p.dim)) == 0:
        raise UnstableError("p(0) = 0")
    cert = stability_certificate(p, **cert_kwargs)
    if not cert.passed:
        raise UnstableError(f"stability check failed: min |p| = {cert.min_modulus:.3g}, "
                            f"min slice root = {cert.min_slice_root:.6g}, witness {cert.witness}")
    return RationalInner(p, m, cert)


class CayleyInner:
    """``phi = (1 + f)/(1 - f)`` for a rational inner ``f``."""

    def __init__(self, rif: RationalInner):
        self.rif = rif
        num = rif.numerator()
        self._num = rif.p + num
        self._den = rif.p - num
        if abs(self._den.coeff((0,) * rif.dim)) == 0:
            raise ZeroDivisionError("f(0) = 1: the Cayley transform has a pole at the origin")

    @property
    def dim(self) -> int:
        return self.rif.dim

    @property
    def degree(self) -> tuple[int, ...]:
        return self.rif.degree

    def __call__(self, z):
        d = self.dim
        scalar = np.ndim(z) == 0 or (np.ndim(z) == 1 and len(z) == d)
        z = _as_points(z, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._num(z) / self._den(z)
        return complex(np.asarray(out).reshape(())) if scalar else out

    def taylor_section(self, n) -> PowerSeries:
        box = IndexBox(tuple(n))
        return series_divide(self._num.to_series(box), self._den.to_series(box), box)

    def to_json(self) -> dict:
        return self.rif.to_json()

    def __repr__(self):
        return f"CayleyInner({self.rif!r})"


def taylor_section(f, n) -> PowerSeries:
    return f.taylor_section(n)


def taylor_section_cauchy(f: Callable, n, radius: float = 0.5, n_nodes: int = 64) -> PowerSeries:
    """Independent route to ``T_n``: trapezoidal Cauchy integrals on a torus of the given radius."""
    n = tuple(n)
    d = len(n)
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    mesh = np.stack(np.meshgrid(*([radius * np.exp(1j * theta)] * d), indexing="ij"), axis=-1)
    vals = np.asarray(f(mesh)).reshape((n_nodes,) * d)
    coef = np.fft.fftn(vals) / n_nodes**d
    sl = tuple(slice(0, k + 1) for k in n)
    grids = np.meshgrid(*(np.arange(k + 1) for k in n), indexing="ij")
    return PowerSeries(coef[sl] / radius ** np.sum(grids, axis=0))


# --------------------------------------------------------------------------
# Cayley transform and kernels


def cayley(f: complex) -> complex:
    if f == 1:
        raise ZeroDivisionError("Cayley transform has a pole at f = 1")
    return (1 + f) / (1 - f)


def cayley_inverse(phi: complex) -> complex:
    if phi == -1:
        raise ZeroDivisionError("inverse Cayley transform has a pole at phi = -1")
    return (phi - 1) / (phi + 1)


def kernel_H(z, xi):
    """``2 / prod(1 - z_j conj(xi_j)) - 1``; the trailing axis indexes the variables."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    out = 2.0 / np.prod(1 - z * np.conj(xi), axis=-1) - 1.0
    return out.item() if np.ndim(out) == 0 else out


def poisson_szego(z, xi):
    """``prod (1 - |z_j|^2) / |1 - z_j conj(xi_j)|^2``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    out = np.prod((1 - np.abs(z) ** 2) / np.abs(1 - z * np.conj(xi)) ** 2, axis=-1)
    return out.item() if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# pluriharmonic moment condition


def is_mixed_sign(alpha) -> bool:
    return any(a > 0 for a in alpha) and any(a < 0 for a in alpha)


@dataclass
class PluriharmonicReport:
    tol: float
    violations: list[tuple[tuple[int, ...], complex]] = field(default_factory=list)
    max_mixed: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations


def pluriharmonic_check(table, tol: float = 5e-3) -> PluriharmonicReport:
    """Mixed-sign Fourier coefficients above ``tol``; a pluriharmonic density has none."""
    report = PluriharmonicReport(tol)
    for alpha, c in table.items():
        if is_mixed_sign(alpha):
            report.max_mixed = max(report.max_mixed, abs(c))
            if abs(c) > tol:
                report.violations.append((tuple(alpha), complex(c)))
    return report


# --------------------------------------------------------------------------
# sup norms and the nonuniqueness families


def _refine(fun, best: np.ndarray, to_point: Callable, width: np.ndarray, levels: int, n_local: int,
            lower: np.ndarray | None = None, upper: np.ndarray | None = None) -> float:
    """Local grid refinement of ``max |fun(to_point(params))|`` around candidate parameters."""
    top = -math.inf
    for x0 in best:
        w = width.copy()
        x = x0.copy()
        for _ in range(levels):
            axes = [np.linspace(xi - wi, xi + wi, n_local) for xi, wi in zip(x, w)]
            if lower is not None:
                axes = [np.clip(a, lo, hi) for a, lo, hi in zip(axes, lower, upper)]
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(x))
            vals = np.abs(fun(to_point(mesh)))
            k = int(np.argmax(vals))
            x = mesh[k]
            top = max(top, float(vals[k]))
            w = w * 2.0 / (n_local - 1)
    return top


def sup_on_torus(fun: Callable, d: int, n_angles: int = 256, radius: float = 1.0, levels: int = 2,
                 n_candidates: int = 4, n_local: int = 17) -> float:
    """``max |fun|`` over the closed polydisk of the given radius (attained on the torus)."""
    theta = 2 * np.pi * np.arange(n_angles) / n_angles
    mesh = np.stack(np.meshgrid(*([theta] * d), indexing="ij"), axis=-1).reshape(-1, d)

    def to_point(t):
        return radius * np.exp(1j * t)

    vals = np.abs(fun(to_point(mesh)))
    coarse = float(np.max(vals))
    idx = np.argsort(vals)[-n_candidates:]
    fine = _refine(fun, mesh[idx], to_point, np.full(d, 2 * np.pi / n_angles), levels, n_local)
    return max(coarse, fine)


def _sphere2_point(params: np.ndarray) -> np.ndarray:
    s, a, b = params[..., 0], params[..., 1], params[..., 2]
    return np.stack([np.cos(s) * np.exp(1j * a), np.sin(s) * np.exp(1j * b)], axis=-1)


def sup_on_ball2(fun: Callable, n_grid: int = 96, levels: int = 2, n_candidates: int = 4, n_local: int = 17) -> float:
    """``max |fun|`` over the closed unit ball of C^2 (attained on the sphere)."""
    s = np.linspace(0, np.pi / 2, n_grid // 2 + 1)
    ang = 2 * np.pi * np.arange(n_grid) / n_grid
    mesh = np.stack(np.meshgrid(s, ang, ang, indexing="ij"), axis=-1).reshape(-1, 3)
    vals = np.abs(fun(_sphere2_point(mesh)))
    coarse = float(np.max(vals))
    idx = np.argsort(vals)[-n_candidates:]
    width = np.array([np.pi / n_grid, 2 * np.pi / n_grid, 2 * np.pi / n_grid])
    lo = np.array([0.0, -np.inf, -np.inf])
    hi = np.array([np.pi / 2, np.inf, np.inf])
    fine = _refine(fun, mesh[idx], _sphere2_point, width, levels, n_local, lo, hi)
    return max(coarse, fine)


def f_family(lam: float) -> CPoly:
    """``z_1 + lam z_2^2``, prescribed affine part ``z_1`` on the ball."""
    return CPoly(2, {(1, 0): 1.0, (0, 2): lam})


def g_family(lam: float) -> CPoly:
    """``(z_1 + z_2)/2 + lam (z_1^2 - z_2^2)``, prescribed affine part ``(z_1 + z_2)/2`` on the bidisk."""
    return CPoly(2, {(1, 0): 0.5, (0, 1): 0.5, (2, 0): lam, (0, 2): -lam})


def affine_section(p: CPoly) -> dict[tuple[int, ...], complex]:
    return {a: c for a, c in p.terms.items() if sum(a) <= 1}


@dataclass(frozen=True)
class DemoRow:
    lam: float
    sup_f: float
    sup_g: float
    affine_f: dict
    affine_g: dict


def nonuniqueness_demo(lams: Iterable[float] | None = None, n_grid: int = 96, n_angles: int = 256) -> list[DemoRow]:
    """Sup norms of the two families with fixed affine Taylor sections, over ``lam`` in [0, 1/4]."""
    if lams is None:
        lams = np.linspace(0.0, 0.25, 11)
    rows = []
    for lam in lams:
        f, g = f_family(float(lam)), g_family(float(lam))
        rows.append(DemoRow(float(lam), sup_on_ball2(f, n_grid=n_grid), sup_on_torus(g, 2, n_angles=n_angles),
                            affine_section(f), affine_section(g)))
    return rows
