"""Degree-one rational maps of the unit ball, sphere L2 norms and the ball superresolution bound."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.special import gammaln
from scipy.stats import unitary_group

TAIL_TOL = 1e-10
MAX_DEGREE = 80


class BallDomainError(ValueError):
    pass


def _pairs(x: np.ndarray):
    return np.stack([x.real, x.imag], axis=-1).tolist()


def _unpairs(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


class BallMap:
    """``F(z) = (A[0] + sum_j z_j A[j+1]) / (b[0] + sum_j b[j+1] z_j)`` mapping ``C^d -> C^d``."""

    def __init__(self, A, b):
        A = np.asarray(A, dtype=complex)
        b = np.asarray(b, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1] + 1 or b.shape != (A.shape[0],):
            raise ValueError("A must be (d+1, d) and b of length d+1")
        if b[0] == 0:
            raise BallDomainError("b(0) = 0")
        # normalize b0 = 1 so constants built from b are scale free
        self.A = A / b[0]
        self.b = b / b[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def q(self) -> float:
        """``|b'| / |b_0|``; the denominator is zero free on the closed ball iff ``q < 1``."""
        return float(np.linalg.norm(self.b[1:]))

    @property
    def linear_part(self) -> np.ndarray:
        """Matrix ``M`` with numerator ``A[0] + M z``."""
        return self.A[1:].T

    def denominator(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.b[0] + z @ self.b[1:]

    def numerator(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.A[0] + z @ self.A[1:]

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.numerator(z) / self.denominator(z)[..., None]

    def compose_linear(self, M) -> "BallMap":
        """``F(M z)``."""
        M = np.asarray(M, dtype=complex)
        A = np.vstack([self.A[0], M.T @ self.A[1:]])
        b = np.concatenate([[self.b[0]], M.T @ self.b[1:]])
        return BallMap(A, b)

    def mix(self, s: float, c) -> "BallMap":
        """``(1 - s) F + s c`` for a constant vector ``c``."""
        c = np.asarray(c, dtype=complex)
        A = (1 - s) * self.A + s * np.outer(self.b, c)
        return BallMap(A, self.b)

    def shift(self, v) -> "BallMap":
        """``F + v``: the affine section moves by ``v``, the tail is unchanged."""
        return BallMap(self.A + np.outer(self.b, np.asarray(v, dtype=complex)), self.b)

    def to_json(self) -> dict:
        return {"A": _pairs(self.A), "b": _pairs(self.b)}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "BallMap":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(_unpairs(data["A"]), _unpairs(data["b"]))

    def __repr__(self):
        return f"BallMap(d={self.d}, A={self.A.tolist()}, b={self.b.tolist()})"


def ball_automorphism(a, U=None) -> BallMap:
    """Involution ``phi_a(z) = (a - P_a z - s_a Q_a z)/(1 - <z, a>)``, optionally followed by a unitary ``U``."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    na2 = float(np.vdot(a, a).real)
    if na2 >= 1:
        raise BallDomainError("|a| must be < 1")
    d = a.size
    s = math.sqrt(1 - na2)
    Pa = np.outer(a, a.conj()) / na2 if na2 > 0 else np.zeros((d, d))
    M = -Pa - s * (np.eye(d) - Pa)
    A = np.vstack([a, M.T])
    b = np.concatenate([[1.0], -a.conj()])
    if U is not None:
        A = A @ np.asarray(U, dtype=complex).T
    return BallMap(A, b)


# --------------------------------------------------------------------------
# sphere measure


def sphere_weights(d: int, D: int) -> np.ndarray:
    """``int |zeta^alpha|^2 dsigma = (d-1)! alpha! / (d-1+|alpha|)!`` on the box ``(D+1)^d``, zero past total degree ``D``."""
    grids = np.meshgrid(*([np.arange(D + 1)] * d), indexing="ij")
    tot = sum(grids)
    logw = gammaln(d) + sum(gammaln(g + 1) for g in grids) - gammaln(d + tot)
    return np.where(tot <= D, np.exp(logw), 0.0)


def sphere_samples(d: int, n: int, rng) -> np.ndarray:
    x = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sphere_mean_mc(fun: Callable, d: int, n: int = 2**14, rotations: int = 4, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo mean of ``fun`` over the sphere from ``rotations`` independent, randomly rotated batches; returns (mean, stderr)."""
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(rotations):
        base = sphere_samples(d, n, rng)
        U = unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(2j * np.pi * rng.random()).reshape(1, 1)
        vals.append(np.asarray(fun(base @ U.T), dtype=float))
    vals = np.concatenate(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


class BallPowerSeries:
    """Vector-valued power series truncated at total degree ``D``; ``coeffs[i][alpha]`` is the ``z^alpha`` coefficient of component ``i``."""

    def __init__(self, coeffs: np.ndarray, D: int):
        coeffs = np.asarray(coeffs, dtype=complex)
        self.D = int(D)
        tot = sum(np.meshgrid(*(np.arange(s) for s in coeffs.shape[1:]), indexing="ij"))
        self.coeffs = np.where(tot <= D, coeffs, 0)

    @property
    def d(self) -> int:
        return self.coeffs.ndim - 1

    @classmethod
    def from_ballmap(cls, F: BallMap, D: int) -> "BallPowerSeries":
        d = F.d
        inv = _inverse_linear_layers(F.b, d, D)
        out = np.zeros((d,) + (D + 1,) * d, dtype=complex)
        for i in range(d):
            acc = F.A[0, i] * inv
            for j in range(d):
                acc = acc + F.A[1 + j, i] * _shift(inv, j)
            out[i] = acc
        return cls(out, D)

    def __sub__(self, other: "BallPowerSeries") -> "BallPowerSeries":
        return BallPowerSeries(self.coeffs - other.coeffs, min(self.D, other.D))

    def affine_section(self) -> np.ndarray:
        """Constant then linear coefficients, shape ``(d, d+1)``."""
        d = self.d
        zero = (0,) * d
        cols = [self.coeffs[(slice(None),) + zero]]
        for j in range(d):
            e = tuple(1 if k == j else 0 for k in range(d))
            cols.append(self.coeffs[(slice(None),) + e])
        return np.stack(cols, axis=1)

    def degree_norms2(self) -> np.ndarray:
        """Squared sphere norm of each homogeneous part, degrees ``0..D``."""
        w = sphere_weights(self.d, self.D)
        tot = sum(np.meshgrid(*([np.arange(self.D + 1)] * self.d), indexing="ij"))
        dens = np.sum(np.abs(self.coeffs) ** 2, axis=0) * w
        return np.bincount(tot.ravel(), weights=dens.ravel(), minlength=2 * self.D + 1)[: self.D + 1]

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1] + (self.d,), dtype=complex)
        for alpha in zip(*np.nonzero(np.any(self.coeffs != 0, axis=0))):
            mono = np.prod(z ** np.asarray(alpha), axis=-1)
            out += mono[..., None] * self.coeffs[(slice(None),) + alpha]
        return out


def _shift(a: np.ndarray, j: int) -> np.ndarray:
    """Multiply a dense series by ``z_j`` (dropping overflow)."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    src[j] = slice(0, -1)
    dst[j] = slice(1, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _inverse_linear_layers(b: np.ndarray, d: int, D: int) -> np.ndarray:
    """Series of ``1/(b0 + sum b_j z_j)`` to total degree ``D`` built one homogeneous layer at a time."""
    total = np.zeros((D + 1,) * d, dtype=complex)
    layer = np.zeros_like(total)
    layer[(0,) * d] = 1 / b[0]
    total += layer
    for _ in range(D):
        nxt = np.zeros_like(layer)
        for j in range(d):
            nxt -= (b[1 + j] / b[0]) * _shift(layer, j)
        layer = nxt
        total += layer
    return total


def sphere_l2_norm(f: BallPowerSeries) -> float:
    return float(math.sqrt(np.sum(f.degree_norms2())))


# --------------------------------------------------------------------------
# ball superresolution


def _layer_sup_bound(F: BallMap, k: int) -> float:
    """Sup on the sphere of the degree-``k`` part of ``F``."""
    q = F.q
    a0 = float(np.linalg.norm(F.A[0]))
    m = float(np.linalg.norm(F.linear_part, 2))
    return a0 * q**k + (m * q ** (k - 1) if k >= 1 else 0.0)


def tail_bound2(F: BallMap, f: BallMap, D: int) -> float:
    """Upper bound for ``sum_{k > D} ||(F - f)_k||^2`` from geometric decay of each layer."""
    if F.q >= 1 or f.q >= 1:
        return math.inf
    same_den = np.array_equal(F.b, f.b)
    if same_den:
        # (F - f) = (N_F - N_f)/b is itself a degree-one map
        diff = BallMap(F.A - f.A, F.b)
    total = 0.0
    k = D + 1
    while True:
        if same_den:
            term = _layer_sup_bound(diff, k) ** 2
        else:
            term = (_layer_sup_bound(F, k) + _layer_sup_bound(f, k)) ** 2
        total += term
        if term < 1e-30 * max(total, 1e-300) or term == 0 or k > D + 10**5:
            return total
        k += 1


def b_min_on_sphere(F: BallMap, n_samples: int = 10**4, seed: int = 0) -> float:
    """Minimum of ``|b|`` on the unit sphere: sampling, then local refinement from the best samples."""
    rng = np.random.default_rng(seed)
    d = F.d
    z = sphere_samples(d, n_samples, rng)
    vals = np.abs(F.denominator(z))
    best = float(vals.min())

    def obj(x):
        w = x[:d] + 1j * x[d:]
        n = np.linalg.norm(w)
        return abs(F.denominator(w / n)) ** 2 if n > 0 else np.inf

    for k in np.argsort(vals)[:4]:
        x0 = np.concatenate([z[k].real, z[k].imag])
        res = minimize(obj, x0, method="BFGS", options={"gtol": 1e-12})
        best = min(best, math.sqrt(float(res.fun)))
    return best


def boundary_identity_residual(F: BallMap, n: int = 10**4, seed: int = 0) -> float:
    """``max | sum_j |b F_j|^2 - |b|^2 |`` over sphere samples."""
    rng = np.random.default_rng(seed)
    z = sphere_samples(F.d, n, rng)
    num = F.numerator(z)
    return float(np.max(np.abs(np.sum(np.abs(num) ** 2, axis=-1) - np.abs(F.denominator(z)) ** 2)))


@dataclass(frozen=True)
class BallRow:
    d: int
    rho: float
    lhs: float
    rhs: float
    slack: float
    rhs_sq: float
    slack_sq: float
    rho_l2: float
    b_min: float
    b_norm2: float
    tail2: float
    degree: int

    def as_tuple(self):
        return (self.d, self.rho, self.lhs, self.rhs, self.slack)


def verify_ball_bound(F: BallMap, f: BallMap, degree: int | None = None, n_bmin: int = 10**4, seed: int = 0,
                      check_automorphism: bool = True) -> BallRow:
    """Both sides of ``||F - f||^2 <= C(F)[d(d+1) rho^2 + sqrt(d(d+1)) rho]`` with ``C(F) = ||b||^2 / b_min``.

    ``rhs_sq``/``slack_sq`` use ``b_min^2`` in place of ``b_min``. The left side is the
    truncated series norm plus the tail bound, so it is an upper estimate.
    """
    d = F.d
    if f.d != d:
        raise ValueError("dimension mismatch")
    if F.q >= 1:
        raise BallDomainError("b vanishes on the closed ball")
    if check_automorphism:
        res = boundary_identity_residual(F, seed=seed)
        if res > 1e-9:
            raise BallDomainError(f"F is not an automorphism (boundary residual {res:.3g})")
    D = 12 if degree is None else degree
    tail = tail_bound2(F, f, D)
    while degree is None and tail >= TAIL_TOL and D < MAX_DEGREE:
        D += 4
        tail = tail_bound2(F, f, D)
    diff = BallPowerSeries.from_ballmap(F, D) - BallPowerSeries.from_ballmap(f, D)
    lhs = float(np.sum(diff.degree_norms2())) + tail
    aff = diff.affine_section()
    rho = float(np.linalg.norm(aff))
    rho_l2 = float(math.sqrt(np.sum(diff.degree_norms2()[:2])))
    b_min = b_min_on_sphere(F, n_bmin, seed)
    b_norm2 = float(abs(F.b[0]) ** 2 + np.sum(np.abs(F.b[1:]) ** 2) / d)
    poly = d * (d + 1) * rho**2 + math.sqrt(d * (d + 1)) * rho
    rhs = b_norm2 / b_min * poly
    rhs_sq = b_norm2 / b_min**2 * poly
    return BallRow(d, rho, lhs, rhs, rhs - lhs, rhs_sq, rhs_sq - lhs, rho_l2, b_min, b_norm2, tail, D)


def random_automorphism(d: int, rng, max_norm: float = 0.6) -> BallMap:
    a = sphere_samples(d, 1, rng)[0] * max_norm * rng.random() ** (1 / (2 * d))
    U = unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return ball_automorphism(a, U)


def random_perturbation(F: BallMap, rng, strength: float = 0.1) -> BallMap:
    """``(1 - s) F(r U z) + s c`` with ``U`` a unitary near the identity: a holomorphic self-map of the ball near ``F``."""
    d = F.d
    s = strength * rng.random()
    r = 1 - strength * rng.random()
    H = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    U = expm(0.5j * strength * rng.random() * (H + H.conj().T) / 2)
    c = sphere_samples(d, 1, rng)[0] * rng.random()
    return F.compose_linear(r * U).mix(s, c)
