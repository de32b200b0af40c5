"""One-variable Schur algorithm, Wall polynomials and the 1-D superresolution certificate."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .multipoly import CPoly, PowerSeries, series_divide

UNIMODULAR_TOL = 1e-10


class NotSchurError(ValueError):
    """Taylor data whose Schur parameters leave the closed unit disk."""


class CertificateError(ValueError):
    """The perturbation radius is too large for the superresolution certificate."""


@dataclass(frozen=True)
class SchurChain:
    parameters: tuple[complex, ...]
    terminated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(complex(g) for g in self.parameters))
        if not self.parameters:
            raise ValueError("a Schur chain needs at least one parameter")

    @property
    def n(self) -> int:
        return len(self.parameters) - 1

    def __len__(self):
        return len(self.parameters)

    def __getitem__(self, k):
        return self.parameters[k]


@dataclass(frozen=True)
class WallQuadruple:
    A: CPoly
    B: CPoly
    A_star: CPoly
    B_star: CPoly
    omega: float
    n: int


@dataclass
class IntermediateTaylorTable:
    """``rows[k]`` holds ``c_0^{(k)}, ..., c_{n-k}^{(k)}``, the known Taylor data of the k-th iterate."""

    rows: list[np.ndarray] = field(default_factory=list)

    def __getitem__(self, kj):
        k, j = kj
        return complex(self.rows[k][j])


def _schur_step(c: np.ndarray) -> tuple[complex, np.ndarray]:
    """Next iterate from ``z f_{k+1} (1 - conj(g) f_k) = f_k - g`` compared coefficient-wise."""
    g = c[0]
    w = 1.0 - abs(g) ** 2
    nxt = np.zeros(len(c) - 1, dtype=complex)
    for j in range(len(nxt)):
        acc = c[j + 1]
        if j:
            acc += np.conj(g) * np.dot(nxt[:j], c[j:0:-1])
        nxt[j] = acc / w
    return g, nxt


def schur_parameters(taylor: Sequence[complex], tol: float = UNIMODULAR_TOL, check: bool = True,
                     return_table: bool = False):
    """Schur parameters of the function with Taylor data ``c_0..c_n``.

    Stops early (``terminated=True``) at the first ``|gamma_k| = 1`` within ``tol``.
    With ``check=False`` the raw rational maps are evaluated without the contractivity
    test; that is what the Lipschitz estimates perturb.
    """
    c = np.asarray(taylor, dtype=complex).ravel()
    if c.size == 0:
        raise ValueError("empty Taylor data")
    gammas: list[complex] = []
    table = IntermediateTaylorTable([c.copy()])
    terminated = False
    while True:
        g = complex(c[0])
        gammas.append(g)
        if check and abs(g) > 1 + tol:
            raise NotSchurError(f"|gamma_{len(gammas) - 1}| = {abs(g):.12g} > 1: data is not from a Schur function")
        if abs(1 - abs(g)) <= tol:
            terminated = True
            break
        if c.size == 1:
            break
        _, c = _schur_step(c)
        table.rows.append(c.copy())
    chain = SchurChain(tuple(gammas), terminated)
    return (chain, table) if return_table else chain


def schur_parameters_by_division(taylor: Sequence[complex]) -> list[complex]:
    """Independent route: iterate ``f_{k+1} = (f_k - g)/(z (1 - conj(g) f_k))`` by series division."""
    c = np.asarray(taylor, dtype=complex).ravel()
    out = []
    while c.size:
        g = complex(c[0])
        out.append(g)
        if abs(1 - abs(g)) <= UNIMODULAR_TOL or c.size == 1:
            break
        num = c.copy()
        num[0] -= g
        den = -np.conj(g) * c
        den[0] += 1.0
        q = series_divide(PowerSeries(num[1:]), PowerSeries(den[:-1]), (c.size - 2,))
        c = q.coeffs
    return out


def _wall_arrays(gam: Sequence[complex]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    n = len(gam) - 1
    A = np.zeros(n + 1, dtype=complex)
    B = np.zeros(n + 1, dtype=complex)
    As = np.zeros(n + 1, dtype=complex)
    Bs = np.zeros(n + 1, dtype=complex)
    g0 = complex(gam[0])
    A[0], As[0], B[0], Bs[0] = g0, g0.conjugate(), 1.0, 1.0
    omega = 1.0 - abs(g0) ** 2
    for g in gam[1:]:
        g = complex(g)
        zBs = np.roll(Bs, 1)
        zAs = np.roll(As, 1)
        # degree stays <= n, so the rolled-in top entry is always zero
        A, B, As, Bs = A + g * zBs, B + g * zAs, zAs + g.conjugate() * B, zBs + g.conjugate() * A
        omega *= 1.0 - abs(g) ** 2
    return A, B, As, Bs, omega


def wall_polynomials(chain: SchurChain | Sequence[complex]) -> WallQuadruple:
    """Wall quadruple ``(A_n, B_n, A*_n, B*_n)`` by the forward recursion.

    ``omega = prod_{j=0}^{n} (1 - |gamma_j|^2)``, which is the constant in
    ``B*_n B_n - A*_n A_n = omega z^n`` (the j = 0 factor is the base case).
    """
    gam = chain.parameters if isinstance(chain, SchurChain) else tuple(complex(g) for g in chain)
    if not gam:
        raise ValueError("empty chain")
    A, B, As, Bs, omega = _wall_arrays(gam)
    return WallQuadruple(CPoly.from_array(A), CPoly.from_array(B), CPoly.from_array(As), CPoly.from_array(Bs),
                         omega, len(gam) - 1)


def wall_identity_residual(quad: WallQuadruple) -> float:
    """Max coefficient error of ``B* B - A* A - omega z^n``."""
    n = quad.n
    lhs = quad.B_star * quad.B - quad.A_star * quad.A - CPoly.monomial((n,), quad.omega)
    return max((abs(c) for c in lhs.terms.values()), default=0.0)


@dataclass(frozen=True)
class RationalFunction:
    numer: CPoly
    denom: CPoly

    def __call__(self, z):
        return np.asarray(self.numer(z)) / np.asarray(self.denom(z))

    def taylor(self, n: int) -> np.ndarray:
        return series_divide(self.numer.to_series((n,)), self.denom.to_series((n,)), (n,)).coeffs


def blaschke_from_chain(chain: SchurChain, n_samples: int = 512) -> RationalFunction:
    if not chain.terminated:
        raise ValueError("chain is not terminated: not a finite Blaschke product")
    quad = wall_polynomials(chain)
    f = RationalFunction(quad.A, quad.B)
    xi = np.exp(2j * np.pi * np.arange(n_samples) / n_samples)
    dev = np.max(np.abs(np.abs(f(xi)) - 1.0))
    if dev > 1e-8:
        raise ArithmeticError(f"reconstructed Blaschke product deviates from unimodularity by {dev:.3g}")
    return f


def schur_recombine(quad: WallQuadruple, h: Callable) -> Callable:
    """``z -> (A_n + z B*_n h) / (B_n + z A*_n h)``."""

    def g(z):
        z = np.asarray(z, dtype=complex)
        hz = np.asarray(h(z), dtype=complex)
        num = quad.A(z) + z * quad.B_star(z) * hz
        den = quad.B(z) + z * quad.A_star(z) * hz
        if np.any((den == 0) & (np.abs(z) < 1)):
            raise ZeroDivisionError("Wall denominator vanished inside the disk")
        return num / den

    return g


# --------------------------------------------------------------------------
# certificate


def min_modulus_on_circle(p: CPoly, n_samples: int = 2**12) -> float:
    """``min |p|`` on the unit circle: dense samples, then golden-section refinement."""
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    vals = np.abs(p(np.exp(1j * theta)))
    best = float(vals.min())
    h = 2 * np.pi / n_samples
    for k in np.argsort(vals)[:4]:
        res = minimize_scalar(lambda t: abs(p(np.exp(1j * t))), bracket=None,
                              bounds=(theta[k] - h, theta[k] + h), method="bounded",
                              options={"xatol": 1e-14})
        best = min(best, float(res.fun))
    return best


def _wall_coeff_vector(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Wall coefficients of degree ``n`` from ``2(n+1)`` real Taylor coordinates."""
    c = x[0::2] + 1j * x[1::2]
    chain = schur_parameters(c, check=False)
    gam = chain.parameters + (0j,) * (n + 1 - len(chain))
    A, B, _, _, _ = _wall_arrays(gam)
    return A, B


def lipschitz_estimate(taylor: Sequence[complex], eps: float, n_points: int = 64, step: float = 1e-5,
                       seed: int = 0) -> float:
    """Empirical ``M`` with ``||A_n - A~_n||_inf, ||B_n - B~_n||_inf <= M ||c - c~||_2``.

    Central differences give the real Jacobian of each complex Wall coefficient; the
    sup-norm change of a polynomial is bounded by the sum of its coefficient changes, so
    ``M = max sum_i ||J_i||_F`` over random points of the eps-ball (and its centre).
    """
    c = np.asarray(taylor, dtype=complex)
    n = len(c) - 1
    x0 = np.column_stack([c.real, c.imag]).ravel()
    rng = np.random.default_rng(seed)
    dim = x0.size
    pts = [x0]
    for _ in range(n_points):
        u = rng.normal(size=dim)
        u *= eps * rng.random() ** (1.0 / dim) / np.linalg.norm(u)
        pts.append(x0 + u)
    best = 0.0
    for x in pts:
        jac_a = np.zeros((n + 1, dim), dtype=complex)
        jac_b = np.zeros((n + 1, dim), dtype=complex)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = step
            ap, bp = _wall_coeff_vector(x + e, n)
            am, bm = _wall_coeff_vector(x - e, n)
            jac_a[:, i] = (ap - am) / (2 * step)
            jac_b[:, i] = (bp - bm) / (2 * step)
        for jac in (jac_a, jac_b):
            # Frobenius norm of the 2 x dim real block of each complex coefficient
            best = max(best, float(np.sum(np.sqrt(np.sum(np.abs(jac) ** 2, axis=1)))))
    return best


@dataclass(frozen=True)
class SuperresCertificate:
    L: float
    M: float
    eps: float
    chain: SchurChain
    quad: WallQuadruple

    def bound(self, z) -> np.ndarray:
        """Certified ``|f(z) - g(z)|`` bound; ``M`` is the fitted Lipschitz constant."""
        r = np.abs(np.asarray(z))
        if self.eps == 0:
            return np.zeros_like(r, dtype=float)
        return 4 * self.M * self.eps / ((self.L - self.M * self.eps) * (1 - r))

    def __iter__(self):
        yield self.L
        yield self.M
        yield self.bound


def superres_bound_1d(f_taylor: Sequence[complex], eps: float, seed: int = 0,
                      n_points: int = 64) -> SuperresCertificate:
    c = np.asarray(f_taylor, dtype=complex)
    n = len(c) - 1
    chain = schur_parameters(c)
    if not chain.terminated or chain.n != n:
        raise ValueError(f"Taylor data must come from a Blaschke product of degree exactly {n}")
    quad = wall_polynomials(chain)
    L = min_modulus_on_circle(quad.B)
    M = lipschitz_estimate(c, eps, n_points=n_points, seed=seed) if eps > 0 else 0.0
    if eps > 0 and L - M * eps <= 0:
        raise CertificateError(f"L - M eps = {L - M * eps:.3g} <= 0: eps too large for the certificate")
    return SuperresCertificate(L, M, float(eps), chain, quad)


@dataclass(frozen=True)
class Perturbation:
    """A Schur function ``g`` with known Taylor section, built from a Wall quadruple and a tail."""

    func: Callable
    taylor: np.ndarray
    label: str = ""


def perturbation_from_chain(gammas: Sequence[complex], h: Callable | None = None, label: str = "") -> Perturbation:
    gammas = list(gammas)
    quad = wall_polynomials(gammas)
    tail = h if h is not None else (lambda z: np.zeros_like(np.asarray(z, dtype=complex)))
    n = len(gammas) - 1
    # the tail enters at order n+1, so T_n(g) = T_n(A_n / B_n)
    taylor = series_divide(quad.A.to_series((n,)), quad.B.to_series((n,)), (n,)).coeffs
    return Perturbation(schur_recombine(quad, tail), taylor, label)


def random_perturbations(f_taylor: Sequence[complex], count: int, size: float, seed: int = 0) -> list[Perturbation]:
    """Schur functions near a Blaschke product with ``||T_n(f) - T_n(g)||_2 <= size``.

    Each ``g`` has jittered Schur parameters (kept strictly inside the disk) and a
    random Moebius tail, so it is a genuine Schur function that is not a Blaschke
    product of degree n.
    """
    c = np.asarray(f_taylor, dtype=complex)
    chain = schur_parameters(c)
    base = np.array(chain.parameters)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        direction = rng.normal(size=base.size) + 1j * rng.normal(size=base.size)
        direction /= np.linalg.norm(direction)
        shrink = rng.random()
        a = 0.9 * rng.random() * np.exp(2j * np.pi * rng.random())
        w = np.exp(2j * np.pi * rng.random())

        def h(z, a=a, w=w):
            z = np.asarray(z)
            return w * (z - a) / (1 - np.conj(a) * z)

        scale = size * rng.random()
        while True:
            gam = base + scale * direction
            mod = np.abs(gam)
            over = mod >= 1
            gam[over] *= (1 - scale * shrink - 1e-12) / mod[over]
            g = perturbation_from_chain(gam, h, label=f"random-{i}")
            if np.linalg.norm(g.taylor - c) <= size:
                break
            scale /= 2
        out.append(g)
    return out


@dataclass(frozen=True)
class SchurRow:
    perturbation: str
    eps: float
    z_radius: float
    max_distance: float
    certified_bound: float

    @property
    def violation(self) -> float:
        return self.max_distance - self.certified_bound


def _circle_max(fun: Callable, r: float, n_theta: int) -> float:
    z = r * np.exp(2j * np.pi * np.arange(n_theta) / n_theta)
    return float(np.max(np.abs(fun(z))))


def verify_superres_1d(f_taylor: Sequence[complex], perturbations: Sequence[Perturbation],
                       radii: Sequence[float] = (0.0, 0.3, 0.5, 0.7, 0.8, 0.9), n_theta: int = 512,
                       seed: int = 0, threads: int = 1) -> list[SchurRow]:
    """Measured ``sup_{|z|=r} |f - g|`` against the certificate, per perturbation and radius.

    The certificate radius for each ``g`` is its actual coefficient gap
    ``eps = ||T_n(f) - T_n(g)||_2``.  By the maximum principle the circle maximum is the
    maximum over the closed disk of that radius.
    """
    c = np.asarray(f_taylor, dtype=complex)
    f = blaschke_from_chain(schur_parameters(c))
    gaps = [float(np.linalg.norm(g.taylor - c)) for g in perturbations]
    # one Lipschitz fit on the largest ball covers every smaller one
    base = superres_bound_1d(c, max(gaps, default=0.0), seed=seed)

    def one(args):
        g, eps = args
        cert = SuperresCertificate(base.L, base.M, eps, base.chain, base.quad)
        rows = []
        for r in radii:
            dist = _circle_max(lambda z: f(z) - g.func(z), r, n_theta)
            rows.append(SchurRow(g.label, eps, float(r), dist, float(cert.bound(r))))
        return rows

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        chunks = list(pool.map(one, zip(perturbations, gaps)))
    return [row for chunk in chunks for row in chunk]
