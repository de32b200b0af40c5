"""Torus charts, pushforward polynomials, sublevel volumes and the polydisk superresolution sweep."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import linprog
from scipy.stats import qmc

from .multipoly import PowerSeries, TrigPoly
from .phase import PhaseGrid, fit_indicator_poly, phase_function, rif_indicator_poly
from .polydisk import CayleyInner, sup_on_torus


class NoAdmissibleIndex(ValueError):
    pass


def charts(d: int) -> list[tuple[int, ...]]:
    """All ``2^d`` chart choices, each entry 1 or 2."""
    return list(itertools.product((1, 2), repeat=d))


def _as_chart(j, d: int) -> tuple[int, ...]:
    if isinstance(j, int):
        # 1 or 2 in one variable, otherwise an index into charts(d)
        return (j,) if d == 1 and j in (1, 2) else charts(d)[j]
    j = tuple(j)
    if len(j) != d or any(c not in (1, 2) for c in j):
        raise ValueError(f"bad chart {j!r}")
    return j


def chart_map(j, t) -> np.ndarray:
    """``Psi_1(t) = (1 + it)^2/(1 + t^2)`` per axis, negated on axes where ``j_k = 2``."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    d = t.shape[-1] if not scalar else 1
    j = _as_chart(j, d)
    xi = (1 + 1j * t) ** 2 / (1 + t**2)
    xi = xi / np.abs(xi)
    xi = xi * np.where(np.asarray(j) == 2, -1.0, 1.0)
    return complex(xi[0]) if scalar else xi


def chart_density(t) -> np.ndarray:
    """Density of the normalized torus measure pulled back through any chart, w.r.t. Lebesgue on ``[-1,1]^d``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.prod(1.0 / (np.pi * (1 + t**2)), axis=-1)


@dataclass(frozen=True)
class PushforwardPoly:
    coeffs: np.ndarray  # real, indexed by exponents beta
    chart: tuple[int, ...]
    nabs: int

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    def support(self, rtol: float = 1e-12) -> list[tuple[int, ...]]:
        scale = np.max(np.abs(self.coeffs), initial=0.0)
        if scale == 0:
            return []
        return [tuple(int(x) for x in b) for b in np.argwhere(np.abs(self.coeffs) > rtol * scale)]

    @property
    def total_degree(self) -> int:
        return max((sum(b) for b in self.support()), default=0)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.dim == 1 and (t.ndim == 0 or t.shape[-1] != 1):
            t = t[..., None]
        out = np.zeros(t.shape[:-1])
        for beta in self.support(0.0):
            term = np.full(t.shape[:-1], self.coeffs[beta])
            for k, b in enumerate(beta):
                if b:
                    term = term * t[..., k] ** b
            out = out + term
        return out


def _axis_factor(a: int, nabs: int, sign: int) -> np.ndarray:
    """Coefficients of ``sign^a (1 + it)^(2a) (1 + t^2)^(nabs - a)``."""
    u = npoly.polypow([1, 1j], 2 * a) if a else np.array([1.0 + 0j])
    v = npoly.polypow([1, 0, 1], nabs - a) if nabs - a else np.array([1.0])
    return (sign**a) * npoly.polymul(u, v)


def pushforward_Q(P: TrigPoly, j, nabs: int | None = None) -> PushforwardPoly:
    """``Q(t) = prod(1 + t_k^2)^|n| * P(Phi_j(t))`` as a dense real coefficient array."""
    d = P.dim
    j = _as_chart(j, d)
    nabs = sum(P.degree()) if nabs is None else int(nabs)
    if any(a > nabs for a in P.degree()):
        raise ValueError("|n| is below the degree of P")
    c = P.complex_coeffs()
    out = np.zeros((2 * nabs + 1,) * d)
    for alpha in np.ndindex(*c.shape):
        if c[alpha] == 0:
            continue
        W = np.array(1.0 + 0j)
        for k, a in enumerate(alpha):
            f = _axis_factor(a, nabs, -1 if j[k] == 2 else 1)
            W = np.multiply.outer(W, np.pad(f, (0, 2 * nabs + 1 - f.size)))
        out += (c[alpha] * W).real
    return PushforwardPoly(out, j, nabs)


@dataclass(frozen=True)
class AdmissibleIndex:
    m: tuple[int, ...]
    sigma: tuple[int, ...]
    q_m: float

    @property
    def order(self) -> int:
        return sum(self.m)


def _dominates(m, beta, sigma) -> bool:
    for k in sigma:
        if m[k] != beta[k]:
            return m[k] > beta[k]
    return False


def admissible_index(Q: PushforwardPoly) -> AdmissibleIndex:
    supp = Q.support()
    if not supp or all(not any(b) for b in supp):
        raise NoAdmissibleIndex("no admissible index: Q is constant")
    for sigma in itertools.permutations(range(Q.dim)):
        m = max(supp, key=lambda b: tuple(b[k] for k in sigma))
        if all(_dominates(m, b, sigma) for b in supp if b != m):
            return AdmissibleIndex(m, sigma, float(Q.coeffs[m]))
    raise NoAdmissibleIndex("no admissible index")


# --------------------------------------------------------------------------
# sublevel volumes


class LambdaProfile:
    """Bathtub evaluation of ``Lambda_|Q|`` from sorted low-discrepancy samples of ``|Q|`` on ``[-1,1]^d``."""

    def __init__(self, Q: Callable | PushforwardPoly, d: int | None = None, log2_samples: int = 20, seed: int = 0):
        d = Q.dim if d is None else d
        self.d = d
        self.seed = seed
        self.n_samples = 2**log2_samples
        pts = qmc.Sobol(d, scramble=True, seed=seed).random_base2(log2_samples)
        t = 2 * pts - 1
        vals = np.abs(np.asarray(Q(t), dtype=float)).ravel()
        self.sorted = np.sort(vals)
        self.cell = 2.0**d / self.n_samples
        self.cumsum = np.concatenate([[0.0], np.cumsum(self.sorted)]) * self.cell

    @property
    def volume(self) -> float:
        return 2.0**self.d

    def __call__(self, eps):
        e = np.asarray(eps, dtype=float)
        if np.any(e < 0) or np.any(e > self.volume * (1 + 1e-12)):
            raise ValueError(f"eps must lie in [0, {self.volume}]")
        k = np.minimum(e / self.cell, self.n_samples)
        i = np.floor(k).astype(int)
        frac = k - i
        nxt = self.sorted[np.minimum(i, self.n_samples - 1)]
        out = self.cumsum[i] + frac * self.cell * nxt
        return float(out) if np.ndim(out) == 0 else out


def lambda_fn(Q, eps, d: int | None = None, log2_samples: int = 20, seed: int = 0):
    return LambdaProfile(Q, d, log2_samples, seed)(eps)


@dataclass(frozen=True)
class DecayFit:
    c_fit: float
    slope: float
    exponent: int
    eps: np.ndarray
    values: np.ndarray


def lambda_decay_check(Q, m: AdmissibleIndex | int, eps_grid: Sequence[float] | None = None,
                       profile: LambdaProfile | None = None, d: int | None = None, seed: int = 0) -> DecayFit:
    """Largest ``c`` with ``Lambda(eps) >= c eps^(|m|+1)`` on the grid, and the log-log slope of ``Lambda``."""
    order = m.order if isinstance(m, AdmissibleIndex) else int(m)
    eps = np.asarray(np.geomspace(1e-3, 0.25, 12) if eps_grid is None else eps_grid, dtype=float)
    prof = profile or LambdaProfile(Q, d, seed=seed)
    vals = np.asarray(prof(eps))
    c_fit = float(np.min(vals / eps ** (order + 1)))
    slope = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
    return DecayFit(c_fit, slope, order + 1, eps, vals)


# --------------------------------------------------------------------------
# superresolution sweep


class ConstantHerglotz:
    def __init__(self, value: complex, d: int):
        self.value = complex(value)
        self.dim = d

    def __call__(self, z):
        z = np.asarray(z)
        return np.full(z.shape[:-1], self.value) if z.ndim > 1 or self.dim == 1 else self.value

    def taylor_section(self, n) -> PowerSeries:
        c = np.zeros(tuple(k + 1 for k in n), dtype=complex)
        c[(0,) * len(n)] = self.value
        return PowerSeries(c)


class Mixture:
    """``(1 - t) R + t G``; Herglotz whenever ``R`` and ``G`` are."""

    def __init__(self, R, G, t: float):
        self.R, self.G, self.t = R, G, float(t)
        self.dim = R.dim

    def __call__(self, z):
        return (1 - self.t) * np.asarray(self.R(z)) + self.t * np.asarray(self.G(z))

    def taylor_section(self, n) -> PowerSeries:
        return self.R.taylor_section(n) * (1 - self.t) + self.G.taylor_section(n) * self.t


@dataclass(frozen=True)
class SweepRow:
    t: float
    delta: float
    sup_dist: float
    phase_l1: float
    fourier_gap: float
    bound_a_ratio: float
    bound_b_ratio: float
    converged: bool = True

    def as_tuple(self):
        return (self.t, self.delta, self.sup_dist, self.phase_l1, self.fourier_gap, self.bound_a_ratio, self.bound_b_ratio)


CSV_COLUMNS = ("t", "delta", "sup_dist", "phase_l1", "fourier_gap", "bound_a_ratio", "bound_b_ratio")


@dataclass
class ExperimentReport:
    rows: list[SweepRow]
    kappa_pred: float | None
    admissible: list[tuple[tuple[int, ...], AdmissibleIndex | None]]
    slope_fit: float
    A_fit: float
    B_fit: float
    C_fit: float
    rho_empirical: float
    monotone: bool
    form_b_holds: bool
    form_a_holds: bool
    a_valid_delta: tuple[float, float] | None
    indicator: str
    indicator_residual: float
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        def r(x):
            return None if x is None else round(float(x), 12)
        return {"kappa_pred": r(self.kappa_pred), "slope_fit": r(self.slope_fit), "A_fit": r(self.A_fit),
                "B_fit": r(self.B_fit), "C_fit": r(self.C_fit), "rho_empirical": r(self.rho_empirical),
                "monotone": self.monotone, "form_b_holds": self.form_b_holds, "form_a_holds": self.form_a_holds,
                "a_valid_delta": None if self.a_valid_delta is None else [r(x) for x in self.a_valid_delta],
                "indicator": self.indicator, "indicator_residual": r(self.indicator_residual),
                "admissible": [{"chart": list(j), "m": None if a is None else list(a.m)} for j, a in self.admissible]}


def predicted_kappa(P: TrigPoly, nabs: int) -> tuple[float | None, list]:
    """``min_j 1/(|m_j| + 1)`` over the ``2^d`` charts; ``None`` if some chart has no admissible index."""
    found = []
    for j in charts(P.dim):
        try:
            found.append((j, admissible_index(pushforward_Q(P, j, nabs))))
        except NoAdmissibleIndex:
            found.append((j, None))
    if any(a is None for _, a in found):
        return None, found
    return min(1.0 / (a.order + 1) for _, a in found), found


def _fit_envelope(delta: np.ndarray, sup: np.ndarray, power: float) -> tuple[float, float]:
    """Smallest ``A, B >= 0`` (in the sense of sum of bound values) with ``A d + B d^power >= sup``."""
    basis = np.stack([delta, delta**power], axis=1)
    res = linprog(basis.sum(axis=0), A_ub=-basis, b_ub=-sup, bounds=[(0, None), (0, None)], method="highs")
    if not res.success:
        return float(np.max(sup / delta)), 0.0
    A, B = res.x
    # guard against solver tolerance
    scale = max(1.0, float(np.max(sup / (A * delta + B * delta**power))))
    return float(A * scale), float(B * scale)


def superres_sweep(R: CayleyInner, G=None, ts: Iterable[float] | None = None, K_radius: float = 0.5,
                   N: int | None = None, threads: int = 1, sup_angles: int = 128) -> ExperimentReport:
    d = R.dim
    n = R.degree
    G = ConstantHerglotz(1.0, d) if G is None else G
    ts = [2.0**-k for k in range(3, 11)] if ts is None else list(ts)
    N = (2**12 if d == 1 else 2**9) if N is None else N

    ind = rif_indicator_poly(R.rif.p, R.rif.m)
    gR = phase_function(R, N, d)
    if ind.residual > 1e-12:
        ind = fit_indicator_poly(gR, n)
    Pgrid = ind.P.on_grid(N)
    nabs = sum(n)
    kappa, adm = predicted_kappa(ind.P, nabs)
    TR = R.taylor_section(n)

    def one(t):
        f = Mixture(R, G, t)
        delta = (TR - f.taylor_section(n)).norm()
        sup = sup_on_torus(lambda z: np.asarray(R(z)) - np.asarray(f(z)), d, n_angles=sup_angles, radius=K_radius)
        if t == 0:
            return t, delta, 0.0, 0.0, 0.0, True
        h = phase_function(f, N, d)
        diff = gR.samples - h.samples
        return t, delta, sup, float(np.mean(np.abs(diff))), float(abs(np.mean(diff * Pgrid))), h.converged

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            raw = list(ex.map(one, ts))
    else:
        raw = [one(t) for t in ts]
    raw.sort(key=lambda r: (r[1], r[0]))

    delta = np.array([r[1] for r in raw])
    sup = np.array([r[2] for r in raw])
    pos = delta > 0
    kap = kappa if kappa is not None else 1.0
    power = 1.0 / kap
    # calibrate on the larger-delta half, validate on every row
    idx = np.flatnonzero(pos)
    calib = idx[len(idx) // 2:] if len(idx) > 1 else idx
    if calib.size:
        A, B = _fit_envelope(delta[calib], sup[calib], power)
        C = float(np.max(sup[calib] ** kap / delta[calib]))
        slope = float(np.polyfit(np.log(delta[pos]), np.log(np.maximum(sup[pos], 1e-300)), 1)[0]) if pos.sum() > 1 else float("nan")
    else:
        A = B = C = slope = 0.0

    rows = []
    for (t, dl, s, l1, fg, conv) in raw:
        if dl > 0:
            ra = s**kap / (C * dl) if C > 0 else 0.0
            rb = s / (A * dl + B * dl**power) if (A or B) else 0.0
        else:
            ra = rb = 0.0
        rows.append(SweepRow(t, dl, s, l1, fg, ra, rb, conv))

    tol = 1e-9
    monotone = bool(np.all(np.diff(sup) >= -tol * np.maximum(1.0, sup[1:])))
    form_b = all(r.bound_b_ratio <= 1 + tol for r in rows)
    ok_a = [r.bound_a_ratio <= 1 + tol for r in rows]
    form_a = all(ok_a)
    valid = [r.delta for r, ok in zip(rows, ok_a) if ok and r.delta > 0]
    a_range = (min(valid), max(valid)) if valid else None
    # largest rho such that form (a) holds for every sampled delta < rho
    rho = 0.0
    for r, ok in zip(rows, ok_a):
        if not ok:
            break
        rho = r.delta
    return ExperimentReport(rows, kappa, adm, slope, A, B, C, rho, monotone, form_b, form_a, a_range,
                            ind.method, ind.residual,
                            {"N": N, "K_radius": K_radius, "n": list(n)})
