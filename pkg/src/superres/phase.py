"""Phase functions of Herglotz functions on the torus, their Fourier data and reconstruction."""

from __future__ import annotations

import itertools
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .multipoly import CPoly, IndexBox, PowerSeries, TrigPoly, series_log

RADIAL_SCHEDULE = tuple(1 - 2.0**-k for k in range(4, 15))
CAUCHY_TOL = 1e-6
HERGLOTZ_TOL = 1e-8
_MAGIC = b"PHG1"


class NotHerglotzError(ValueError):
    pass


class BranchError(ValueError):
    """``phi`` vanished at a sample, so the logarithm is undefined."""


def torus_grid(N: int, d: int) -> np.ndarray:
    """Points ``exp(2 pi i k / N)`` of the uniform torus grid, shape ``(N,)*d + (d,)``, row-major."""
    axis = np.exp(2j * np.pi * np.arange(N) / N)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)


@dataclass
class PhaseGrid:
    d: int
    N: int
    samples: np.ndarray
    radii: tuple[float, ...] = (1.0,)
    converged: bool = True
    n_radial: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape((self.N,) * self.d)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def to_bytes(self) -> bytes:
        """``PHG1``, uint32 d, N, radius count, the radii, then row-major samples; all little-endian."""
        header = _MAGIC + struct.pack("<III", self.d, self.N, len(self.radii))
        return (header + np.asarray(self.radii, dtype="<f8").tobytes()
                + np.ascontiguousarray(self.samples, dtype="<f8").tobytes())

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "PhaseGrid":
        raw = Path(path).read_bytes()
        if raw[:4] != _MAGIC:
            raise ValueError("not a PHG1 file")
        d, N, nr = struct.unpack("<III", raw[4:16])
        radii = np.frombuffer(raw, dtype="<f8", count=nr, offset=16)
        samples = np.frombuffer(raw, dtype="<f8", offset=16 + 8 * nr).reshape((N,) * d)
        return cls(d, N, samples.copy(), tuple(float(r) for r in radii))


def _g_from_phi(phi: np.ndarray) -> np.ndarray:
    return 0.5 - np.angle(phi) / np.pi


def _bad(phi: np.ndarray) -> np.ndarray:
    a = np.abs(phi)
    return ~np.isfinite(phi) | (a < 1e-14) | (a > 1e14)


def _check_herglotz(phi: np.ndarray) -> None:
    ok = ~_bad(phi)
    if np.any(ok & (phi.real < -HERGLOTZ_TOL * np.maximum(1.0, np.abs(phi)))):
        raise NotHerglotzError("Re phi < 0 at a sample")


def _radial_limit(phi: Callable, xi: np.ndarray, schedule) -> tuple[np.ndarray, bool, float]:
    prev = None
    used = schedule[0]
    for r in schedule:
        with np.errstate(all="ignore"):
            vals = np.asarray(phi(r * xi), dtype=complex)
        _check_herglotz(vals)
        if np.any(np.abs(vals) == 0) or not np.all(np.isfinite(vals)):
            raise BranchError("phi vanished or blew up inside the disk")
        g = _g_from_phi(vals)
        used = r
        if prev is not None and np.max(np.abs(g - prev)) < CAUCHY_TOL:
            return g, True, r
        prev = g
    return prev, False, used


def phase_function(phi: Callable, N: int, d: int, schedule: Iterable[float] = RADIAL_SCHEDULE,
                   threads: int = 1) -> PhaseGrid:
    """Samples of ``g = 1/2 - arg(phi)/pi`` on the ``N^d`` torus grid, clamped to ``[0, 1]``.

    ``phi`` is evaluated on the torus directly; points where that is singular or
    degenerate fall back to radial limits along ``schedule``.
    """
    schedule = tuple(schedule)
    xi = torus_grid(N, d)
    slabs = np.array_split(np.arange(N), max(1, min(threads, N)))

    def fill(rows):
        with np.errstate(all="ignore"):
            vals = np.asarray(phi(xi[rows]), dtype=complex)
        _check_herglotz(vals)
        return _g_from_phi(vals), _bad(vals)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(fill, slabs))
    else:
        parts = [fill(s) for s in slabs]
    g = np.concatenate([p[0] for p in parts])
    bad = np.concatenate([p[1] for p in parts])
    radii = [1.0]
    converged = True
    n_bad = int(bad.sum())
    if n_bad:
        gb, converged, r = _radial_limit(phi, xi[bad], schedule)
        g[bad] = gb
        radii.append(r)
    return PhaseGrid(d, N, np.clip(g, 0.0, 1.0), tuple(radii), converged, n_bad)


# --------------------------------------------------------------------------


def _box_ranges(box, d: int) -> list[range]:
    K = (box,) * d if np.isscalar(box) else tuple(box)
    return [range(-k, k + 1) for k in K]


@dataclass
class FourierTable:
    d: int
    coeffs: dict[tuple[int, ...], complex] = field(default_factory=dict)

    def __getitem__(self, alpha) -> complex:
        return self.coeffs.get(tuple(alpha), 0.0)

    def items(self):
        return self.coeffs.items()

    def keys(self):
        return self.coeffs.keys()

    def restrict(self, box) -> "FourierTable":
        """Entries with ``0 <= alpha <= n`` componentwise."""
        box = box if isinstance(box, IndexBox) else IndexBox(tuple(box))
        return FourierTable(self.d, {a: c for a, c in self.coeffs.items() if a in box})

    def symmetry_residual(self) -> float:
        res = 0.0
        for a, c in self.coeffs.items():
            neg = tuple(-x for x in a)
            if neg in self.coeffs:
                res = max(res, abs(self.coeffs[neg] - np.conj(c)))
        return res

    def max_diff(self, other: "FourierTable", keys: Iterable | None = None) -> float:
        keys = list(self.coeffs) if keys is None else list(keys)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def to_json(self) -> dict:
        return {"dim": self.d, "coeffs": [{"alpha": list(a), "re": float(c.real), "im": float(c.imag)}
                                          for a, c in sorted(self.coeffs.items())]}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "FourierTable":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(int(data["dim"]), {tuple(e["alpha"]): complex(e["re"], e["im"]) for e in data["coeffs"]})


def fourier_coeffs(grid: PhaseGrid, box) -> FourierTable:
    """Equal-weight quadrature ``mean(g * conj(xi)^alpha)`` for ``|alpha_j| <= box_j``."""
    ranges = _box_ranges(box, grid.d)
    if any(r.stop - 1 >= grid.N // 2 for r in ranges):
        raise ValueError(f"box exceeds the Nyquist limit for N={grid.N}")
    spectrum = np.fft.fftn(grid.samples) / grid.N**grid.d
    coeffs = {}
    for alpha in itertools.product(*ranges):
        coeffs[alpha] = complex(spectrum[tuple(a % grid.N for a in alpha)])
    return FourierTable(grid.d, coeffs)


def universal_L(taylor: PowerSeries, phi0: complex | None = None) -> FourierTable:
    """Phase Fourier data on ``Gamma_n`` (and its reflection) from the Taylor section of ``phi``."""
    phi0 = taylor[(0,) * taylor.dim] if phi0 is None else phi0
    if phi0 == 0:
        raise BranchError("phi(0) = 0")
    if phi0.real < -HERGLOTZ_TOL:
        raise NotHerglotzError("Re phi(0) < 0")
    log_s = series_log(taylor)
    coeffs = {}
    for alpha in taylor.box:
        if not any(alpha):
            coeffs[alpha] = complex(0.5 - np.angle(phi0) / np.pi)
        else:
            c = 1j * log_s[alpha] / (2 * np.pi)
            coeffs[alpha] = complex(c)
            coeffs[tuple(-a for a in alpha)] = complex(np.conj(c))
    return FourierTable(taylor.dim, coeffs)


def _H_integral_series(grid: PhaseGrid, z: np.ndarray) -> np.ndarray:
    """``ghat(0) + 2 sum_{alpha >= 0, alpha != 0} ghat(alpha) z^alpha`` with all ``alpha < N/2``."""
    d, N = grid.d, grid.N
    spectrum = np.fft.fftn(grid.samples) / N**d
    sub = spectrum[(slice(0, N // 2),) * d]
    out = np.zeros(z.shape[:-1], dtype=complex)
    # Horner over the last axis then the earlier ones
    for idx in np.ndindex(*sub.shape[:-1]):
        row = sub[idx]
        acc = np.zeros_like(out)
        for c in row[::-1]:
            acc = acc * z[..., -1] + c
        mono = np.ones_like(out)
        for j, a in enumerate(idx):
            mono = mono * z[..., j] ** a
        out += acc * mono
    return 2 * out - spectrum[(0,) * d]


def reconstruct_phi(grid: PhaseGrid, im_psi_0: float, z, method: str = "quadrature", chunk: int = 2**16):
    """``i exp(pi Im psi(0)) exp(-i pi \\int H(z, .) g)`` evaluated at ``z``."""
    d = grid.d
    scalar = np.ndim(z) == 0 or (np.ndim(z) == 1 and len(z) == d)
    z = np.asarray(z, dtype=complex)
    if d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z[..., None]
    pts = z.reshape(-1, d)
    if method == "series":
        integral = _H_integral_series(grid, pts)
    else:
        xi = torus_grid(grid.N, d).reshape(-1, d)
        g = grid.samples.ravel()
        integral = np.zeros(pts.shape[0], dtype=complex)
        for i, zz in enumerate(pts):
            acc = 0.0
            for s in range(0, xi.shape[0], chunk):
                den = np.prod(1 - zz * np.conj(xi[s:s + chunk]), axis=-1)
                acc += np.sum((2.0 / den - 1.0) * g[s:s + chunk])
            integral[i] = acc / xi.shape[0]
    out = 1j * np.exp(np.pi * im_psi_0) * np.exp(-1j * np.pi * integral)
    return complex(out[0]) if scalar else out.reshape(z.shape[:-1])


def im_psi_at_origin(phi0: complex) -> float:
    return float(np.log(abs(phi0)) / np.pi)


# --------------------------------------------------------------------------
# indicator structure


def indicator_fit(grid: PhaseGrid, P: TrigPoly) -> float:
    """Mean over the grid of ``|g - 1{P > 0}|``."""
    vals = P.on_grid(grid.N)
    return float(np.mean(np.abs(grid.samples - (vals > 0))))


def near_half_fraction(grid: PhaseGrid, thresh: float = 0.02) -> float:
    """Fraction of grid cells with ``min(g, 1 - g) > thresh``."""
    s = grid.samples
    return float(np.mean(np.minimum(s, 1 - s) > thresh))


@dataclass(frozen=True)
class IndicatorPoly:
    P: TrigPoly
    residual: float
    method: str


def rif_indicator_poly(p: CPoly, m) -> IndicatorPoly:
    """Exact trig polynomial with ``g = 1{P > 0}`` for the Cayley transform of ``z^m p*/p``.

    On the torus ``f = xi^(m+n) conj(p)^2 / |p|^2`` and ``g = 1{Im f < 0}``, so
    ``P = -Im(xi^(m+n) conj(p)^2)``. Mixed-sign frequencies cannot be stored in a
    ``TrigPoly``; their imbalance is returned as ``residual`` (0 when they cancel).
    """
    d = p.dim
    n = p.degree()
    top = tuple(int(a) + b for a, b in zip(m, n))
    q = p * p
    e = {}
    for gam, c in q.terms.items():
        beta = tuple(t - g for t, g in zip(top, gam))
        e[beta] = e.get(beta, 0) + np.conj(c)
    shape = tuple(t + 1 for t in top)
    cos = np.zeros(shape)
    sin = np.zeros(shape)
    residual = 0.0
    for beta, c in e.items():
        if all(b >= 0 for b in beta):
            cos[beta] += -c.imag
            sin[beta] += c.real
        elif all(b <= 0 for b in beta):
            alpha = tuple(-b for b in beta)
            if any(a >= s for a, s in zip(alpha, shape)):
                residual = max(residual, abs(c))
                continue
            cos[alpha] += -c.imag
            sin[alpha] += -c.real
        else:
            partner = e.get(tuple(-b for b in beta), 0)
            residual = max(residual, abs(c - np.conj(partner)))
    return IndicatorPoly(TrigPoly(cos, sin), float(residual), "exact")


def fit_indicator_poly(grid: PhaseGrid, n) -> IndicatorPoly:
    """Least-squares trig polynomial of multi-degree ``<= n`` matching ``2g - 1``; residual is the sign misfit."""
    box = IndexBox(tuple(n))
    xi = torus_grid(grid.N, grid.d).reshape(-1, grid.d)
    cols, labels = [], []
    for alpha in box:
        w = np.prod(xi ** np.asarray(alpha), axis=-1)
        cols.append(w.real)
        labels.append(("c", alpha))
        if any(alpha):
            cols.append(-w.imag)
            labels.append(("s", alpha))
    A = np.stack(cols, axis=1)
    target = 2 * grid.samples.ravel() - 1
    sol, *_ = np.linalg.lstsq(A, target, rcond=None)
    cos = np.zeros(box.shape)
    sin = np.zeros(box.shape)
    for (kind, alpha), v in zip(labels, sol):
        (cos if kind == "c" else sin)[alpha] = v
    P = TrigPoly(cos, sin)
    return IndicatorPoly(P, indicator_fit(grid, P), "lstsq")
