"""Difference and integral operators on Z^N: p-Laplacian, normalized Laplacian,
Riesz-kernel convolution and one explicit step of the semilinear heat flow."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lattice_core import LatticeError, LatticeFunction, make_box
from .parallel import map_ordered

HEAT_BLOWUP_CAP = 1e6


class IntegratorError(RuntimeError):
    """The explicit heat step produced negative or non-finite values."""


def _signed_power(d: np.ndarray, e: float) -> np.ndarray:
    # |d|^e sign(d), with 0 -> 0 even for negative e
    return np.sign(d) * np.abs(d) ** e


def p_flux(p: float) -> Callable[[np.ndarray], np.ndarray]:
    """The edge flux d -> |d|^{p-2} d."""
    if p == 2:
        return lambda d: d
    return lambda d: _signed_power(d, p - 1.0)


def flux_divergence(padded: np.ndarray, flux: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """sum_{y~x} flux(u(y) - u(x)) for x in ``padded`` minus its outer layer."""
    n = padded.shape[0]
    inner = (slice(1, n - 1),) * padded.ndim
    centre = padded[inner]
    out = np.zeros(centre.shape)
    for k in range(padded.ndim):
        for step in (1, -1):
            sl = list(inner)
            sl[k] = slice(1 + step, n - 1 + step)
            out += flux(padded[tuple(sl)] - centre)
    return out


def p_laplacian(u: LatticeFunction, p: float) -> LatticeFunction:
    """Delta_p u(x) = sum_{y~x} |u(y) - u(x)|^{p-2} (u(y) - u(x)), p > 1.

    The result lives on u's box grown by one, which holds its whole support.
    Zero differences contribute zero.
    """
    if not p > 1:
        raise LatticeError(f"p-Laplacian needs p > 1, got {p}")
    if p < 1.1:
        warnings.warn(f"p-Laplacian with p={p} is ill-conditioned near zero differences", stacklevel=2)
    out = flux_divergence(np.pad(u.values, 2), p_flux(p))
    return LatticeFunction(u.box.grown(1), out)


def normalized_laplacian(u: LatticeFunction) -> LatticeFunction:
    """Delta u(x) = (1 / d_x) sum_{y~x} (u(y) - u(x)) with d_x = 2N."""
    lap = p_laplacian(u, 2.0)
    return lap.with_values(lap.values / (2 * u.dimension))


# ----------------------------------------------------------------------------
# Riesz convolution


@dataclass(frozen=True)
class RieszKernel:
    """k(i) = |i|^{-lam} for i != 0 and k(0) = 0.

    ``metric`` picks the norm of the integer offset: Euclidean by default,
    or the l1 (graph) distance for sensitivity runs.
    """

    lam: float
    metric: str = "euclidean"

    def __post_init__(self):
        if not self.lam > 0:
            raise LatticeError(f"kernel exponent must be positive, got {self.lam}")
        if self.metric not in ("euclidean", "l1"):
            raise LatticeError(f"unknown kernel metric {self.metric!r}")

    def __call__(self, offsets: np.ndarray) -> np.ndarray:
        offsets = np.asarray(offsets, dtype=float)
        if self.metric == "euclidean":
            dist = np.sqrt(np.sum(offsets**2, axis=-1))
        else:
            dist = np.sum(np.abs(offsets), axis=-1)
        out = np.zeros(dist.shape)
        nz = dist > 0
        out[nz] = dist[nz] ** (-self.lam)
        return out


def _check_lambda(lam: float, N: int) -> None:
    if not 0 < lam < N:
        raise LatticeError(f"need 0 < lambda < N = {N}, got {lam}")


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _direct(f: LatticeFunction, kernel, R_out: int) -> np.ndarray:
    src = f.box.coordinates().astype(float)
    fv = f.values.ravel()
    dst = make_box(f.dimension, R_out).coordinates().astype(float)
    chunk = 256

    def rows(start):
        block = dst[start : start + chunk]
        k = kernel(block[:, None, :] - src[None, :, :])
        return np.sum(k * fv[None, :], axis=1)

    parts = map_ordered(rows, range(0, dst.shape[0], chunk))
    return np.concatenate(parts).reshape((2 * R_out + 1,) * f.dimension)


def _fft(f: LatticeFunction, kernel, R_out: int) -> np.ndarray:
    N, R_in = f.dimension, f.radius
    span = R_in + R_out
    L = _next_pow2(max(2 * (2 * R_out + 1), 2 * span + 1))
    # kernel offset o stored at index o mod L; offsets in [-span, span] are
    # distinct mod L so no wrap-around reaches the kept outputs
    offs = np.arange(-span, span + 1)
    grids = np.meshgrid(*([offs] * N), indexing="ij")
    kvals = kernel(np.stack(grids, axis=-1))
    kgrid = np.zeros((L,) * N)
    idx = np.ix_(*([offs % L] * N))
    kgrid[idx] = kvals
    fgrid = np.zeros((L,) * N)
    fgrid[(slice(0, 2 * R_in + 1),) * N] = f.values
    axes = tuple(range(N))
    conv = np.fft.irfftn(np.fft.rfftn(fgrid) * np.fft.rfftn(kgrid), s=(L,) * N, axes=axes)
    keep = (np.arange(-R_out, R_out + 1) + R_in) % L
    return conv[np.ix_(*([keep] * N))]


def riesz_convolve(
    f: LatticeFunction,
    lam: float,
    method: str = "fft",
    radius_out: int | None = None,
    kernel: Callable[[np.ndarray], np.ndarray] | None = None,
) -> LatticeFunction:
    """(A f)(i) = sum_{j != i} f(j) |i - j|^{-lam}, evaluated on [-R_out, R_out]^N.

    Parameters
    ----------
    f : LatticeFunction
        Input, supported in its box.
    lam : float
        Kernel exponent, 0 < lam < N.
    method : {"fft", "direct"}
        Zero-padded FFT convolution, or the plain O(M_in M_out) sum.
    radius_out : int, optional
        Output box radius; defaults to f's radius.
    kernel : callable, optional
        Any positive symmetric kernel mapping integer offsets (..., N) to
        values with 0 at the zero offset. Defaults to ``RieszKernel(lam)``.
    """
    _check_lambda(lam, f.dimension)
    R_out = f.radius if radius_out is None else int(radius_out)
    if R_out < 0:
        raise LatticeError("output radius must be >= 0")
    kernel = kernel if kernel is not None else RieszKernel(lam)
    if method == "direct":
        vals = _direct(f, kernel, R_out)
    elif method == "fft":
        vals = _fft(f, kernel, R_out)
    else:
        raise LatticeError(f"unknown convolution method {method!r}")
    return LatticeFunction(make_box(f.dimension, R_out), vals)


# ----------------------------------------------------------------------------
# heat flow v_t = Delta_2 v + v^{q-1}


def default_heat_dt(v: LatticeFunction, q: float) -> float:
    vmax = float(np.max(v.values)) if v.values.size else 0.0
    return 0.1 / (4 * v.dimension + vmax ** (q - 2))


def heat_step(v: LatticeFunction, dt: float, q: float, cap: float = HEAT_BLOWUP_CAP) -> tuple[LatticeFunction, bool]:
    """One explicit Euler step of v_t = Delta_2 v + v^{q-1} on v's box.

    The box carries a zero Dirichlet condition. Returns ``(v_new, blew_up)``;
    ``blew_up`` is set once the sup norm reaches ``cap`` or the arithmetic
    overflows, in which case the last finite field is returned.
    """
    if not dt > 0:
        raise LatticeError(f"dt must be positive, got {dt}")
    if not q > 2:
        raise LatticeError(f"heat probe needs q > 2, got {q}")
    if np.any(v.values < 0):
        raise LatticeError("heat step needs a nonnegative field")
    with np.errstate(over="ignore", invalid="ignore"):
        lap = flux_divergence(np.pad(v.values, 1), lambda d: d)
        new = v.values + dt * (lap + v.values ** (q - 1))
    if not np.all(np.isfinite(new)):
        return v, True
    if np.any(new < 0):
        raise IntegratorError(f"explicit step with dt={dt} produced negative values")
    out = v.with_values(new)
    return out, bool(np.max(new) >= cap) if new.size else False


def zero_sum_residual(u: LatticeFunction, p: float) -> float:
    """|sum_x Delta_p u(x)|, which vanishes by edge antisymmetry."""
    return abs(float(np.sum(p_laplacian(u, p).values)))


__all__ = [
    "HEAT_BLOWUP_CAP",
    "IntegratorError",
    "RieszKernel",
    "default_heat_dt",
    "flux_divergence",
    "p_flux",
    "heat_step",
    "normalized_laplacian",
    "p_laplacian",
    "riesz_convolve",
    "zero_sum_residual",
]

