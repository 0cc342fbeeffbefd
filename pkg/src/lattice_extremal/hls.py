"""Maximization of the discrete Hardy-Littlewood-Sobolev functional on boxes.

J(f, g) = sum_{i != j} f(i) g(j) |i - j|^{-lam} is maximized over
||f||_r = ||g||_s = 1 by alternating exact maximization: for fixed f the best
g is the duality map of A f in l^t (1/t + 1/s = 1), and for fixed g the best
f is proportional to (A g)^{1/(r-1)}. Both functions live on [-R, R]^N and the
convolution is truncated to the same box.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lattice_core import (
    HLSParams,
    LatticeBox,
    LatticeError,
    LatticeFunction,
    embed,
    lp_norm,
    make_box,
)
from .operators import RieszKernel, riesz_convolve
from .sobolev import ConvergenceWarning, ExtremalResult

log = logging.getLogger(__name__)


@dataclass
class HLSOptions:
    max_sweeps: int = 50_000
    rel_tol: float = 1e-12
    window: int = 10
    el_tol: float = 1e-10
    method: str = "fft"
    metric: str = "euclidean"


@dataclass
class HLSPair:
    f: LatticeFunction
    g: LatticeFunction
    J_value: float


def _kernel(lam: float, opts: HLSOptions | None):
    return RieszKernel(lam, opts.metric if opts else "euclidean")


def hls_bilinear(f: LatticeFunction, g: LatticeFunction, lam: float, method: str = "fft") -> float:
    """J(f, g) = sum_{i != j} f(i) g(j) / |i - j|^lam, computed as sum_i g(i) (A f)(i)."""
    if f.dimension != g.dimension:
        raise LatticeError("f and g live in different dimensions")
    Af = riesz_convolve(f, lam, method=method, radius_out=g.radius)
    return float(np.sum(g.values * Af.values))


def hls_rayleigh(f: LatticeFunction, params: HLSParams, method: str = "fft", radius_out: int | None = None) -> float:
    """||A f||_t / ||f||_r, with A f evaluated on f's box unless ``radius_out`` is given."""
    if f.is_zero():
        raise LatticeError("HLS quotient of the zero function is undefined")
    Af = riesz_convolve(f, params.lam, method=method, radius_out=radius_out)
    return lp_norm(Af, params.t) / lp_norm(f, params.r)


def dual_normalize(h: LatticeFunction, t: float) -> LatticeFunction:
    """The unit l^s vector g (1/s + 1/t = 1) with sum h g = ||h||_t.

    g = |h|^{t-1} sign(h) / ||h||_t^{t-1}.
    """
    if not t > 1:
        raise LatticeError(f"duality map needs t > 1, got {t}")
    if h.is_zero():
        raise LatticeError("duality map of the zero function is undefined")
    norm = lp_norm(h, t)
    a = np.abs(h.values) / norm
    return h.with_values(np.sign(h.values) * a ** (t - 1))


def _best_f(Ag: LatticeFunction, r: float) -> LatticeFunction:
    # maximizer of sum f (A g) over ||f||_r = 1 for A g >= 0
    w = Ag.values / np.max(Ag.values)
    w = w ** (1.0 / (r - 1))
    f = Ag.with_values(w)
    return f.scaled(1.0 / lp_norm(f, r))


def initial_density(box: LatticeBox, r: float) -> LatticeFunction:
    sq = np.sum(box.coordinates().astype(float) ** 2, axis=1).reshape(box.shape)
    f = LatticeFunction(box, np.exp(-sq / max(box.radius, 1)))
    return f.scaled(1.0 / lp_norm(f, r))


def el_residual_hls(pair: HLSPair, params: HLSParams, K_est: float, method: str = "fft") -> float:
    """sup over the pair's box of |K f^{r-1} - A g| and |K g^{s-1} - A f|.

    Outside the box f and g are zero by construction and are not free
    variables, so the defect is only measured on the box.
    """
    if not K_est > 0:
        raise LatticeError("K_est must be positive")
    f, g = pair.f, pair.g
    if f.box != g.box:
        raise LatticeError("f and g must share a box")
    Ag = riesz_convolve(g, params.lam, method=method)
    Af = riesz_convolve(f, params.lam, method=method)
    r1 = np.abs(K_est * np.abs(f.values) ** (params.r - 1) - Ag.values)
    r2 = np.abs(K_est * np.abs(g.values) ** (params.s - 1) - Af.values)
    return float(max(np.max(r1), np.max(r2)))


def power_iterate(
    params: HLSParams,
    box: LatticeBox,
    opts: HLSOptions | None = None,
    init: LatticeFunction | None = None,
    allow_subcritical: bool = False,
) -> tuple[ExtremalResult, HLSPair]:
    """Alternating maximization of J on the box; returns K_R and the maximizing pair.

    The trace records J after every half-step and is nondecreasing, since each
    half-step is an exact maximization in one argument. ``allow_subcritical``
    lifts the exponent check: at fixed R the box problem is well posed for any
    exponents, only the R -> infinity limit needs the supercritical range.
    """
    opts = opts or HLSOptions()
    if box.dimension != params.N:
        raise LatticeError("box dimension does not match params.N")
    if not params.supercritical and not allow_subcritical:
        raise LatticeError(
            f"HLS maximizer needs 1/r + 1/s + lambda/N > 2, got {params.exponent_sum:.12g}"
        )
    if params.lam * params.t <= params.N:
        log.warning("lambda*t <= N: K_R may diverge as R grows")
    kernel = _kernel(params.lam, opts)

    def A(u):
        return riesz_convolve(u, params.lam, method=opts.method, kernel=kernel)

    f = embed(init, box.radius) if init is not None else initial_density(box, params.r)
    if np.any(f.values < 0) or f.is_zero():
        raise LatticeError("initial f must be nonnegative and nonzero")
    f = f.scaled(1.0 / lp_norm(f, params.r))

    trace: list[tuple[int, float]] = []
    history: list[float] = []
    converged = False
    residual = math.inf
    J = 0.0
    sweep = 0
    for sweep in range(1, opts.max_sweeps + 1):
        Af = A(f)
        g = dual_normalize(Af, params.t)
        J_half = float(np.sum(g.values * Af.values))
        Ag = A(g)
        f = _best_f(Ag, params.r)
        J = float(np.sum(f.values * Ag.values))
        trace.append((2 * sweep - 1, J_half))
        trace.append((2 * sweep, J))
        history.append(J)
        if len(history) > opts.window:
            old = history[-1 - opts.window]
            if abs(J - old) <= opts.rel_tol * J:
                residual = el_residual_hls(HLSPair(f, g, J), params, J, method=opts.method)
                if residual < opts.el_tol:
                    converged = True
                    break
    # pair with g re-derived from the final f, so J(f, g) is the reported value
    Af = A(f)
    g = dual_normalize(Af, params.t)
    J = float(np.sum(g.values * Af.values))
    trace.append((2 * sweep + 1, J))
    pair = HLSPair(f, g, J)
    residual = el_residual_hls(pair, params, J, method=opts.method)
    if not converged:
        warnings.warn(f"HLS iteration did not converge on R={box.radius} in {sweep} sweeps", ConvergenceWarning, stacklevel=2)
    result = ExtremalResult(
        constant_estimate=J,
        extremizer=f,
        residual_sup=residual,
        iterations=sweep,
        trace=trace,
        box_radius=box.radius,
        converged=converged,
    )
    return result, pair


def estimate_K(
    params: HLSParams,
    radii,
    opts: HLSOptions | None = None,
    allow_subcritical: bool = False,
) -> list[tuple[int, ExtremalResult, HLSPair]]:
    """K_R on increasing radii, warm-started; nondecreasing since the boxes are nested."""
    radii = [int(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise LatticeError(f"radii must be strictly increasing, got {radii}")
    out = []
    prev = None
    for R in radii:
        res, pair = power_iterate(params, make_box(params.N, R), opts, init=prev, allow_subcritical=allow_subcritical)
        out.append((R, res, pair))
        prev = pair.f
    return out


def young_upper_bound(params: HLSParams, R: int, metric: str = "euclidean") -> float:
    """A rigorous upper bound on K_R from Young's convolution inequality.

    On [-R, R]^N only offsets in [-2R, 2R]^N occur, so A acts as convolution
    with the truncated kernel k. For r <= t, ||A f||_t <= ||k||_a ||f||_r with
    1/a = 1 + 1/t - 1/r. For r > t, use a = 1 and ||f||_t <= M^{1/t - 1/r} ||f||_r
    on the M sites of the box.
    """
    N = params.N
    offs = np.arange(-2 * R, 2 * R + 1)
    grids = np.meshgrid(*([offs] * N), indexing="ij")
    k = RieszKernel(params.lam, metric)(np.stack(grids, axis=-1))
    r, t = params.r, params.t
    if r <= t:
        a = 1.0 / (1.0 + 1.0 / t - 1.0 / r)
        return float(np.sum(k**a) ** (1.0 / a))
    M = (2 * R + 1) ** N
    return float(np.sum(k)) * M ** (1.0 / t - 1.0 / r)
