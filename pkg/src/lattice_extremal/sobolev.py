"""Minimization of the discrete Sobolev quotient on growing boxes.

The quotient ||u||_{D^{1,p}}^p / ||u||_q^p is minimized over functions
supported in [-R, R]^N by projected gradient descent on the unit q-sphere.
Iterates are kept nonnegative, since |u| never has a larger quotient.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .lattice_core import (
    LatticeBox,
    LatticeError,
    LatticeFunction,
    SobolevParams,
    argmax_site,
    d1p_energy,
    embed,
    lp_norm,
    lp_power,
    make_box,
    recenter,
)
from .operators import flux_divergence, p_flux, p_laplacian
from .parallel import map_ordered

log = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class SolverOptions:
    max_iter: int = 200_000
    obj_tol: float = 1e-10
    obj_window: int = 25
    el_tol: float = 1e-6
    armijo: float = 1e-4
    shrink: float = 0.5
    max_halvings: int = 60
    recenter_every: int = 100
    # smoothing levels for p = 1, |d| ~ sqrt(d^2 + eps^2) - eps
    eps_schedule: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


@dataclass
class ExtremalResult:
    """Estimated constant and extremizer on one box."""

    constant_estimate: float
    extremizer: LatticeFunction
    residual_sup: float
    iterations: int
    trace: list[tuple[int, float]]
    box_radius: int
    converged: bool = True
    info: dict = field(default_factory=dict)


class ELCheck(NamedTuple):
    residual_sup: float
    rescaled: LatticeFunction
    rescaled_residual_sup: float


def sobolev_quotient(u: LatticeFunction, params: SobolevParams) -> float:
    """||u||_{D^{1,p}}^p / ||u||_q^p, invariant under u -> c u."""
    if u.is_zero():
        raise LatticeError("Sobolev quotient of the zero function is undefined")
    return d1p_energy(u, params.p) / lp_norm(u, params.q) ** params.p


def initial_bump(box: LatticeBox, q: float) -> LatticeFunction:
    """exp(-|i|^2 / R) normalized in l^q."""
    sq = np.sum(box.coordinates().astype(float) ** 2, axis=1).reshape(box.shape)
    vals = np.exp(-sq / max(box.radius, 1))
    u = LatticeFunction(box, vals)
    return u.scaled(1.0 / lp_norm(u, q))


# ----------------------------------------------------------------------------
# energy kernels on raw arrays


class _Energy:
    """Energy and gradient of sum_x sum_{y~x} phi(u(y) - u(x)) on a box array.

    phi is |d|^p, or its smoothing sqrt(d^2 + eps^2) - eps when ``eps`` is set
    (used for p = 1).
    """

    def __init__(self, p: float, eps: float | None = None):
        self.p = p
        self.eps = eps

    def phi(self, d):
        if self.eps is not None:
            return np.sqrt(d * d + self.eps**2) - self.eps
        return np.abs(d) ** self.p

    def dphi(self, d):
        if self.eps is not None:
            return d / np.sqrt(d * d + self.eps**2)
        flux = p_flux(self.p)
        return self.p * flux(d)

    def value(self, vals: np.ndarray) -> float:
        padded = np.pad(vals, 1)
        # per-axis terms are summed in axis order whatever the thread count
        parts = map_ordered(lambda k: float(np.sum(self.phi(np.diff(padded, axis=k)))), range(vals.ndim))
        return 2.0 * math.fsum(parts)

    def gradient(self, vals: np.ndarray) -> np.ndarray:
        return -2.0 * flux_divergence(np.pad(vals, 1), self.dphi)


def _normalize(vals: np.ndarray, q: float) -> np.ndarray:
    return vals / np.sum(np.abs(vals) ** q) ** (1.0 / q)


def _descend(
    vals: np.ndarray,
    energy: _Energy,
    q: float,
    opts: SolverOptions,
    check_el: bool,
    it0: int = 0,
    trace: list | None = None,
):
    """Projected gradient descent on the q-sphere for one energy.

    Returns (vals, E, residual_sup, iterations, converged).
    """
    p = energy.p
    trace = trace if trace is not None else []
    u = _normalize(np.abs(vals), q)
    E = energy.value(u)

    def sphere_grad(u, E):
        return energy.gradient(u) - p * E * u ** (q - 1)

    G = sphere_grad(u, E)
    gnorm = float(np.max(np.abs(G)))
    alpha = 1.0 / max(gnorm, 1e-300)
    history = [E]
    it = 0
    converged = False
    residual = gnorm / (2 * p)
    while it < opts.max_iter:
        it += 1
        accepted = False
        step = alpha
        for _ in range(opts.max_halvings + 1):
            cand = _normalize(np.abs(u - step * G), q)
            Ec = energy.value(cand)
            decrease = max(float(np.sum(G * (u - cand))), 0.0)
            if Ec <= E - opts.armijo * decrease:
                accepted = True
                break
            step *= opts.shrink
        if not accepted:
            log.debug("line search stalled at iteration %d", it0 + it)
            converged = (residual < opts.el_tol) or not check_el
            break
        Gc = sphere_grad(cand, Ec)
        s = cand - u
        y = Gc - G
        sy = abs(float(np.sum(s * y)))
        alpha = float(np.sum(s * s)) / sy if sy > 0 else step * 2
        u, E, G = cand, Ec, Gc
        residual = float(np.max(np.abs(G))) / (2 * p)
        trace.append((it0 + it, E))
        history.append(E)

        if opts.recenter_every and it % opts.recenter_every == 0:
            u, E, G, moved = _try_recenter(u, E, energy, q, sphere_grad)
            if moved:
                trace.append((it0 + it, E))
                history.append(E)
                residual = float(np.max(np.abs(G))) / (2 * p)

        if len(history) > opts.obj_window:
            old = history[-1 - opts.obj_window]
            if abs(old - E) <= opts.obj_tol * abs(E) and (not check_el or residual < opts.el_tol):
                converged = True
                break
    return u, E, residual, it, converged


def _best_level_set(vals: np.ndarray, q: float) -> np.ndarray:
    """The q-normalized indicator of the superlevel set {u >= t} with the lowest p = 1 quotient.

    By the coarea formula the D^{1,1} energy of u >= 0 is the integral of the
    edge perimeters of {u > t}, while Minkowski bounds ||u||_q by the integral
    of ||1_{u > t}||_q, so some superlevel set does at least as well as u.
    """
    a = np.abs(vals)
    levels = np.unique(a[a > 0])[::-1]
    box = make_box(a.ndim, (a.shape[0] - 1) // 2)
    best, best_q = None, math.inf
    for t in levels:
        ind = (a >= t).astype(float)
        Q = d1p_energy(LatticeFunction(box, ind), 1.0) / np.sum(ind) ** (1.0 / q)
        if Q < best_q:
            best, best_q = ind, Q
    return _normalize(best, q)


def _try_recenter(u, E, energy, q, sphere_grad):
    box = make_box(u.ndim, (u.shape[0] - 1) // 2)
    f = LatticeFunction(box, u)
    if all(c == 0 for c in argmax_site(f)):
        return u, E, sphere_grad(u, E), False
    v, _ = recenter(f, keep_box=True)
    cand = _normalize(np.asarray(v.values), q)
    Ec = energy.value(cand)
    if Ec <= E:
        return cand, Ec, sphere_grad(cand, Ec), True
    return u, E, sphere_grad(u, E), False


def minimize_on_box(
    params: SobolevParams,
    box: LatticeBox,
    opts: SolverOptions | None = None,
    init: LatticeFunction | None = None,
) -> ExtremalResult:
    """Minimize the Sobolev quotient over functions supported in ``box``.

    Starts from ``init`` (zero-padded or cropped onto the box) or from the
    default Gaussian bump, and returns the achieved quotient S_R together with
    the nonnegative, q-normalized extremizer. Non-convergence is reported via
    ``converged=False`` and a ConvergenceWarning; the best iterate is kept.
    """
    opts = opts or SolverOptions()
    if box.dimension != params.N:
        raise LatticeError("box dimension does not match params.N")
    if not params.supercritical:
        raise LatticeError(f"minimizer needs the supercritical range q > p* = {params.p_star:.12g}, got q={params.q}")
    if box.radius < 1:
        raise LatticeError("box radius must be at least 1")
    u0 = embed(init, box.radius) if init is not None else initial_bump(box, params.q)
    if u0.is_zero():
        raise LatticeError("initial function is zero")
    vals = np.array(u0.values, dtype=float)
    p, q = params.p, params.q

    trace: list[tuple[int, float]] = []
    if p > 1:
        energy = _Energy(p)
        trace.append((0, energy.value(_normalize(np.abs(vals), q))))
        vals, E, residual, iters, converged = _descend(vals, energy, q, opts, check_el=True, trace=trace)
        centre = argmax_site(LatticeFunction(box, vals))
        if opts.recenter_every and any(centre):
            # translated copies are separate local minima on the lattice, and
            # the cropped shift may only pay off after a fresh descent
            moved, _ = recenter(LatticeFunction(box, vals), keep_box=True)
            alt_trace: list = []
            alt = _descend(np.asarray(moved.values), energy, q, opts, check_el=True, it0=iters, trace=alt_trace)
            if alt[1] < E:
                # keep the trace monotone: it joins once the restart overtakes
                trace.extend(entry for entry in alt_trace if entry[1] < E)
                vals, E, residual, _, converged = alt
                iters += alt[3]
    else:
        iters, converged = 0, True
        best_vals = _normalize(np.abs(vals), q)
        best = d1p_energy(LatticeFunction(box, best_vals), 1.0)
        top = _best_level_set(best_vals, q)
        if d1p_energy(LatticeFunction(box, top), 1.0) < best:
            best_vals, best = top, d1p_energy(LatticeFunction(box, top), 1.0)
        trace.append((0, best))
        for eps in opts.eps_schedule:
            stage: list = []
            vals, _, _, n, ok = _descend(vals, _Energy(1.0, eps), q, opts, check_el=False, it0=iters, trace=stage)
            iters += n
            converged = converged and ok
            # trace holds the running best of the unsmoothed quotient
            for cand in (vals, _best_level_set(vals, q)):
                true_E = d1p_energy(LatticeFunction(box, cand), 1.0)
                if true_E <= best:
                    best, best_vals = true_E, cand
            trace.append((iters, best))
        vals, E = best_vals, best
        residual = math.nan

    u = LatticeFunction(box, vals)
    S_R = sobolev_quotient(u, params)
    if not converged:
        warnings.warn(f"Sobolev descent did not converge on R={box.radius} in {iters} iterations", ConvergenceWarning, stacklevel=2)
    return ExtremalResult(
        constant_estimate=S_R,
        extremizer=u,
        residual_sup=residual,
        iterations=iters,
        trace=trace,
        box_radius=box.radius,
        converged=converged,
    )


def estimate_S(
    params: SobolevParams,
    radii,
    opts: SolverOptions | None = None,
) -> list[tuple[int, ExtremalResult]]:
    """Run the box minimizer on increasing radii, warm-starting each from the last.

    The feasible sets are nested, so S_R is nonincreasing in R.
    """
    radii = [int(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise LatticeError(f"radii must be strictly increasing, got {radii}")
    out = []
    prev = None
    for R in radii:
        res = minimize_on_box(params, make_box(params.N, R), opts, init=prev)
        out.append((R, res))
        prev = res.extremizer
    return out


def el_residual(result: ExtremalResult | LatticeFunction, params: SobolevParams, S_est: float | None = None) -> ELCheck:
    """Euler-Lagrange defect of a q-normalized nonnegative minimizer v.

    With the ordered-pair energy the gradient of ||v||_{D^{1,p}}^p is
    -2p Delta_p v, so a minimizer on the q-sphere satisfies

        Delta_p v + (S / 2) v^{q-1} = 0

    at every site of its box (sites outside the box are not free). The
    rescaled w = (S / 2)^{1/(q-p)} v then solves Delta_p w + w^{q-1} = 0 on
    the box. Returns both sup-norm defects and w.
    """
    if isinstance(result, ExtremalResult):
        v = result.extremizer
        S = result.constant_estimate if S_est is None else S_est
    else:
        v = result
        if S_est is None:
            S_est = sobolev_quotient(v, params)
        S = S_est
    p, q = params.p, params.q
    if p <= 1:
        raise LatticeError("Euler-Lagrange residual is only defined for p > 1")
    if q <= 2:
        raise LatticeError("Euler-Lagrange residual path needs q > 2")
    if np.any(v.values < 0):
        raise LatticeError("extremizer must be nonnegative")

    def defect(w: LatticeFunction, coeff: float) -> float:
        lap = embed(p_laplacian(w, p), w.radius)
        return float(np.max(np.abs(lap.values + coeff * w.values ** (q - 1))))

    c = (S / 2.0) ** (1.0 / (q - p))
    w = v.scaled(c)
    return ELCheck(defect(v, S / 2.0), w, defect(w, 1.0))


def verify_sobolev(u: LatticeFunction, params: SobolevParams, S_est: float, slack: float = 1e-9) -> tuple[bool, float]:
    """Check ||u||_{D^{1,p}}^p >= S_est ||u||_q^p - slack; returns (ok, margin)."""
    if u.is_zero():
        raise LatticeError("cannot verify the zero function")
    margin = d1p_energy(u, params.p) - S_est * lp_power(u, params.q) ** (params.p / params.q)
    return margin >= -slack, margin
