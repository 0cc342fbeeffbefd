"""Blow-up runs for v_t = Delta_2 v + v^{q-1} and the pointwise bound for -Delta u = u^a."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .lattice_core import LatticeError, LatticeFunction, lp_norm, make_box, neighbours
from .operators import HEAT_BLOWUP_CAP, IntegratorError, default_heat_dt, heat_step, normalized_laplacian


@dataclass
class BlowupReport:
    N: int
    q: float
    in_window: bool
    at_window_endpoint: bool
    blew_up: bool
    steps: int
    time: float
    failure: str | None = None
    # (step, time, sup_norm, l2_norm) per step, step 0 = initial data
    trajectory: list[tuple[int, float, float, float]] = field(default_factory=list)

    @property
    def outcome(self) -> str:
        if self.failure:
            return "integrator failure"
        return "blow-up" if self.blew_up else "no blow-up observed"

    def to_csv(self) -> str:
        lines = ["step,sup_norm,l2_norm"]
        lines += [f"{s},{sup:.17g},{l2:.17g}" for s, _, sup, l2 in self.trajectory]
        return "\n".join(lines) + "\n"


def blowup_window(N: int, q: float) -> tuple[bool, bool]:
    """(0 < N(q-2) < 2, q == (2 + 2N)/N)."""
    endpoint = math.isclose(q, (2 + 2 * N) / N, rel_tol=0, abs_tol=1e-12)
    return (0 < N * (q - 2) < 2) and not endpoint, endpoint


def bump(N: int, R: int, amplitude: float = 1.0, width: float | None = None) -> LatticeFunction:
    """amplitude * exp(-|i|^2 / width) on [-R, R]^N; width defaults to R."""
    box = make_box(N, R)
    sq = np.sum(box.coordinates().astype(float) ** 2, axis=1).reshape(box.shape)
    width = float(width) if width is not None else float(max(R, 1))
    return LatticeFunction(box, amplitude * np.exp(-sq / width))


def run_blowup(
    N: int,
    q: float,
    u0: LatticeFunction,
    dt: float | None = None,
    max_steps: int = 1_000_000,
    cap: float = HEAT_BLOWUP_CAP,
) -> BlowupReport:
    """Integrate the heat flow from u0 until the sup norm reaches ``cap``.

    Without ``dt`` each step uses the stability heuristic
    0.1 / (4N + max v^{q-2}); a given ``dt`` is used as a fixed step. The box
    of u0 carries a zero Dirichlet condition.
    """
    if u0.dimension != N:
        raise LatticeError("u0 dimension does not match N")
    if not q > 2:
        raise LatticeError(f"blow-up probe needs q > 2, got {q}")
    if np.any(u0.values < 0):
        raise LatticeError("initial data must be nonnegative")
    if dt is not None and not dt > 0:
        raise LatticeError("dt must be positive")
    in_window, endpoint = blowup_window(N, q)
    v = u0
    t = 0.0
    traj = [(0, 0.0, lp_norm(v, math.inf), lp_norm(v, 2))]
    report = BlowupReport(N, q, in_window, endpoint, False, 0, 0.0, trajectory=traj)
    if v.is_zero():
        # zero is an equilibrium; nothing moves
        for k in range(1, max_steps + 1):
            traj.append((k, t, 0.0, 0.0))
        report.steps = max_steps
        return report
    for k in range(1, max_steps + 1):
        h = default_heat_dt(v, q) if dt is None else dt
        try:
            v, blew = heat_step(v, h, q, cap=cap)
        except IntegratorError as exc:
            report.failure = str(exc)
            report.steps = k
            return report
        t += h
        traj.append((k, t, lp_norm(v, math.inf), lp_norm(v, 2)))
        if blew:
            report.blew_up = True
            report.steps, report.time = k, t
            return report
    report.steps, report.time = max_steps, t
    return report


# ----------------------------------------------------------------------------
# -Delta u = u^a  =>  u <= 1


def check_bound_lemma(u: LatticeFunction, a: float, eq_tol: float = 1e-6) -> list[tuple[int, ...]]:
    """Sites that satisfy -Delta u = u^a up to ``eq_tol`` yet exceed the bound u <= 1.

    Uses the normalized Laplacian. At a gated site u^a - u <= eq_tol, and
    convexity gives u^a - u >= (a - 1)(u - 1) for u >= 1, so the bound is
    checked with slack eq_tol * max(1, 1/(a - 1)). Expected result: empty.
    """
    if not a > 1:
        raise LatticeError(f"need a > 1, got {a}")
    if np.any(u.values < 0):
        raise LatticeError("bound lemma applies to nonnegative u")
    lap = normalized_laplacian(u)
    inner = lap.values[(slice(1, -1),) * u.dimension]
    residual = np.abs(-inner - u.values**a)
    slack = eq_tol * max(1.0, 1.0 / (a - 1.0))
    bad = np.argwhere((residual <= eq_tol) & (u.values > 1.0 + slack))
    return [tuple(int(c) - u.radius for c in row) for row in bad]


def _solve_site(m: float, a: float, rng: np.random.Generator) -> float | None:
    """A root of x - x^a = m with x >= 0, or None when there is none."""
    x_peak = a ** (-1.0 / (a - 1.0))
    peak = x_peak - x_peak**a
    if m > peak:
        return None
    phi = lambda x: x - x**a - m  # noqa: E731
    if m == peak:
        return x_peak
    if rng.random() < 0.5:
        return brentq(phi, 0.0, x_peak, xtol=1e-15) if m > 0 else 0.0
    return brentq(phi, x_peak, 1.0, xtol=1e-15)


@dataclass
class FalsificationResult:
    trials: int
    gated_sites: int
    violations: int


def falsification_search(
    trials: int,
    N: int = 3,
    R: int = 2,
    a: float = 2.0,
    eq_tol: float = 1e-6,
    rng: np.random.Generator | None = None,
) -> FalsificationResult:
    """Random search for a counterexample to the bound u <= 1.

    Each trial draws a nonnegative random field and then forces the equation to
    hold at one interior site by solving x - x^a = (mean of the neighbours) for
    the value there. Fields whose neighbour mean admits no root (mean above
    max(x - x^a)) stay unforced, which the bound lemma predicts.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    box = make_box(N, R)
    gated = violations = 0
    for _ in range(trials):
        scale = rng.choice([0.1, 0.5, 1.0, 3.0])
        vals = rng.uniform(0.0, scale, box.shape) * (rng.random(box.shape) < 0.8)
        x0 = tuple(int(c) for c in rng.integers(-R + 1, R, size=N)) if R >= 1 else (0,) * N
        m = float(np.mean([vals[tuple(c + R for c in y)] for y in neighbours(x0)]))
        root = _solve_site(m, a, rng)
        if root is not None:
            vals[tuple(c + R for c in x0)] = root
        u = LatticeFunction(box, vals)
        lap = normalized_laplacian(u).values[(slice(1, -1),) * N]
        gated += int(np.sum(np.abs(-lap - u.values**a) <= eq_tol))
        violations += len(check_bound_lemma(u, a, eq_tol))
    return FalsificationResult(trials, gated, violations)
