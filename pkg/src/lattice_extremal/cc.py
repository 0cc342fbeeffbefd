"""Brezis-Lieb defects, tail masses and concentration-compactness checks.

Everything here works on finite prefixes of explicit sequences: the limits
over n and R that define mu_inf and nu_inf are approximated by the tails of
the last term at a fixed radius R_max, and reports say so.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice_core import (
    LatticeError,
    LatticeFunction,
    SobolevParams,
    d1p_energy,
    distance_from_origin,
    gradient_power_field,
    lp_power,
    make_box,
    translate,
)
from .parallel import map_ordered


@dataclass
class FunctionSequence:
    """A computable prefix u_1, ..., u_n together with the designated limit u."""

    terms: list[LatticeFunction]
    limit: LatticeFunction
    labels: list[int] | None = None

    def __post_init__(self):
        if not self.terms:
            raise LatticeError("a sequence needs at least one term")
        N = self.limit.dimension
        if any(t.dimension != N for t in self.terms):
            raise LatticeError("sequence terms and limit must share a dimension")
        if self.labels is None:
            self.labels = list(range(1, len(self.terms) + 1))

    @property
    def dimension(self) -> int:
        return self.limit.dimension

    def energy_bound(self, p: float) -> float:
        return max(d1p_energy(t, p) for t in self.terms)


def stationary(u: LatticeFunction, n_terms: int = 5) -> FunctionSequence:
    return FunctionSequence([u] * n_terms, u)


def perturbation(u: LatticeFunction, w: LatticeFunction, ns: Iterable[int]) -> FunctionSequence:
    """u_n = u + w / n, converging to u."""
    ns = list(ns)
    return FunctionSequence([u + w.scaled(1.0 / n) for n in ns], u, labels=ns)


def escaping(u: LatticeFunction, w: LatticeFunction, ns: Iterable[int], step: int = 1) -> FunctionSequence:
    """u_n = u + w(. - n*step*e_1): the w bump runs off to infinity, so u_n -> u pointwise."""
    ns = list(ns)
    terms = []
    for n in ns:
        shift = (n * step,) + (0,) * (w.dimension - 1)
        terms.append(u + translate(w, shift))
    return FunctionSequence(terms, u, labels=ns)


# ----------------------------------------------------------------------------


def _site_mask(box, omega) -> np.ndarray:
    if omega is None:
        return np.ones(box.shape, dtype=bool)
    if callable(omega):
        coords = box.coordinates()
        return np.array([bool(omega(tuple(int(c) for c in x))) for x in coords]).reshape(box.shape)
    mask = np.zeros(box.shape, dtype=bool)
    for x in omega:
        if box.contains(x):
            mask[tuple(int(c) + box.radius for c in x)] = True
    return mask


def gradient_mass(u: LatticeFunction, p: float, omega=None) -> float:
    """sum_{i in omega} |grad u(i)|_p^p; omega is a site set, a predicate, or None for Z^N.

    Each |grad u(i)|_p^p counts the edges from i to its neighbours, so the sum
    runs over the internal edges of omega plus the edges leaving it.
    """
    field_ = gradient_power_field(u, p)
    return float(np.sum(field_.values[_site_mask(field_.box, omega)]))


def bl_defect(seq: FunctionSequence, p: float, mode: str = "values", omega=None) -> list[float]:
    """|(||u_n||^p - ||u_n - u||^p) - ||u||^p| for each term of the prefix.

    ``mode="values"`` uses the l^p norm (any p > 0); ``mode="gradients"`` uses
    sum_{i in omega} |grad .(i)|_p^p (p >= 1).
    """
    u = seq.limit
    if mode == "values":
        if not p > 0:
            raise LatticeError("values mode needs p > 0")
        size = lambda f: lp_power(f, p)  # noqa: E731
    elif mode == "gradients":
        if not p >= 1:
            raise LatticeError("gradients mode needs p >= 1")
        size = lambda f: gradient_mass(f, p, omega)  # noqa: E731
    else:
        raise LatticeError(f"unknown Brezis-Lieb mode {mode!r}")
    base = size(u)

    def one(term):
        return abs((size(term) - size(term - u)) - base)

    return map_ordered(one, seq.terms)


def tail_mass(u: LatticeFunction, R: int, p: float, q: float) -> tuple[float, float]:
    """(sum_{d(i,0)>R} |grad u(i)|_p^p, sum_{d(i,0)>R} |u(i)|^q), d the graph distance."""
    if R < 0:
        raise LatticeError("tail radius must be >= 0")
    g = gradient_power_field(u, p)
    mu = float(np.sum(g.values[distance_from_origin(g.box) > R]))
    nu = float(np.sum(np.abs(u.values[distance_from_origin(u.box) > R]) ** q))
    return mu, nu


def tail_profile(u: LatticeFunction, radii: Sequence[int], p: float, q: float) -> list[tuple[float, float]]:
    return [tail_mass(u, R, p, q) for R in radii]


def composition_check(seq: FunctionSequence, params: SobolevParams, R_max: int) -> tuple[float, float]:
    """Defects of the splittings of energy and q-mass, with the last term standing in for the limit.

    gap_1 = | ||u_n||_{D^{1,p}}^p - ||u||_{D^{1,p}}^p - mu(R_max) |
    gap_2 = | ||u_n||_q^q - ||u||_q^q - nu(R_max) |
    where mu, nu are the tails of the last term u_n at R_max.
    """
    p, q = params.p, params.q
    last, u = seq.terms[-1], seq.limit
    mu, nu = tail_mass(last, R_max, p, q)
    gap1 = abs(d1p_energy(last, p) - d1p_energy(u, p) - mu)
    gap2 = abs(lp_power(last, q) - lp_power(u, q) - nu)
    return gap1, gap2


def cc_inequality_check(seq: FunctionSequence, params: SobolevParams, S_est: float, R_max: int) -> float:
    """S^{-1} mu(R_max) - nu(R_max)^{p/q} for the escaping part u_n - u of the last term.

    Nonnegative whenever S_est is a valid Sobolev constant for the escaping
    profile; zero for compact sequences.
    """
    if not S_est > 0:
        raise LatticeError("S_est must be positive")
    v = seq.terms[-1] - seq.limit
    mu, nu = tail_mass(v, R_max, params.p, params.q)
    return mu / S_est - nu ** (params.p / params.q)


@dataclass
class CCReport:
    """Finite-prefix diagnostics; mu/nu tails are approximations of mu_inf, nu_inf."""

    prefix_length: int
    R_max: int
    mu_tail: dict[int, list[float]]
    nu_tail: dict[int, list[float]]
    bl_defects: dict[str, list[float]]
    composition_gaps: tuple[float, float]
    cc_inequality_margin: float
    S_est: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "prefix_length": self.prefix_length,
            "R_max": self.R_max,
            "mu_tail": {str(k): v for k, v in self.mu_tail.items()},
            "nu_tail": {str(k): v for k, v in self.nu_tail.items()},
            "bl_defects": self.bl_defects,
            "composition_gaps": list(self.composition_gaps),
            "cc_inequality_margin": self.cc_inequality_margin,
            "S_est": self.S_est,
            "notes": self.notes,
        }


def cc_report(
    seq: FunctionSequence,
    params: SobolevParams,
    S_est: float,
    R_max: int,
    tail_radii: Sequence[int] | None = None,
) -> CCReport:
    p, q = params.p, params.q
    if tail_radii is None:
        tail_radii = range(0, R_max + 1)
    tail_radii = list(tail_radii)
    profiles = map_ordered(lambda t: tail_profile(t, tail_radii, p, q), seq.terms)
    mu = {R: [prof[k][0] for prof in profiles] for k, R in enumerate(tail_radii)}
    nu = {R: [prof[k][1] for prof in profiles] for k, R in enumerate(tail_radii)}
    return CCReport(
        prefix_length=len(seq.terms),
        R_max=R_max,
        mu_tail=mu,
        nu_tail=nu,
        bl_defects={
            "values": bl_defect(seq, q, "values"),
            "gradients": bl_defect(seq, p, "gradients"),
        },
        composition_gaps=composition_check(seq, params, R_max),
        cc_inequality_margin=cc_inequality_check(seq, params, S_est, R_max),
        S_est=S_est,
        notes=[
            f"limits over n are replaced by the last of {len(seq.terms)} computed terms",
            f"limits over R are replaced by tails at R_max={R_max}",
        ],
    )


def random_bump(N: int, R: int, rng: np.random.Generator, width: float | None = None) -> LatticeFunction:
    """Positive random field tapered by a Gaussian, supported in [-R, R]^N."""
    box = make_box(N, R)
    sq = np.sum(box.coordinates().astype(float) ** 2, axis=1).reshape(box.shape)
    width = width if width is not None else max(R, 1)
    return LatticeFunction(box, rng.uniform(0.5, 1.5, box.shape) * np.exp(-sq / width))

