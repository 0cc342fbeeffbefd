"""Lattice geometry, finitely supported functions and discrete norms on Z^N.

A function on Z^N is stored densely on the l-infinity box [-R, R]^N and read
as zero everywhere outside it. Edge sums follow the ordered-pair convention:
every undirected edge {x, y} contributes once from x and once from y.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_SITES = 20_000_000

GRID_HEADER = "LATTICE v1"


class LatticeError(ValueError):
    """Invalid lattice input (bad box, bad exponent, non-finite values...)."""


@dataclass(frozen=True)
class LatticeBox:
    """The window [-R, R]^N, stored row-major with the last axis fastest."""

    dimension: int
    radius: int

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise LatticeError(f"dimension must be an integer >= 1, got {self.dimension}")
        if int(self.radius) != self.radius or self.radius < 0:
            raise LatticeError(f"radius must be an integer >= 0, got {self.radius}")

    @property
    def extent(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.extent,) * self.dimension

    @property
    def size(self) -> int:
        return self.extent**self.dimension

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.dimension and all(abs(int(c)) <= self.radius for c in x)

    def linear_index(self, x: Sequence[int]) -> int:
        if not self.contains(x):
            raise LatticeError(f"site {tuple(x)} outside box of radius {self.radius}")
        return int(np.ravel_multi_index(tuple(int(c) + self.radius for c in x), self.shape))

    def multi_index(self, k: int) -> tuple[int, ...]:
        if not 0 <= k < self.size:
            raise LatticeError(f"linear index {k} out of range for {self.size} sites")
        return tuple(int(c) - self.radius for c in np.unravel_index(k, self.shape))

    def sites(self) -> Iterable[tuple[int, ...]]:
        """All sites in storage order."""
        rng = range(-self.radius, self.radius + 1)
        return itertools.product(rng, repeat=self.dimension)

    def coordinates(self) -> np.ndarray:
        """Integer coordinates of all sites, shape (size, N), storage order."""
        axis = np.arange(-self.radius, self.radius + 1)
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def grown(self, by: int) -> "LatticeBox":
        return make_box(self.dimension, self.radius + by)


def make_box(N: int, R: int, max_sites: int = MAX_SITES) -> LatticeBox:
    box = LatticeBox(N, R)
    if box.size > max_sites:
        raise LatticeError(f"box N={N}, R={R} has {box.size} sites, above the cap of {max_sites}")
    return box


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Real values on a LatticeBox; implicitly zero outside the box."""

    box: LatticeBox
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.box.size:
            raise LatticeError(f"expected {self.box.size} values, got {vals.size}")
        vals = vals.reshape(self.box.shape)
        if not np.all(np.isfinite(vals)):
            raise LatticeError("lattice function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dimension(self) -> int:
        return self.box.dimension

    @property
    def radius(self) -> int:
        return self.box.radius

    def __call__(self, x: Sequence[int]) -> float:
        if not self.box.contains(x):
            return 0.0
        return float(self.values[tuple(int(c) + self.radius for c in x)])

    def with_values(self, values: np.ndarray) -> "LatticeFunction":
        return LatticeFunction(self.box, values)

    def __add__(self, other: "LatticeFunction") -> "LatticeFunction":
        R = max(self.radius, other.radius)
        return LatticeFunction(make_box(self.dimension, R), embed(self, R).values + embed(other, R).values)

    def __sub__(self, other: "LatticeFunction") -> "LatticeFunction":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "LatticeFunction":
        return LatticeFunction(self.box, c * self.values)

    def abs(self) -> "LatticeFunction":
        return LatticeFunction(self.box, np.abs(self.values))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def support(self) -> set[tuple[int, ...]]:
        idx = np.argwhere(self.values != 0) - self.radius
        return {tuple(int(c) for c in row) for row in idx}

    def support_radius(self) -> int:
        """Smallest R' with supp u inside [-R', R']^N (0 for the zero function)."""
        idx = np.argwhere(self.values != 0)
        if idx.size == 0:
            return 0
        return int(np.max(np.abs(idx - self.radius)))


def zeros(box: LatticeBox) -> LatticeFunction:
    return LatticeFunction(box, np.zeros(box.shape))


def delta(box: LatticeBox, site: Sequence[int] | None = None, value: float = 1.0) -> LatticeFunction:
    site = tuple(site) if site is not None else (0,) * box.dimension
    vals = np.zeros(box.shape)
    vals[tuple(int(c) + box.radius for c in site)] = value
    return LatticeFunction(box, vals)


def from_sites(box: LatticeBox, values: dict) -> LatticeFunction:
    vals = np.zeros(box.shape)
    for site, v in values.items():
        vals[tuple(int(c) + box.radius for c in site)] = v
    return LatticeFunction(box, vals)


def embed(u: LatticeFunction, R: int) -> LatticeFunction:
    """Zero-pad (R >= radius) or crop (R < radius) u onto the box of radius R."""
    d = R - u.radius
    if d == 0:
        return u
    if d > 0:
        return LatticeFunction(make_box(u.dimension, R), np.pad(u.values, d))
    sl = (slice(-d, d),) * u.dimension
    return LatticeFunction(make_box(u.dimension, R), u.values[sl])


def translate(u: LatticeFunction, shift: Sequence[int], radius: int | None = None) -> LatticeFunction:
    """Return w with w(i) = u(i - shift), on a box that holds the moved support.

    With an explicit ``radius`` the result lives on that box and anything that
    falls outside it is dropped.
    """
    shift = tuple(int(s) for s in shift)
    if len(shift) != u.dimension:
        raise LatticeError("shift has the wrong dimension")
    if radius is None:
        radius = u.radius + max((abs(s) for s in shift), default=0)
    out = np.zeros((2 * radius + 1,) * u.dimension)
    src, dst = [], []
    for s in shift:
        # target index t = source index + s (in site coordinates)
        lo = max(-u.radius, -radius - s)
        hi = min(u.radius, radius - s)
        if lo > hi:
            return LatticeFunction(make_box(u.dimension, radius), out)
        src.append(slice(lo + u.radius, hi + u.radius + 1))
        dst.append(slice(lo + s + radius, hi + s + radius + 1))
    out[tuple(dst)] = u.values[tuple(src)]
    return LatticeFunction(make_box(u.dimension, radius), out)


# ----------------------------------------------------------------------------
# norms and gradients


def lp_norm(u: LatticeFunction, p: float) -> float:
    """(sum |u|^p)^(1/p), or max |u| for p = inf."""
    if p == math.inf:
        return float(np.max(np.abs(u.values))) if u.values.size else 0.0
    if not p > 0:
        raise LatticeError(f"l^p norm needs p > 0, got {p}")
    a = np.abs(u.values)
    if not np.any(a):
        return 0.0
    return float(np.sum(a**p) ** (1.0 / p))


def lp_power(u: LatticeFunction, p: float) -> float:
    """sum |u|^p."""
    if not p > 0:
        raise LatticeError(f"l^p norm needs p > 0, got {p}")
    return float(np.sum(np.abs(u.values) ** p))


def _edge_differences(values: np.ndarray) -> list[np.ndarray]:
    """Forward differences along each axis of the zero-padded array.

    Entry j of axis k is u(x + e_k) - u(x) for the j-th site x of the padded
    box, so every edge touching the original box appears exactly once.
    """
    padded = np.pad(values, 1)
    return [np.diff(padded, axis=k) for k in range(values.ndim)]


def gradient_power_field(u: LatticeFunction, p: float) -> LatticeFunction:
    """|grad u(x)|_p^p = sum_{y~x} |u(y) - u(x)|^p on the box grown by one.

    The grown box is the support box together with its vertex boundary, which
    is where the field can be nonzero.
    """
    if not p >= 1:
        raise LatticeError(f"gradient p-norm needs p >= 1, got {p}")
    padded = np.pad(u.values, 2)
    n = padded.shape[0]
    inner = (slice(1, n - 1),) * u.dimension
    centre = padded[inner]
    out = np.zeros(centre.shape)
    for k in range(u.dimension):
        for step in (1, -1):
            sl = list(inner)
            sl[k] = slice(1 + step, n - 1 + step)
            out += np.abs(padded[tuple(sl)] - centre) ** p
    return LatticeFunction(u.box.grown(1), out)


def grad_pnorm_at(u: LatticeFunction, x: Sequence[int], p: float) -> float:
    """(sum_{y~x} |u(y) - u(x)|^p)^(1/p) at the single site x."""
    x = tuple(int(c) for c in x)
    ux = u(x)
    total = 0.0
    for k in range(u.dimension):
        for step in (1, -1):
            y = list(x)
            y[k] += step
            total += abs(u(y) - ux) ** p
    return total ** (1.0 / p)


def d1p_energy(u: LatticeFunction, p: float) -> float:
    """||u||_{D^{1,p}}^p, summing |u(y) - u(x)|^p over ordered neighbour pairs."""
    if not p >= 1:
        raise LatticeError(f"D^{{1,p}} norm needs p >= 1, got {p}")
    return 2.0 * float(sum(np.sum(np.abs(d) ** p) for d in _edge_differences(u.values)))


def d1p_norm(u: LatticeFunction, p: float) -> float:
    return d1p_energy(u, p) ** (1.0 / p)


# ----------------------------------------------------------------------------
# sets, distances, translations


def neighbours(x: Sequence[int]) -> list[tuple[int, ...]]:
    out = []
    for k in range(len(x)):
        for step in (1, -1):
            y = list(x)
            y[k] += step
            out.append(tuple(y))
    return out


def vertex_boundary(sites: Iterable[Sequence[int]]) -> set[tuple[int, ...]]:
    """Sites outside the set that have a neighbour inside it."""
    omega = {tuple(int(c) for c in s) for s in sites}
    return {y for x in omega for y in neighbours(x) if y not in omega}


def combinatorial_distance(x: Sequence[int], y: Sequence[int]) -> int:
    """Shortest-path length in Z^N, i.e. the l1 distance."""
    if len(x) != len(y):
        raise LatticeError("points of different dimension")
    return int(sum(abs(int(a) - int(b)) for a, b in zip(x, y)))


def euclidean_distance(x: Sequence[int], y: Sequence[int]) -> float:
    if len(x) != len(y):
        raise LatticeError("points of different dimension")
    return math.sqrt(sum((int(a) - int(b)) ** 2 for a, b in zip(x, y)))


def distance_from_origin(box: LatticeBox) -> np.ndarray:
    """Combinatorial distance d(i, 0) for every site, shaped like the box."""
    axis = np.abs(np.arange(-box.radius, box.radius + 1))
    d = np.zeros(box.shape, dtype=np.int64)
    for k in range(box.dimension):
        shape = [1] * box.dimension
        shape[k] = box.extent
        d = d + axis.reshape(shape)
    return d


def argmax_site(u: LatticeFunction) -> tuple[int, ...]:
    """Site of max |u|; ties go to the lexicographically smallest site."""
    # row-major order over [-R, R]^N is lexicographic order, and argmax
    # returns the first hit
    k = int(np.argmax(np.abs(u.values)))
    return u.box.multi_index(k)


def recenter(u: LatticeFunction, keep_box: bool = False) -> tuple[LatticeFunction, tuple[int, ...]]:
    """Translate u so that a site of maximal |u| moves to the origin.

    Returns ``(v, shift)`` with ``v(i) = u(i + shift)``. By default ``v`` lives
    on a box large enough to hold the whole shifted support; with
    ``keep_box=True`` it stays on u's box and anything pushed out is lost.
    """
    if u.is_zero():
        raise LatticeError("cannot recenter the zero function")
    shift = argmax_site(u)
    radius = u.radius if keep_box else None
    return translate(u, tuple(-s for s in shift), radius=radius), shift


def embedding_check(u: LatticeFunction, p: float, q: float) -> tuple[bool, float]:
    """Check ||u||_q <= ||u||_p for q >= p; returns (ok, ||u||_p - ||u||_q)."""
    if not 0 < p <= q:
        raise LatticeError(f"embedding check needs 0 < p <= q, got p={p}, q={q}")
    np_, nq = lp_norm(u, p), lp_norm(u, q)
    margin = np_ - nq
    return margin >= -1e-12 * np_, margin


def power_sum_inequality(a: float, b: float, p: float, q: float) -> tuple[bool, bool]:
    """(a^q + b^q)^(p/q) <= a^p + b^p for a, b >= 0 and q >= p > 0.

    Returns ``(holds, strict)``. Equality happens exactly when a = 0 or
    b = 0 (or p = q), so ``strict`` is decided from that characterization
    rather than from rounded floats.
    """
    if a < 0 or b < 0 or not 0 < p <= q:
        raise LatticeError("need a, b >= 0 and 0 < p <= q")
    lhs = (a**q + b**q) ** (p / q)
    rhs = a**p + b**p
    return lhs <= rhs * (1 + 1e-12), bool(a > 0 and b > 0 and q > p)


# ----------------------------------------------------------------------------
# exponent tuples


@dataclass(frozen=True)
class SobolevParams:
    """Exponents (N, p, q) of ||u||_q <= C ||u||_{D^{1,p}}."""

    N: int
    p: float
    q: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise LatticeError(f"Sobolev inequality needs N >= 3, got N={self.N}")
        if not 1 <= self.p < self.N:
            raise LatticeError(f"need 1 <= p < N, got p={self.p}, N={self.N}")
        if not self.q >= self.p_star:
            raise LatticeError(f"need q >= p* = {self.p_star:.12g}, got q={self.q}")

    @property
    def p_star(self) -> float:
        return self.N * self.p / (self.N - self.p)

    @property
    def supercritical(self) -> bool:
        return self.q > self.p_star


@dataclass(frozen=True)
class HLSParams:
    """Exponents of ||A f||_t <= K ||f||_r and its dual pairing with l^s."""

    N: int
    r: float
    s: float
    lam: float
    t: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise LatticeError(f"need N >= 1, got {self.N}")
        if not (self.r > 1 and self.s > 1):
            raise LatticeError(f"need r, s > 1, got r={self.r}, s={self.s}")
        if not 0 < self.lam < self.N:
            raise LatticeError(f"need 0 < lambda < N, got {self.lam}")
        t_dual = self.s / (self.s - 1)
        if self.t is None:
            object.__setattr__(self, "t", t_dual)
        elif not self.t > 1 or abs(1 / self.t + 1 / self.s - 1) > 1e-12:
            raise LatticeError(f"t={self.t} is not the conjugate of s={self.s}")

    @property
    def r_star(self) -> float:
        inv = 1 + 1 / self.t - self.lam / self.N
        return math.inf if inv <= 0 else 1 / inv

    @property
    def exponent_sum(self) -> float:
        return 1 / self.r + 1 / self.s + self.lam / self.N

    @property
    def supercritical(self) -> bool:
        return 1 / self.r + self.lam / self.N > 1 + 1 / self.t


# ----------------------------------------------------------------------------
# grid files


def format_grid(u: LatticeFunction) -> str:
    lines = [f"{GRID_HEADER} N={u.dimension} R={u.radius}"]
    row = u.box.extent
    flat = u.values.ravel()
    for k in range(0, flat.size, row):
        lines.append(" ".join(f"{v:.17g}" for v in flat[k : k + row]))
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> LatticeFunction:
    head, _, body = text.partition("\n")
    parts = head.split()
    if len(parts) != 4 or " ".join(parts[:2]) != GRID_HEADER:
        raise LatticeError(f"bad grid header: {head!r}")
    try:
        fields = dict(p.split("=", 1) for p in parts[2:])
        N, R = int(fields["N"]), int(fields["R"])
    except (KeyError, ValueError) as exc:
        raise LatticeError(f"bad grid header: {head!r}") from exc
    box = make_box(N, R)
    try:
        vals = np.array([float(tok) for tok in body.split()])
    except ValueError as exc:
        raise LatticeError("grid file holds a non-numeric value") from exc
    return LatticeFunction(box, vals)


def write_grid(path: str | Path, u: LatticeFunction) -> None:
    Path(path).write_text(format_grid(u), encoding="utf-8")


def read_grid(path: str | Path) -> LatticeFunction:
    return parse_grid(Path(path).read_text(encoding="utf-8"))
