"""Independent reference implementations used by the tests.

These use plain loops and edge lists and share no code with the package.
"""
import itertools
import math
from collections import deque

import numpy as np
from scipy.optimize import minimize


def box_sites(N, R):
    return list(itertools.product(range(-R, R + 1), repeat=N))


def value(arr, R, x):
    if all(-R <= c <= R for c in x):
        return arr[tuple(c + R for c in x)]
    return 0.0


def nbrs(x):
    for k in range(len(x)):
        for s in (1, -1):
            y = list(x)
            y[k] += s
            yield tuple(y)


def lp_norm_loop(arr, p):
    return sum(abs(v) ** p for v in arr.ravel()) ** (1.0 / p)


def d1p_energy_loop(arr, p):
    """Sum over ordered neighbour pairs (x, y), x anywhere in the grown box."""
    N = arr.ndim
    R = (arr.shape[0] - 1) // 2
    total = 0.0
    for x in box_sites(N, R + 1):
        ux = value(arr, R, x)
        for y in nbrs(x):
            total += abs(value(arr, R, y) - ux) ** p
    return total


def p_laplacian_loop(arr, p):
    """Delta_p u on the grown box [-R-1, R+1]^N."""
    N = arr.ndim
    R = (arr.shape[0] - 1) // 2
    out = np.zeros((2 * R + 3,) * N)
    for x in box_sites(N, R + 1):
        ux = value(arr, R, x)
        s = 0.0
        for y in nbrs(x):
            d = value(arr, R, y) - ux
            s += abs(d) ** (p - 2) * d if d != 0 else 0.0
        out[tuple(c + R + 1 for c in x)] = s
    return out


def bfs_distance(x, y, slack=2):
    """Shortest path in Z^N by breadth-first search inside a bounding box."""
    lo = [min(a, b) - slack for a, b in zip(x, y)]
    hi = [max(a, b) + slack for a, b in zip(x, y)]
    seen = {tuple(x): 0}
    queue = deque([tuple(x)])
    while queue:
        z = queue.popleft()
        if z == tuple(y):
            return seen[z]
        for w in nbrs(z):
            if w not in seen and all(l <= c <= h for c, l, h in zip(w, lo, hi)):
                seen[w] = seen[z] + 1
                queue.append(w)
    raise RuntimeError("unreachable")


def riesz_loop(arr, lam, R_out=None):
    """(A f)(i) = sum_{j != i} f(j) |i - j|^-lam by a double loop."""
    N = arr.ndim
    R = (arr.shape[0] - 1) // 2
    R_out = R if R_out is None else R_out
    out = np.zeros((2 * R_out + 1,) * N)
    src = box_sites(N, R)
    for i in box_sites(N, R_out):
        s = 0.0
        for j in src:
            if i != j:
                s += value(arr, R, j) * math.dist(i, j) ** (-lam)
        out[tuple(c + R_out for c in i)] = s
    return out


def hls_J_loop(f, g, lam):
    N = f.ndim
    R = (f.shape[0] - 1) // 2
    sites = box_sites(N, R)
    total = 0.0
    for i in sites:
        for j in sites:
            if i != j:
                total += value(f, R, i) * value(g, R, j) * math.dist(i, j) ** (-lam)
    return total


def sobolev_min_lbfgs(N, R, p, q, seed=0):
    """Minimize the Sobolev quotient on [-R, R]^N with scipy's L-BFGS-B.

    The energy is built from an explicit edge list with boundary edges to the
    zero exterior; every edge is counted for both orientations.
    """
    sites = box_sites(N, R)
    index = {x: k for k, x in enumerate(sites)}
    inner, outer = [], []
    for x in sites:
        for y in nbrs(x):
            if y in index:
                if index[x] < index[y]:
                    inner.append((index[x], index[y]))
            else:
                outer.append(index[x])
    inner = np.array(inner)
    outer = np.array(outer)

    def quotient(u):
        d = u[inner[:, 0]] - u[inner[:, 1]]
        E = 2.0 * (np.sum(np.abs(d) ** p) + np.sum(np.abs(u[outer]) ** p))
        gE = np.zeros_like(u)
        gd = 2.0 * p * np.abs(d) ** (p - 1) * np.sign(d)
        np.add.at(gE, inner[:, 0], gd)
        np.add.at(gE, inner[:, 1], -gd)
        np.add.at(gE, outer, 2.0 * p * np.abs(u[outer]) ** (p - 1) * np.sign(u[outer]))
        Mq = np.sum(np.abs(u) ** q)
        D = Mq ** (p / q)
        gD = p * Mq ** (p / q - 1) * np.abs(u) ** (q - 1) * np.sign(u)
        return E / D, gE / D - E * gD / D**2

    rng = np.random.default_rng(seed)
    x0 = np.array([math.exp(-sum(c * c for c in x) / R) for x in sites]) * rng.uniform(0.9, 1.1, len(sites))
    res = minimize(quotient, x0, jac=True, method="L-BFGS-B", options={"maxiter": 20000, "ftol": 1e-16, "gtol": 1e-12})
    return float(res.fun)
