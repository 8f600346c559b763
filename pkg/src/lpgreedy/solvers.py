"""Scalar and small-dimensional convex minimization used by every greedy step.

All objectives here are convex restrictions of lp norms, so derivative-free
golden-section search on a bracketed interval is robust (norm objectives can
be non-smooth exactly at a zero residual).  The Chebyshev projection is the
one genuinely multi-dimensional solve; it uses conjugate first-order descent
driven by the norming-functional gradient, and its stopping rule is the
biorthogonality of the residual against every selected atom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .space import Element, LpSpace, functional_coords, pnorm

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_BRACKET_CAP = 1e12


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8         # argument tolerance for scalar searches
    grad_tol: float = 1e-10   # stopping gradient size for the projection
    max_iters: int = 500
    bracket_growth: float = 2.0

    def __post_init__(self):
        if not (0 < self.tol < 1) or self.grad_tol <= 0:
            raise ValueError("tolerances must be positive and tol < 1")
        if self.max_iters <= 0 or self.bracket_growth <= 1:
            raise ValueError("max_iters must be positive, bracket_growth > 1")


DEFAULT_SOLVER = SolverConfig()


@dataclass
class ProjectionResult:
    coeffs: np.ndarray
    approximant: Element
    residual: Element
    converged: bool
    iterations: int


class _BestTracker:
    """Wraps an objective and remembers the best point ever evaluated."""

    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn
        self.best_x = None
        self.best_v = np.inf

    def __call__(self, x: float) -> float:
        v = self.fn(x)
        if v < self.best_v:
            self.best_v, self.best_x = v, x
        return v


def line_search(objective: Callable[[float], float], lo: float, hi: float,
                cfg: SolverConfig = DEFAULT_SOLVER) -> tuple:
    """Golden-section minimum of a convex objective on [lo, hi].

    Returns the best point ever evaluated, so the value never exceeds the
    endpoint values even for monotone objectives.
    """
    if lo > hi:
        raise ValueError(f"invalid interval: lo={lo} > hi={hi}")
    f = _BestTracker(objective)
    f(lo)
    f(hi)
    a, b = lo, hi
    tol = cfg.tol * max(1.0, hi - lo)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    f(0.5 * (a + b))
    return f.best_x, f.best_v


def bracket_minimum(objective: Callable[[float], float], start: float,
                    cfg: SolverConfig = DEFAULT_SOLVER,
                    two_sided: bool = False) -> tuple:
    """Find [lo, hi] containing a minimizer of a convex objective.

    One-sided mode expands to the right of ``start`` until the objective
    fails to decrease twice in a row (ties count, so flat tails bracket).
    Two-sided mode grows a symmetric interval around ``start`` until both
    ends sit above the best interior value.
    """
    if two_sided:
        interior_best = objective(start)
        s = 1.0
        while True:
            lo, hi = start - s, start + s
            vlo, vhi = objective(lo), objective(hi)
            tie = 1e-15 * max(1.0, abs(interior_best))
            if vlo >= interior_best - tie and vhi >= interior_best - tie:
                return lo, hi
            interior_best = min(interior_best, vlo, vhi)
            s *= cfg.bracket_growth
            if s > _BRACKET_CAP:
                raise RuntimeError("no bracket found")

    v_prev = objective(start)
    step = 1.0
    rises = 0
    while True:
        x = start + step
        v = objective(x)
        tie = 1e-15 * max(1.0, abs(v_prev))
        rises = rises + 1 if v >= v_prev - tie else 0
        if rises >= 2:
            return start, x
        v_prev = v
        step *= cfg.bracket_growth
        if step > _BRACKET_CAP:
            raise RuntimeError("no bracket found")


def minimize_2d(objective: Callable[[float, float], float],
                cfg: SolverConfig = DEFAULT_SOLVER) -> tuple:
    """Cyclic coordinate descent for min over (w in R, lam >= 0).

    Each coordinate is solved by bracket + golden section; stops when a full
    cycle improves the value by less than cfg.tol.  The start (0, 0) is kept
    as a feasible fallback, so the returned value never exceeds it.
    """
    w, lam = 0.0, 0.0
    best_w, best_lam = w, lam
    best_v = objective(w, lam)
    v_prev = best_v
    for _ in range(cfg.max_iters):
        blo, bhi = bracket_minimum(lambda x: objective(x, lam), w, cfg,
                                   two_sided=True)
        w, _ = line_search(lambda x: objective(x, lam), blo, bhi, cfg)

        blo, bhi = bracket_minimum(lambda x: objective(w, x), lam, cfg,
                                   two_sided=True)
        lam, v = line_search(lambda x: objective(w, x), max(0.0, blo), bhi, cfg)

        if v < best_v:
            best_v, best_w, best_lam = v, w, lam
        if v_prev - v < cfg.tol:
            break
        v_prev = v
    return (best_w, best_lam), best_v


def dense_line_min(objective_vec: Callable[[np.ndarray], np.ndarray],
                   lo: float, hi: float, n_grid: int = 512,
                   cfg: SolverConfig = DEFAULT_SOLVER) -> tuple:
    """Grid scan + golden refinement; the independent line-search oracle.

    ``objective_vec`` must accept an array of arguments and return the array
    of values.  Used for the independently-measured error-reduction
    reference and for bound checks.
    """
    xs = np.linspace(lo, hi, n_grid)
    vs = objective_vec(xs)
    i = int(np.argmin(vs))
    a = xs[max(0, i - 1)]
    b = xs[min(n_grid - 1, i + 1)]
    x, v = line_search(lambda t: float(objective_vec(np.array([t]))[0]), a, b, cfg)
    if vs[i] < v:
        return float(xs[i]), float(vs[i])
    return x, v


def min_along_ray(p: float, r0: np.ndarray, v: np.ndarray,
                  nonneg: bool = False) -> float:
    """argmin over a of ||r0 - a v||_p via safeguarded root finding.

    The derivative sign of the convex map a -> ||r0 - a v|| equals the sign
    of psi(a) = -sum sign(r) |r|^(p-1) v, which is nondecreasing; p = 2 has
    the closed form (r0 . v)/(v . v).
    """
    vv = float(np.dot(v, v))
    if vv == 0.0:
        return 0.0
    if p == 2.0:
        a = float(np.dot(r0, v)) / vv
        return max(0.0, a) if nonneg else a

    def psi(a: float) -> float:
        r = r0 - a * v
        return -float(np.dot(np.sign(r) * np.abs(r) ** (p - 1.0), v))

    scale = pnorm(p, r0) / pnorm(p, v)
    if scale == 0.0:
        return 0.0
    if nonneg and psi(0.0) >= 0.0:
        return 0.0

    # bracket a sign change of psi
    if psi(0.0) < 0.0:
        lo, flo = 0.0, psi(0.0)
        hi = scale
        fhi = psi(hi)
        while fhi < 0.0:
            lo, flo = hi, fhi
            hi *= 2.0
            fhi = psi(hi)
            if hi > 1e9 * max(scale, 1.0):
                return hi
    else:
        hi, fhi = 0.0, psi(0.0)
        lo = -scale
        flo = psi(lo)
        while flo > 0.0:
            hi, fhi = lo, flo
            lo *= 2.0
            flo = psi(lo)
            if -lo > 1e9 * max(scale, 1.0):
                return lo

    # bisection with a secant proposal when it stays inside the bracket
    for _ in range(80):
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if flo < 0.0 < fhi and fhi != flo:
            sec = lo - flo * (hi - lo) / (fhi - flo)
            if lo + 0.1 * (hi - lo) < sec < hi - 0.1 * (hi - lo):
                mid = sec
        fm = psi(mid)
        if fm < 0.0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


def chebyshev_project(space: LpSpace, f: Element, basis: Sequence[Element],
                      cfg: SolverConfig = DEFAULT_SOLVER) -> ProjectionResult:
    """Best approximation of f from span(basis) in the lp norm.

    Conjugate first-order descent: the gradient of ||f - sum lam_k phi_k||
    in lam_k is -F_residual(phi_k), so the stopping rule max_k |F_r(phi_k)|
    <= grad_tol is precisely residual-approximant biorthogonality.  A zero
    residual (exact representation) stops immediately, since the norm is not
    differentiable there.
    """
    if len(basis) == 0:
        raise ValueError("basis must be nonempty")
    p = space.p
    Phi = np.array([b.coords for b in basis]).T  # (n, m)
    m = Phi.shape[1]
    lam = np.zeros(m)
    r = f.coords.copy()
    if p != 2.0 and m >= 2:
        # start from the least-squares coefficients: a feasible point close
        # to the lp optimum that keeps the descent well-conditioned when the
        # basis approaches completeness.  p = 2 starts from zero so the
        # normal-equations cross-check stays an independent route.
        lam_ls, *_ = np.linalg.lstsq(Phi, f.coords, rcond=None)
        r_ls = f.coords - Phi @ lam_ls
        if pnorm(p, r_ls) < pnorm(p, r):
            lam, r = lam_ls, r_ls
    converged = False
    g_prev = None
    d = None
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        rn = pnorm(p, r)
        if rn <= 1e-12:
            converged = True
            break
        g = -(functional_coords(p, r, rn) @ Phi)
        if float(np.max(np.abs(g))) <= cfg.grad_tol:
            converged = True
            break
        if g_prev is None or (iters - 1) % (m + 1) == 0:
            d = -g
        else:
            beta = max(0.0, float(np.dot(g, g - g_prev) / np.dot(g_prev, g_prev)))
            d = -g + beta * d
            if np.dot(g, d) >= 0.0:  # not a descent direction; restart
                d = -g
        g_prev = g
        v = Phi @ d
        alpha = min_along_ray(p, r, v)
        if alpha == 0.0:
            converged = float(np.max(np.abs(g))) <= cfg.grad_tol
            break
        lam = lam + alpha * d
        r = r - alpha * v
        if p != 2.0 and iters % 8 == 0:
            # monotone-safeguarded reweighted least-squares candidate; the
            # Newton-like step cuts through the slow tail of conjugate
            # descent for p < 2, and is only taken when it helps
            w = (np.abs(r) + 1e-14) ** ((p - 2.0) / 2.0)
            lam_c, *_ = np.linalg.lstsq(w[:, None] * Phi, w * f.coords,
                                        rcond=None)
            r_c = f.coords - Phi @ lam_c
            if pnorm(p, r_c) < pnorm(p, r):
                lam, r = lam_c, r_c
                g_prev = None
        if iters % 64 == 0:
            r = f.coords - Phi @ lam  # periodic exact refresh against drift
    G = Element(coords=f.coords - r, space=space)
    return ProjectionResult(coeffs=lam, approximant=G,
                            residual=Element(coords=r, space=space),
                            converged=converged, iterations=iters)
