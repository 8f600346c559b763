import numpy as np
import pytest

from lpgreedy import (Element, SolverConfig, bracket_minimum,
                      chebyshev_project, line_search, lp_space, minimize_2d,
                      norming_functional)
from lpgreedy.solvers import dense_line_min, min_along_ray
from lpgreedy.space import pnorm


class TestLineSearch:
    def test_quadratic_vertex(self):
        arg, val = line_search(lambda t: (t - 1.0) ** 2 + 2.0, 0.0, 4.0)
        assert arg == pytest.approx(1.0, abs=1e-6)
        assert val == pytest.approx(2.0, abs=1e-10)

    def test_hilbert_projection(self):
        f = np.array([1.0, 1.0])
        g = np.array([1.0, 0.0])
        arg, val = line_search(lambda t: float(np.linalg.norm(f - t * g)), 0.0, 4.0)
        assert arg == pytest.approx(1.0, abs=1e-6)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_monotone_returns_boundary(self):
        arg, val = line_search(lambda t: t + 1.0, 0.0, 4.0)
        assert arg == pytest.approx(0.0, abs=1e-6)
        assert val <= 1.0 + 1e-12

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            line_search(lambda t: t, 1.0, 0.0)

    def test_matches_dense_grid_on_residual_objectives(self):
        # value within 1e-8 of a 1e6-point grid scan on random lp residuals
        rng = np.random.default_rng(12)
        lams = np.linspace(0.0, 4.0, 1_000_001)
        for trial in range(100):
            p = float(rng.choice([1.5, 2.0, 3.0]))
            f = rng.standard_normal(4)
            g = rng.standard_normal(4)
            g /= pnorm(p, g)
            vals = np.sum(np.abs(f[None, :] - lams[:, None] * g[None, :]) ** p,
                          axis=1) ** (1.0 / p)
            grid_min = float(np.min(vals))
            _, val = line_search(lambda t: pnorm(p, f - t * g), 0.0, 4.0)
            assert abs(val - grid_min) <= 1e-8


class TestBracket:
    def test_contains_quadratic_minimum(self):
        lo, hi = bracket_minimum(lambda t: (t - 3.0) ** 2, 0.0)
        assert lo <= 3.0 <= hi

    def test_norm_objectives_bracket(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = float(rng.choice([1.5, 2.0, 4.0]))
            f = rng.standard_normal(6) * rng.uniform(0.5, 10.0)
            g = rng.standard_normal(6)
            g /= pnorm(p, g)
            lo, hi = bracket_minimum(lambda t: pnorm(p, f - t * g), 0.0)
            best = min_along_ray(p, f, g, nonneg=True)
            assert lo <= best <= hi

    def test_flat_tail_still_brackets(self):
        lo, hi = bracket_minimum(lambda t: max(1.0 - t, 0.0), 0.0)
        assert hi >= 1.0

    def test_two_sided_brackets_negative_minimizer(self):
        lo, hi = bracket_minimum(lambda t: (t + 5.0) ** 2, 1.0, two_sided=True)
        assert lo <= -5.0 <= hi

    def test_unbounded_objective_fails(self):
        with pytest.raises(RuntimeError, match="no bracket"):
            bracket_minimum(lambda t: -t, 0.0)


class TestMinimize2d:
    def test_separable_quadratic(self):
        (w, lam), val = minimize_2d(lambda a, b: (a - 2.0) ** 2 + (b - 1.0) ** 2)
        assert w == pytest.approx(2.0, abs=1e-5)
        assert lam == pytest.approx(1.0, abs=1e-5)
        assert val == pytest.approx(0.0, abs=1e-8)

    def test_reduces_to_line_search_when_one_direction_vanishes(self):
        # free-relaxation objective with a zero previous approximant
        p = 2.0
        f = np.array([1.0, 2.0, 0.5])
        phi = np.array([1.0, 0.0, 0.0])
        G = np.zeros(3)

        def obj(w, lam):
            return pnorm(p, f - ((1.0 - w) * G + lam * phi))

        (_, lam), val = minimize_2d(obj)
        lo, hi = bracket_minimum(lambda t: pnorm(p, f - t * phi), 0.0)
        lam_ref, val_ref = line_search(lambda t: pnorm(p, f - t * phi), lo, hi)
        assert val == pytest.approx(val_ref, abs=1e-6)
        assert lam == pytest.approx(lam_ref, abs=1e-5)

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(8)
        f = rng.standard_normal(6)
        G = rng.standard_normal(6)
        phi = rng.standard_normal(6)
        phi /= np.linalg.norm(phi)

        def obj(w, lam):
            return float(np.linalg.norm(f - ((1.0 - w) * G + lam * phi)))

        (w, lam), val = minimize_2d(obj)
        A = np.column_stack([G, phi])
        coef, *_ = np.linalg.lstsq(A, f, rcond=None)
        ref = float(np.linalg.norm(f - A @ coef))
        # lam may be clamped at 0; only compare when the constraint is slack
        if coef[1] >= 0:
            assert val == pytest.approx(ref, abs=1e-6)

    def test_never_beats_value_at_origin(self):
        (w, lam), val = minimize_2d(lambda a, b: 1.0 + abs(a) + abs(b))
        assert val <= 1.0 + 1e-12

    def test_lambda_constrained_nonnegative(self):
        (_, lam), _ = minimize_2d(lambda a, b: (a - 1.0) ** 2 + (b + 2.0) ** 2)
        assert lam >= 0.0

    def test_beats_both_coordinate_restrictions(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            f = rng.standard_normal(5)
            G = rng.standard_normal(5)
            phi = rng.standard_normal(5)
            phi /= np.linalg.norm(phi)

            def obj(w, lam):
                return float(np.linalg.norm(f - ((1.0 - w) * G + lam * phi)))

            (w, lam), val = minimize_2d(obj)
            blo, bhi = bracket_minimum(lambda x: obj(x, lam), w, two_sided=True)
            _, vw = line_search(lambda x: obj(x, lam), blo, bhi)
            blo, bhi = bracket_minimum(lambda x: obj(w, x), lam, two_sided=True)
            _, vl = line_search(lambda x: obj(w, x), max(0.0, blo), bhi)
            assert val <= vw + 1e-8
            assert val <= vl + 1e-8


class TestMinAlongRay:
    def test_hilbert_closed_form(self):
        rng = np.random.default_rng(1)
        r = rng.standard_normal(5)
        v = rng.standard_normal(5)
        a = min_along_ray(2.0, r, v)
        assert a == pytest.approx(float(np.dot(r, v) / np.dot(v, v)), rel=1e-12)

    @pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
    def test_matches_golden_section(self, p):
        rng = np.random.default_rng(2)
        for _ in range(20):
            r = rng.standard_normal(5)
            v = rng.standard_normal(5)
            a = min_along_ray(p, r, v)
            lo, hi = a - 1.0, a + 1.0
            arg, _ = line_search(lambda t: pnorm(p, r - t * v), lo, hi,
                                 SolverConfig(tol=1e-10))
            assert a == pytest.approx(arg, abs=1e-6)

    def test_nonnegative_clamp(self):
        r = np.array([1.0, 0.0])
        v = np.array([-1.0, 0.0])
        assert min_along_ray(2.0, r, v, nonneg=True) == 0.0


class TestChebyshevProject:
    def test_hilbert_single_axis(self):
        s = lp_space(2.0, 2)
        f = Element(coords=np.array([0.6, 0.4]), space=s)
        e1 = Element(coords=np.array([1.0, 0.0]), space=s)
        res = chebyshev_project(s, f, [e1])
        assert res.coeffs[0] == pytest.approx(0.6, abs=1e-10)
        assert np.allclose(res.residual.coords, [0.0, 0.4], atol=1e-10)
        assert res.converged

    def test_exact_representation(self):
        s = lp_space(2.0, 3)
        f = Element(coords=np.array([0.6, 0.4, 0.0]), space=s)
        basis = [Element(coords=np.eye(3)[i], space=s) for i in (0, 1)]
        res = chebyshev_project(s, f, basis)
        assert pnorm(2.0, res.residual.coords) <= 1e-12

    def test_empty_basis_rejected(self):
        s = lp_space(2.0, 2)
        f = Element(coords=np.array([1.0, 0.0]), space=s)
        with pytest.raises(ValueError):
            chebyshev_project(s, f, [])

    @pytest.mark.parametrize("k", [5, 20, 50])
    def test_matches_normal_equations_up_to_size_50(self, k):
        rng = np.random.default_rng(k)
        s = lp_space(2.0, 64)
        A = rng.standard_normal((64, k))
        A /= np.linalg.norm(A, axis=0)
        basis = [Element(coords=A[:, j], space=s) for j in range(k)]
        f = Element(coords=rng.standard_normal(64), space=s)
        res = chebyshev_project(s, f, basis)
        coef, *_ = np.linalg.lstsq(A, f.coords, rcond=None)
        assert np.allclose(res.coeffs, coef, atol=1e-8)
        ref = float(np.linalg.norm(f.coords - A @ coef))
        assert pnorm(2.0, res.residual.coords) == pytest.approx(ref, abs=1e-8)

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_residual_biorthogonal_to_basis(self, p):
        rng = np.random.default_rng(3)
        s = lp_space(p, 12)
        A = rng.standard_normal((12, 6))
        basis = []
        for j in range(6):
            col = A[:, j] / pnorm(p, A[:, j])
            basis.append(Element(coords=col, space=s))
        f = Element(coords=rng.standard_normal(12), space=s)
        cfg = SolverConfig()
        res = chebyshev_project(s, f, basis, cfg)
        assert res.converged
        F = norming_functional(s, res.residual)
        for b in basis:
            assert abs(float(np.dot(F.coords, b.coords))) <= cfg.grad_tol * 1.01

    def test_rank_deficient_basis_converges_in_value(self):
        s = lp_space(2.0, 4)
        v = np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2)
        basis = [Element(coords=v, space=s)] * 3  # duplicated atom
        f = Element(coords=np.array([1.0, 0.0, 0.0, 0.0]), space=s)
        res = chebyshev_project(s, f, basis)
        ref = float(np.linalg.norm(f.coords - np.dot(f.coords, v) * v))
        assert pnorm(2.0, res.residual.coords) == pytest.approx(ref, abs=1e-9)


class TestDenseLineMin:
    def test_agrees_with_line_search(self):
        rng = np.random.default_rng(4)
        f = rng.standard_normal(6)
        g = rng.standard_normal(6)
        g /= np.linalg.norm(g)

        def vec(ls):
            return np.linalg.norm(f[None, :] - ls[:, None] * g[None, :], axis=1)

        _, v1 = dense_line_min(vec, 0.0, 4.0)
        lo, hi = bracket_minimum(lambda t: float(np.linalg.norm(f - t * g)), 0.0)
        _, v2 = line_search(lambda t: float(np.linalg.norm(f - t * g)), lo, hi)
        assert v1 == pytest.approx(v2, abs=1e-9)
