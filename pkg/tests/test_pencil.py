import numpy as np
import pytest

from opcalc.calculus import transformator_matrix
from opcalc.errors import NewtonStall, NotASolution, ShapeMismatch, SingularPencil
from opcalc.holofun import builtin, dd_kernel
from opcalc.numcore import eigenvalues, multiset_match_distance
from opcalc.pencil import (
    PencilFactorization,
    QuadraticPencil,
    impulse_response,
    impulse_response_factored,
    pencil_resolvent,
    right_solvent_newton,
    solve_ivp,
)

from helpers import diagonalizable, rand_complex
from oracles import rk4_second_order


def _solvent_pencil(seed, n=5):
    """E = I pencil built from two well-separated solvents."""
    rng = np.random.default_rng(seed)
    a1 = diagonalizable(rng, n, center=-2.0, spread=0.8)
    a2 = diagonalizable(rng, n, center=2.0, spread=0.8)
    f = -(a1 + a2)
    h = a2 @ a1
    return a1, a2, f, h


class TestQuadraticPencil:
    def test_spectrum_matches_linearization(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        assert multiset_match_distance(p.spectrum, [1j, -1j]) < 1e-12

    def test_singular_e_rejected(self):
        with pytest.raises(SingularPencil):
            QuadraticPencil(np.zeros((2, 2)), np.eye(2), np.eye(2))

    def test_shape_guard(self):
        with pytest.raises(ShapeMismatch):
            QuadraticPencil(np.eye(2), np.eye(3), np.eye(2))


class TestPencilResolvent:
    def test_scalar_quadratic(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[-1.0]])  # lam^2 - 1
        r = pencil_resolvent(p, 2.0)
        assert abs(r.array[0, 0] - 1.0 / 3.0) < 1e-14

    def test_diagonal(self):
        e = np.eye(2)
        f = np.diag([1.0, 2.0])
        h = np.diag([3.0, 5.0])
        p = QuadraticPencil(e, f, h)
        lam = 4.0 + 1.0j
        r = pencil_resolvent(p, lam)
        expect = np.diag([1.0 / (lam ** 2 + lam * 1 + 3), 1.0 / (lam ** 2 + lam * 2 + 5)])
        assert np.linalg.norm(r.array - expect) < 1e-13

    def test_residual_far_outside(self):
        a1, a2, f, h = _solvent_pencil(80)
        p = QuadraticPencil(np.eye(5), f, h)
        lam = 8.0 + 3.0j
        r = pencil_resolvent(p, lam).array
        resid = np.linalg.norm(p.value(lam) @ r - np.eye(5))
        assert resid <= 1e-10

    def test_inside_enclosure_rejected(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        with pytest.raises(SingularPencil):
            pencil_resolvent(p, 1j)


class TestImpulseResponse:
    def test_scalar_harmonic_oscillator(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        for t in np.arange(0.1, 2.01, 0.38):
            tt, td = impulse_response(p, t)
            assert abs(tt.array[0, 0] - np.sin(t)) <= 1e-9
            assert abs(td.array[0, 0] - np.cos(t)) <= 1e-9

    def test_time_zero_limits(self):
        rng = np.random.default_rng(81)
        e = np.eye(4) + 0.3 * rand_complex(rng, 4, 4)
        f = rand_complex(rng, 4, 4)
        h = rand_complex(rng, 4, 4)
        p = QuadraticPencil(e, f, h)
        tt, td = impulse_response(p, 0.0)
        assert np.linalg.norm(tt.array) <= 1e-9
        e_inv = np.linalg.inv(e)
        assert np.linalg.norm(td.array - e_inv) <= 1e-9 * (1 + np.linalg.norm(e_inv))

    def test_factored_scalar(self):
        fact = PencilFactorization([[1j]], [[-1j]])
        tt, td = impulse_response_factored(fact, [[1.0]], 1.0)
        assert abs(tt.array[0, 0] - np.sin(1.0)) < 1e-10
        assert abs(td.array[0, 0] - np.cos(1.0)) < 1e-10

    def test_factored_zero_solvents(self):
        fact = PencilFactorization(np.zeros((2, 2)), np.zeros((2, 2)))
        tt, _ = impulse_response_factored(fact, np.eye(2), 1.5)
        assert np.linalg.norm(tt.array - 1.5 * np.eye(2)) <= 1e-10

    def test_factored_matches_direct(self):
        a1, a2, f, h = _solvent_pencil(82)
        p = QuadraticPencil(np.eye(5), f, h)
        fact = PencilFactorization(a1, a2)
        t = 0.8
        tt1, td1 = impulse_response(p, t)
        tt2, td2 = impulse_response_factored(fact, np.eye(5), t)
        assert np.linalg.norm(tt1.array - tt2.array) <= 1e-8 * (1 + np.linalg.norm(tt1.array))
        assert np.linalg.norm(td1.array - td2.array) <= 1e-8 * (1 + np.linalg.norm(td1.array))

    def test_negative_or_complex_time_rejected(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        with pytest.raises(ValueError):
            impulse_response(p, -0.5)
        with pytest.raises(ValueError):
            impulse_response(p, 1.0 + 1.0j)

    def test_ode_residual_finite_difference(self):
        a1, a2, f, h = _solvent_pencil(83, n=4)
        p = QuadraticPencil(np.eye(4), f, h)
        t0, dt = 0.9, 1e-3
        ts = [t0 - dt, t0, t0 + dt]
        vals = [impulse_response(p, t)[0].array for t in ts]
        tdd = (vals[0] - 2 * vals[1] + vals[2]) / dt ** 2
        td = impulse_response(p, t0)[1].array
        resid = np.linalg.norm(tdd + f @ td + h @ vals[1])
        scale = np.linalg.norm(tdd) + np.linalg.norm(f @ td) + np.linalg.norm(h @ vals[1])
        assert resid <= 1e-4 * scale

    def test_tdot_is_time_derivative(self):
        a1, a2, f, h = _solvent_pencil(84, n=4)
        p = QuadraticPencil(np.eye(4), f, h)
        t0, dt = 0.7, 1e-4
        tp = impulse_response(p, t0 + dt)[0].array
        tm = impulse_response(p, t0 - dt)[0].array
        td = impulse_response(p, t0)[1].array
        assert np.linalg.norm((tp - tm) / (2 * dt) - td) <= 1e-6 * (1 + np.linalg.norm(td))

    def test_semigroup_identity(self):
        from opcalc.calculus import funm

        a1, a2, f, h = _solvent_pencil(85, n=4)
        p = QuadraticPencil(np.eye(4), f, h)
        t, s = 0.6, 0.9
        t_ts = impulse_response(p, t + s)[0].array
        t_t = impulse_response(p, t)[0].array
        t_s = impulse_response(p, s)[0].array
        t1 = funm(builtin("exp", t=t), a1).array
        t2 = funm(builtin("exp", t=s), a2).array
        assert np.linalg.norm(t_ts - (t1 @ t_s + t_t @ t2)) <= 1e-8 * (1 + np.linalg.norm(t_ts))

    @pytest.mark.parametrize("fun", ["exp", "xexp"])
    def test_response_transformator_spectrum(self, fun):
        # spectra of C -> T(t) and C -> Tdot(t) over the solvent spectra
        a1, a2, _, _ = _solvent_pencil(86, n=3)
        f = builtin(fun, t=0.5)
        lift = transformator_matrix(dd_kernel(f), a1, a2).lift.array
        from opcalc.holofun import divided_difference

        expect = [
            divided_difference(f, la, mu)
            for la in eigenvalues(a1)
            for mu in eigenvalues(a2)
        ]
        assert multiset_match_distance(eigenvalues(lift), expect) <= 1e-6


class TestRightSolventNewton:
    def test_converges_to_constructed_solvent(self):
        a1, a2, f, h = _solvent_pencil(87)
        rng = np.random.default_rng(88)
        x0 = a1 + 0.05 * rand_complex(rng, 5, 5)
        x = right_solvent_newton(f, h, x0).array
        assert np.linalg.norm(x - a1) <= 1e-8 * (1 + np.linalg.norm(a1))

    def test_scalar_root(self):
        # x^2 + f x + h with roots 1 and 4
        x = right_solvent_newton([[-5.0]], [[4.0]], [[0.8]])
        assert abs(x.array[0, 0] - 1.0) < 1e-10

    def test_exact_start_gives_zero_correction(self):
        a1, a2, f, h = _solvent_pencil(89)
        rep = {}
        x = right_solvent_newton(f, h, a1, report=rep)
        assert rep["iterations"] <= 1
        assert np.linalg.norm(x.array - a1) <= 1e-12 * (1 + np.linalg.norm(a1))

    def test_stall(self):
        # forcing zero iterations cannot satisfy the residual target
        a1, a2, f, h = _solvent_pencil(90)
        rng = np.random.default_rng(91)
        x0 = a1 + 0.05 * rand_complex(rng, 5, 5)
        with pytest.raises(NewtonStall):
            right_solvent_newton(f, h, x0, max_iter=0)

    def test_factorization_verify(self):
        a1, a2, f, h = _solvent_pencil(92)
        fact = PencilFactorization(a1, a2)
        worst = fact.verify(np.eye(5), f, h)
        assert worst <= 1e-8
        bogus = PencilFactorization(a1 + 0.01, a2)
        with pytest.raises(NotASolution):
            bogus.verify(np.eye(5), f, h)


class TestSolveIvp:
    def test_zero_data(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        y = solve_ivp(p, [[0.0]], [[0.0]], 1.0)
        assert np.linalg.norm(y.array) <= 1e-12

    def test_scalar_cosine(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        y = solve_ivp(p, [[1.0]], [[0.0]], 1.2)
        assert abs(y.array[0, 0] - np.cos(1.2)) <= 1e-10

    def test_matches_rk4_reference(self):
        a1, a2, f, h = _solvent_pencil(93, n=4)
        rng = np.random.default_rng(94)
        y0 = rand_complex(rng, 4, 1)
        y1 = rand_complex(rng, 4, 1)
        p = QuadraticPencil(np.eye(4), f, h)
        for t in (0.5, 2.0):
            y = solve_ivp(p, y0, y1, t).array
            ref = rk4_second_order(np.eye(4), f, h, y0, y1, t)
            assert np.linalg.norm(y - ref) <= 1e-6 * (1 + np.linalg.norm(ref))

    def test_shape_guard(self):
        p = QuadraticPencil([[1.0]], [[0.0]], [[1.0]])
        with pytest.raises(ShapeMismatch):
            solve_ivp(p, np.ones((2, 1)), np.ones((1, 1)), 1.0)
