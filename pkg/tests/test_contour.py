import numpy as np
import pytest

from opcalc.contour import (
    Contour,
    SpectralEnclosure,
    enclosure,
    envelope,
    integrate,
    points_enclosure,
)
from opcalc.errors import CannotSeparate, QuadratureStall

from helpers import diagonalizable, rand_complex
from oracles import expm_taylor


class TestEnclosure:
    def test_single_point(self):
        e = enclosure(np.zeros((1, 1)), 0.5)
        assert e.disks == ((0j, 0.5),)

    def test_two_diagonal_points(self):
        e = enclosure(np.diag([1.0, 5.0]), 1.0)
        assert sorted(e.disks, key=lambda d: d[0].real) == [(1 + 0j, 1.0), (5 + 0j, 1.0)]

    def test_covers_spectrum_random(self):
        rng = np.random.default_rng(20)
        a = rand_complex(rng, 6, 6)
        e = enclosure(a, 0.3)
        for lam in np.linalg.eigvals(a):
            assert e.contains_point(lam)

    def test_gershgorin_covers(self):
        rng = np.random.default_rng(21)
        a = rand_complex(rng, 5, 5)
        e = enclosure(a, 0.1, mode="gershgorin")
        for lam in np.linalg.eigvals(a):
            assert e.contains_point(lam)

    def test_margin_must_be_positive(self):
        with pytest.raises(ValueError):
            enclosure(np.eye(2), 0.0)


class TestEnvelope:
    def test_single_disk_inflated(self):
        g = envelope(SpectralEnclosure(((0j, 1.0),)))
        assert len(g.components) == 1
        c, r, o = g.components[0]
        assert o == 1 and abs(c) < 1e-12 and 1.0 < r < 1.5

    def test_separation_forced(self):
        g = envelope(SpectralEnclosure(((-3 + 0j, 1.0),)), SpectralEnclosure(((3 + 0j, 1.0),)))
        c, r, _ = g.components[0]
        assert abs(c + 3) < 1e-12 and r < 3.0

    def test_two_components_winding(self):
        inside = SpectralEnclosure(((-5 + 0j, 0.5), (5 + 0j, 0.5)))
        avoid = SpectralEnclosure(((0j, 0.5),))
        g = envelope(inside, avoid)
        assert len(g.components) == 2
        assert g.winding(-5) == 1 and g.winding(5) == 1
        assert g.winding(0) == 0

    def test_cannot_separate_overlap(self):
        with pytest.raises(CannotSeparate):
            envelope(SpectralEnclosure(((0j, 1.0),)), SpectralEnclosure(((1 + 0j, 1.0),)))

    def test_merged_circle_blocked_by_avoid(self):
        # three clustered inside disks merge into one covering circle that
        # would swallow the avoided disk sitting just above the cluster
        inside = SpectralEnclosure(((-0.5 + 0j, 0.2), (0j, 0.2), (0.5 + 0j, 0.2)))
        avoid = SpectralEnclosure(((0.8j, 0.2),))
        with pytest.raises(CannotSeparate):
            envelope(inside, avoid)

    def test_close_disks_threaded_without_merge(self):
        # the gap/4 rule lets the contour thread between inside disks when
        # the avoided disk sits in the corridor
        inside = SpectralEnclosure(((-1 + 0j, 0.4), (1 + 0j, 0.4)))
        avoid = SpectralEnclosure(((0j, 0.3),))
        g = envelope(inside, avoid)
        assert g.winding(-1) == 1 and g.winding(1) == 1 and g.winding(0) == 0

    def test_node_clearance(self):
        inside = SpectralEnclosure(((-2 + 0j, 0.5), (2 + 0j, 0.5)))
        avoid = SpectralEnclosure(((6 + 0j, 0.5),))
        g = envelope(inside, avoid)
        gap = inside.gap_to(avoid)
        for z, _ in g.nodes:
            d_in = min(abs(z - c) - r for c, r in inside.disks)
            d_av = min(abs(z - c) - r for c, r in avoid.disks)
            assert d_in >= gap / 4 * (1 - 1e-9)
            assert d_av >= gap / 4 * (1 - 1e-9)


class TestContourNodes:
    def test_closed_curve_weight_sum(self):
        g = Contour(components=((1 + 2j, 1.5, 1),), nodes_per_component=32)
        total = sum(w for _, w in g.nodes)
        assert abs(total) < 1e-13

    def test_nodes_on_circle(self):
        g = Contour(components=((1j, 2.0, 1),), nodes_per_component=16)
        for z, _ in g.nodes:
            assert abs(abs(z - 1j) - 2.0) < 1e-13

    def test_power_of_two_enforced(self):
        with pytest.raises(ValueError):
            Contour(components=((0j, 1.0, 1),), nodes_per_component=48)

    def test_quadrature_winding_matches_geometry(self):
        g = Contour(components=((0j, 1.0, 1), (5 + 0j, 1.0, -1)), nodes_per_component=64)
        for p in (0.2 + 0.1j, 5.3 + 0j, -9 + 0j):
            q = integrate(g, lambda z, p=p: np.array([[1.0 / (z - p)]]), tol=1e-12)
            w = complex(q.value.array[0, 0])
            assert abs(w - round(w.real)) < 1e-10
            assert round(w.real) == g.winding(p)


class TestIntegrate:
    def test_constant_integrand_vanishes(self):
        g = Contour(components=((2 + 1j, 3.0, 1),), nodes_per_component=16)
        q = integrate(g, lambda z: np.eye(3))
        assert np.linalg.norm(q.value.array) < 1e-14

    def test_cauchy_formula(self):
        g = Contour(components=((2 + 0j, 1.0, 1),), nodes_per_component=16)
        q = integrate(g, lambda z: np.eye(2) / (z - 2.0))
        assert np.linalg.norm(q.value.array - np.eye(2)) < 1e-13

    def test_resolvent_exponential_vs_taylor(self):
        rng = np.random.default_rng(22)
        a = diagonalizable(rng, 6, spread=1.5)
        e = enclosure(a, 0.4)
        g = envelope(e)
        n = np.eye(6)
        q = integrate(g, lambda z: np.exp(z) * np.linalg.solve(z * n - a, n))
        assert np.linalg.norm(q.value.array - expm_taylor(a)) <= 1e-10

    def test_exponential_convergence_doubling(self):
        # eigenvalues well inside one covering circle: interior singularity
        # at ~0.66 of the radius gives a >=100x drop from 32 to 64 nodes
        rng = np.random.default_rng(23)
        v = np.eye(6) + 0.2 * rng.standard_normal((6, 6))
        a = v @ np.diag([0.0, 0.5, 1.0, 1.5, 2.0, 2.5]) @ np.linalg.inv(v)
        ref = expm_taylor(a)
        eye = np.eye(6)
        errs = {}
        for nodes in (32, 64):
            g = Contour(components=((1.25 + 0j, 1.9, 1),), nodes_per_component=nodes)
            q = integrate(g, lambda z: np.exp(z) * np.linalg.solve(z * eye - a, eye), fixed=True)
            errs[nodes] = np.linalg.norm(q.value.array - ref)
        assert errs[32] / errs[64] >= 100
        # the internal error estimate shows the same behaviour
        ests = {}
        for nodes in (32, 64):
            g = Contour(components=((1.25 + 0j, 1.9, 1),), nodes_per_component=nodes)
            ests[nodes] = integrate(
                g, lambda z: np.exp(z) * np.linalg.solve(z * eye - a, eye), fixed=True
            ).error_estimate
        assert ests[32] / ests[64] >= 100

    def test_deformation_invariance(self):
        rng = np.random.default_rng(24)
        a = diagonalizable(rng, 5, spread=1.0)
        eye = np.eye(5)
        tol = 1e-10
        vals = []
        for margin in (0.3, 0.8):
            g = envelope(enclosure(a, margin))
            q = integrate(g, lambda z: np.exp(z) * np.linalg.solve(z * eye - a, eye), tol=tol)
            vals.append(q.value.array)
        assert np.linalg.norm(vals[0] - vals[1]) <= 10 * tol * (1 + np.linalg.norm(vals[0]))

    def test_orientation_reversal_negates(self):
        g = Contour(components=((2 + 0j, 1.0, 1),), nodes_per_component=32)
        f = lambda z: np.eye(2) / (z - 2.0)
        q1 = integrate(g, f, fixed=True)
        q2 = integrate(g.reversed(), f, fixed=True)
        assert np.array_equal(q1.value.array, -q2.value.array)

    def test_quadrature_stall(self):
        # pole a hair outside the contour: 64-node cap cannot resolve it
        g = Contour(components=((0j, 1.0, 1),), nodes_per_component=64)
        with pytest.raises(QuadratureStall):
            integrate(g, lambda z: np.eye(1) / (z - 1.0001), tol=1e-12, node_cap=64)

    def test_error_estimate_nonnegative_and_nodes_reported(self):
        g = Contour(components=((2 + 0j, 1.0, 1),), nodes_per_component=16)
        q = integrate(g, lambda z: np.eye(2) / (z - 2.0))
        assert q.error_estimate >= 0.0
        assert q.nodes_used >= 32


def test_points_enclosure_validates():
    with pytest.raises(ValueError):
        points_enclosure([], 0.1)
    e = points_enclosure([1j, 2.0], 0.2)
    assert e.contains_point(1j) and e.contains_point(2.0)
