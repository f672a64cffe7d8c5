import math

import numpy as np
import pytest
from scipy.integrate import quad

from beampinn.beam import BeamConfig, DeltaModel, gaussian_delta, pde_residual
from beampinn.errors import ConfigurationError, StabilityError, UsageError
from beampinn.reference import modal_force, modal_forces, rk4_step, solve_reference

BEAM = BeamConfig()


def quad_force(n, t, beam, delta):
    """Independent projection by adaptive quadrature."""
    k = n * math.pi / beam.L
    c = beam.v * t + delta.mu
    lo, hi = max(0.0, c - 10 * delta.sigma), min(beam.L, c + 10 * delta.sigma)
    val, _ = quad(lambda x: gaussian_delta(x, c, delta.sigma) * math.sin(k * x), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * beam.p / (beam.m * beam.L) * val


class TestProjection:
    def test_zero_load(self):
        F = modal_forces([1, 2, 3], [0.2, 1.0], BeamConfig(p=0.0), DeltaModel())
        assert np.all(F == 0)

    def test_sifting_narrow_gaussian(self):
        d = DeltaModel(sigma=1e-4)
        for n in (1, 2, 5):
            t = 0.9
            exact = 2.0 / math.pi * math.sin(n * 0.9)
            assert modal_force(n, t, BEAM, d) == pytest.approx(exact, abs=1e-4)

    @pytest.mark.parametrize("n, t, sigma", [(2, 0.0, 0.3989422804014327), (1, 0.7, 0.2), (7, 1.3, 0.05), (3, 0.001, 1e-3)])
    def test_matches_adaptive_quadrature(self, n, t, sigma):
        d = DeltaModel(sigma=sigma)
        assert modal_force(n, t, BEAM, d) == pytest.approx(quad_force(n, t, BEAM, d), abs=1e-8)

    def test_vectorised_matches_scalar(self):
        d = DeltaModel(sigma=0.05)
        F = modal_forces([1, 4], [0.0, 0.02, 1.5], BEAM, d)
        assert F.shape == (3, 2)
        assert F[1, 1] == pytest.approx(modal_force(4, 0.02, BEAM, d), rel=1e-13)

    def test_bad_inputs(self):
        with pytest.raises(UsageError):
            modal_force(0, 0.1, BEAM, DeltaModel())
        with pytest.raises(ConfigurationError):
            modal_forces([1], [0.1], BEAM, DeltaModel(kind="discrete"))


def test_rk4_step_matches_taylor_of_free_oscillator():
    # free oscillator from q=1: exact q(h) = cos(omega h); RK4 local error is O(h^5)
    q, qd = rk4_step(1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.01)
    assert q == pytest.approx(math.cos(0.02), abs=1e-11)
    assert qd == pytest.approx(-2.0 * math.sin(0.02), abs=1e-10)


class TestSolve:
    @pytest.fixture(scope="class")
    @staticmethod
    def sol():
        return solve_reference(BEAM, DeltaModel(sigma=0.3989422804014327), 30, 2e-3)

    def test_from_rest(self, sol):
        x = np.linspace(0, BEAM.L, 11)
        assert np.all(sol(x, 0.0) == 0)

    def test_boundaries(self, sol):
        t = np.linspace(0, BEAM.t_end, 9)
        assert np.all(sol(0.0, t) == 0)
        assert np.all(np.abs(sol(BEAM.L, t)) < 1e-14)

    def test_zero_load(self):
        s = solve_reference(BeamConfig(p=0.0), DeltaModel(), 10, 1e-2)
        assert np.all(s.q == 0)

    def test_pde_residual_small(self):
        # load well inside the beam, so its sine series converges spectrally
        d = DeltaModel(sigma=0.2)
        s = solve_reference(BEAM, d, 40, 1e-3)
        rng = np.random.default_rng(0)
        x = rng.uniform(0.2, BEAM.L - 0.2, 50)
        t = rng.uniform(0.8, BEAM.t_end, 50)
        res = pde_residual(s.derivatives(x, t), x, t, BEAM, d)
        assert np.max(np.abs(res)) < 1e-4  # load peak is 2

    def test_mode_convergence(self):
        d = DeltaModel(sigma=0.2)
        x, t = np.linspace(0.1, 3.0, 7), np.full(7, 1.2)
        ref = solve_reference(BEAM, d, 80, 1e-3)(x, t)
        errs = [np.max(np.abs(solve_reference(BEAM, d, n, 1e-3)(x, t) - ref)) for n in (20, 30, 40, 60)]
        assert all(b <= a for a, b in zip(errs, errs[1:]))

    def test_dt_halving(self):
        d = DeltaModel(sigma=0.05)
        a = solve_reference(BEAM, d, 40, 1e-3)
        b = solve_reference(BEAM, d, 40, 5e-4)
        x = np.linspace(0, BEAM.L, 41)
        ua, ub = a(x, BEAM.t_end), b(x, BEAM.t_end)
        assert np.linalg.norm(ua - ub) / np.linalg.norm(ub) < 1e-6

    def test_hermite_interpolation_between_samples(self):
        d = DeltaModel(sigma=0.1)
        coarse = solve_reference(BEAM, d, 20, 1e-2)
        fine = solve_reference(BEAM, d, 20, 1e-3)
        x = np.linspace(0.2, 3.0, 5)
        assert np.max(np.abs(coarse(x, 0.7345) - fine(x, 0.7345))) < 1e-6

    def test_stability_guard(self):
        with pytest.raises(StabilityError):
            solve_reference(BEAM, DeltaModel(), 200, 1e-3, max_substeps=1)
        with pytest.raises(StabilityError):
            solve_reference(BEAM, DeltaModel(), 200, 1e-2)

    def test_rejects_damping_and_bad_args(self):
        with pytest.raises(UsageError):
            solve_reference(BEAM, DeltaModel(), 0, 1e-3)
        with pytest.raises(UsageError):
            solve_reference(BEAM, DeltaModel(), 5, 0.0)

    def test_time_out_of_range(self, sol):
        with pytest.raises(UsageError):
            sol(1.0, 2.0)
