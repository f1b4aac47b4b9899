import math
import warnings

import numpy as np
import pytest

from ibclab.kernels import (
    KernelSpec,
    NotPositiveRealError,
    SamplerConfig,
    check_positive_real,
    delay_pr_condition,
    eval_laplace,
    find_x_tilde,
    min_z0_delayed_sqrt,
    quadratic_halfplane_roots,
)
from ibclab.measures import DiffusiveDescriptor, DiscreteMeasure, fractional_density

# Frozen from a 40-digit mpmath findroot on tan(x + pi/4) + 1/(2x) near 2.1.
X_TILDE = 2.125115992021798793
# Frozen from mpmath: minimum over omega of Re[exp(-i omega tau) (i omega)^-1/2], tau = 2.13.
MIN_Z0_TAU_213 = 0.9745378855795446175


class TestEvalLaplace:
    def test_delay_cancels_at_i_pi(self):
        assert abs(eval_laplace(KernelSpec(z0=1, z_tau=1, tau=1), 1j * math.pi)) < 1e-15

    def test_fractional_integral(self):
        k = KernelSpec(diff_standard=fractional_density(0.5))
        assert eval_laplace(k, 4.0) == pytest.approx(0.5, abs=1e-15)

    def test_proportional_plus_derivative(self):
        assert eval_laplace(KernelSpec(z0=1, z1=2), 3.0) == 7.0

    def test_discrete_terms(self):
        mu = DiscreteMeasure([1.0, 2.0], [1.0, 3.0])
        nu = DiscreteMeasure([4.0], [2.0])
        k = KernelSpec(diff_standard=DiffusiveDescriptor("discrete", measure=mu),
                       diff_extended=DiffusiveDescriptor("discrete", measure=nu))
        s = 1.5 + 0.5j
        expected = 1 / (s + 1) + 3 / (s + 2) + 2 * s / (s + 4)
        assert abs(eval_laplace(k, s) - expected) < 1e-15

    def test_array_input(self):
        k = KernelSpec(z0=1, z1=2)
        np.testing.assert_allclose(eval_laplace(k, np.array([1.0, 2.0])), [3.0, 5.0])

    def test_rejects_left_half_plane(self):
        with pytest.raises(ValueError):
            eval_laplace(KernelSpec(z0=1), -0.1 + 1j)

    def test_rejects_zero_for_fractional_integral(self):
        with pytest.raises(ValueError):
            eval_laplace(KernelSpec(diff_standard=fractional_density(0.3)), 0.0)

    def test_zero_allowed_for_regular_kernel(self):
        assert eval_laplace(KernelSpec(z0=1, z_tau=0.5, tau=1), 0.0) == 1.5

    def test_principal_branch(self):
        k = KernelSpec(diff_extended=fractional_density(0.5))
        # sqrt(i) on the principal branch has argument pi/4
        assert np.angle(eval_laplace(k, 1j)) == pytest.approx(math.pi / 4)

    def test_conjugate_symmetry(self):
        k = KernelSpec(z0=1, z_tau=0.4, tau=0.7, z1=0.3, diff_standard=fractional_density(0.4))
        s = 0.3 + 2.1j
        assert abs(eval_laplace(k, s.conjugate()) - eval_laplace(k, s).conjugate()) < 1e-14


class TestKernelSpec:
    def test_validation(self):
        for bad in ({"tau": -1}, {"z1": -1}, {"z0": -1}):
            with pytest.raises(ValueError):
                KernelSpec(**bad)

    def test_certified_flag_enforces_condition(self):
        with pytest.raises(NotPositiveRealError):
            KernelSpec(z0=0.5, z_tau=1, tau=1, certified_pr=True)
        with pytest.warns(RuntimeWarning):
            KernelSpec(z0=1, z_tau=-1, tau=1, certified_pr=True)

    def test_zero_frequency_warning(self):
        with pytest.warns(RuntimeWarning, match="z\\(0\\) = 0"):
            KernelSpec(z0=1, z_tau=-1, tau=0.3)

    def test_terms(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            k = KernelSpec(z0=1, z_tau=0.5, tau=0.3, z1=0.1)
        assert k.terms == ["proportional", "delay", "derivative"]


class TestPositiveReal:
    def test_violating_delay(self):
        rep = check_positive_real(KernelSpec(z0=1, z_tau=2, tau=1))
        assert not rep.certified
        assert rep.violations
        for s, re in rep.violations:
            assert s.real > 0 and re < -1e-10

    def test_admissible_delay(self):
        rep = check_positive_real(KernelSpec(z0=2, z_tau=1, tau=1))
        assert rep.certified and rep.n_violations == 0
        assert "not a proof" in rep.to_dict()["note"]

    def test_pure_derivative(self):
        assert check_positive_real(KernelSpec(z1=1)).certified

    def test_fractional(self):
        k = KernelSpec(diff_standard=fractional_density(0.5), diff_extended=fractional_density(0.3))
        assert check_positive_real(k).certified

    def test_negative_z_tau_boundary_case(self):
        with pytest.warns(RuntimeWarning):
            k = KernelSpec(z0=1, z_tau=-1, tau=0.5)
        assert check_positive_real(k).min_real_part >= -1e-10

    def test_sampler_grid_shapes(self):
        sc = SamplerConfig(n_re=3, n_im=5, n_omega=7, n_real=4)
        assert sc.interior().size == 15
        assert sc.boundary().size == 14
        assert np.all(sc.boundary().real == sc.eps)

    @pytest.mark.parametrize("args,expected", [((1, 1, 0.5), True), ((1, -1, 0.5), True),
                                                ((0.9, 1, 0.5), False)])
    def test_delay_condition(self, args, expected):
        assert delay_pr_condition(*args) is expected


class TestQuadraticRoots:
    def test_unit_coefficients(self):
        rep = quadratic_halfplane_roots(1, 1, 1, 1)
        expected = np.array([-0.5 + 1j * math.sqrt(3) / 2, -0.5 - 1j * math.sqrt(3) / 2])
        got = rep.roots[np.argsort(rep.roots.imag)]
        np.testing.assert_allclose(got, expected[::-1], atol=1e-15)
        assert rep.max_re == pytest.approx(-0.5)

    def test_linear_degenerate(self):
        rep = quadratic_halfplane_roots(0, 1, 0, 2 + 1j)
        np.testing.assert_array_equal(rep.roots, [0])
        assert rep.max_re == 0

    def test_complex_z(self):
        z = 1 + 1j
        rep = quadratic_halfplane_roots(1, 2, 1, z)
        oracle = np.roots([z, 2, z])
        np.testing.assert_allclose(np.sort_complex(rep.roots), np.sort_complex(oracle), atol=1e-14)
        assert rep.max_re <= 0

    def test_a0_zero(self):
        rep = quadratic_halfplane_roots(0, 2, 1, 1)
        np.testing.assert_allclose(np.sort_complex(rep.roots), [-2, 0])

    def test_no_root_when_constant(self):
        rep = quadratic_halfplane_roots(1, 0, 0, 1)
        assert rep.roots.size == 0

    def test_errors(self):
        with pytest.raises(ValueError, match="degenerate"):
            quadratic_halfplane_roots(0, 0, 0, 1)
        with pytest.raises(ValueError):
            quadratic_halfplane_roots(1, 1, 1, -1 + 1j)
        with pytest.raises(ValueError):
            quadratic_halfplane_roots(-1, 1, 1, 1)


class TestDelayedSqrtThreshold:
    def test_x_tilde_value(self):
        x = find_x_tilde()
        assert x == pytest.approx(X_TILDE, abs=1e-13)
        assert abs(x - 2.13) < 0.01
        assert abs(math.tan(x + math.pi / 4) + 1 / (2 * x)) < 1e-10

    def test_single_sign_change_in_bracket(self):
        x = np.linspace(math.pi / 4 + 1e-6, 5 * math.pi / 4 - 1e-6, 200001)
        f = np.tan(x + np.pi / 4) + 1 / (2 * x)
        assert np.count_nonzero(np.diff(np.sign(f)) > 0) == 1
        # no root below the bracket: both terms positive
        y = np.linspace(1e-6, math.pi / 4 - 1e-6, 1000)
        assert np.all(np.tan(y + np.pi / 4) + 1 / (2 * y) > 0)

    def test_reference_value(self):
        assert min_z0_delayed_sqrt(1, 2.13) == pytest.approx(MIN_Z0_TAU_213, rel=1e-13)
        assert min_z0_delayed_sqrt(1, 2.13) == pytest.approx(0.974, abs=1e-3)

    def test_zero_and_scaling(self):
        assert min_z0_delayed_sqrt(0, 1) == 0
        assert min_z0_delayed_sqrt(0.7, 4 * 0.3) == pytest.approx(2 * min_z0_delayed_sqrt(0.7, 0.3))

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            min_z0_delayed_sqrt(1, 0)

    def test_threshold_separates_pr(self):
        zt, tau = 1.0, 2.13
        z0 = min_z0_delayed_sqrt(zt, tau)
        sampler = SamplerConfig(omega_min=0.1, omega_max=10, n_omega=20000, n_re=5, n_im=5, R=10)
        above = check_positive_real(KernelSpec(z0=z0 * 1.001, delayed_diffusive=(zt, tau)), sampler)
        below = check_positive_real(KernelSpec(z0=z0 * 0.999, delayed_diffusive=(zt, tau)), sampler)
        assert above.certified and not below.certified
