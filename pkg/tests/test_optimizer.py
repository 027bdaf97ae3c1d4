"""Tests for the finite-dimensional reconstruction driver."""

import numpy as np
import pytest

from kvshape.errors import (
    IncompatibleDataError,
    InadmissibleStepError,
    LineSearchError,
)
from kvshape.geometry import ShapeParams, build_curve, circle
from kvshape.optimizer import (
    BasisSpec,
    ReconstructionConfig,
    assemble_gradient_and_hessian,
    lm_direction,
    radial_deviation,
    reconstruct,
    update_shape,
)
from kvshape.shape_calculus import kv_gradient, make_state_bundle
from kvshape.transmission import TransmissionSolver

R, S1, S2, N = 2.0, 1.0, 5.0, 128
OUTER = build_curve(circle((0.0, 0.0), R), N)


def synth_pair(target, f=None):
    """Measurement pair (f, g) taken from the Dirichlet state on target."""
    if f is None:
        f = np.cos(OUTER.theta)
    solver = TransmissionSolver(OUTER, build_curve(target, N), S1, S2)
    g = S1 * solver.solve_dirichlet(f).dnu_outer
    return f, g


def bundle_at(params, f, g):
    solver = TransmissionSolver(OUTER, build_curve(params, N), S1, S2)
    return make_state_bundle(solver, f, g)


class TestBasisSpec:
    def test_layout(self):
        basis = BasisSpec(max_mode=2)
        assert basis.size == 7
        assert basis.labels() == ["r0", "a_1", "a_2", "b_1", "b_2", "c_x", "c_y"]
        assert BasisSpec(max_mode=3, include_translations=False).size == 7

    def test_fields_on_circle(self):
        curve = build_curve(circle((0.3, -0.2), 0.8), N)
        fields = BasisSpec(max_mode=1).fields(curve)
        # on a circle the radial direction is the outward normal
        np.testing.assert_allclose(fields[0].h_n, 1.0, atol=1e-14)
        np.testing.assert_allclose(fields[1].h_n, np.cos(curve.theta), atol=1e-14)
        np.testing.assert_allclose(fields[2].h_n, np.sin(curve.theta), atol=1e-14)
        np.testing.assert_allclose(fields[3].ambient[:, 0], 1.0, atol=1e-15)
        np.testing.assert_allclose(fields[3].ambient[:, 1], 0.0, atol=1e-15)

    def test_rejects_bad_mode_count(self):
        with pytest.raises(ValueError, match="max_mode"):
            BasisSpec(max_mode=-1)


class TestUpdateShape:
    basis = BasisSpec(max_mode=2)

    def test_zero_step_is_identity(self):
        params = ShapeParams(r0=0.7, cos_coeffs=(0.1,))
        moved = update_shape(params, np.ones(self.basis.size), 0.0, self.basis)
        assert moved is params

    def test_radial_mode_moves_linearly(self):
        params = circle((0.0, 0.0), 0.75)
        d = np.zeros(self.basis.size)
        d[1] = 1.0  # a_1 direction
        moved = update_shape(params, d, 0.03, self.basis)
        assert moved.cos_coeffs[0] == pytest.approx(0.03, abs=0.0)
        assert moved.r0 == params.r0

    def test_translation_moves_center(self):
        params = circle((0.1, 0.2), 0.5)
        d = np.zeros(self.basis.size)
        d[-2:] = (1.0, -2.0)
        moved = update_shape(params, d, 0.01, self.basis)
        assert moved.center == pytest.approx((0.11, 0.18))

    def test_rejects_degenerate_radius(self):
        params = circle((0.0, 0.0), 0.5)
        d = np.zeros(self.basis.size)
        d[0] = -1.0
        with pytest.raises(InadmissibleStepError, match="step leaves admissible set"):
            update_shape(params, d, 0.6, self.basis)

    def test_rejects_margin_violation(self):
        params = circle((0.0, 0.0), 0.5)
        d = np.zeros(self.basis.size)
        d[0] = 1.0
        with pytest.raises(InadmissibleStepError, match="step leaves admissible set"):
            update_shape(params, d, 1.5, self.basis, outer_radius=R, d0=0.05)

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError, match="entries"):
            update_shape(circle((0.0, 0.0), 0.5), np.ones(3), 0.1, self.basis)


class TestAssembly:
    def test_gradient_matches_per_field_calls(self):
        target = ShapeParams(r0=0.75, cos_coeffs=(0.0, 0.08), center=(0.2, 0.0))
        f, g = synth_pair(target)
        bundle = bundle_at(ShapeParams(r0=0.7, sin_coeffs=(0.05,)), f, g)
        basis = BasisSpec(max_mode=2)
        grad, hess = assemble_gradient_and_hessian(bundle, basis)
        fields = basis.fields(bundle.inner)
        for i, h in enumerate(fields):
            assert grad[i] == kv_gradient(bundle, h)
        assert hess.shape == (basis.size, basis.size)
        assert np.max(np.abs(hess - hess.T)) <= 1e-8 * np.max(np.abs(hess))

    def test_translation_gradient_vanishes_by_symmetry(self):
        # concentric circles with symmetric data: moving the trial circle
        # sideways changes nothing to first order
        f, g = synth_pair(circle((0.0, 0.0), 0.75))
        bundle = bundle_at(circle((0.0, 0.0), 0.6), f, g)
        grad, _ = assemble_gradient_and_hessian(bundle, BasisSpec(max_mode=1))
        assert abs(grad[-2]) < 1e-12
        assert abs(grad[-1]) < 1e-12
        # while the radial component is genuinely active
        assert abs(grad[0]) > 1e-3


class TestLMDirection:
    def test_large_mu_aligns_with_steepest_descent(self):
        rng = np.random.default_rng(7)
        H = rng.standard_normal((6, 6))
        H = 0.5 * (H + H.T)
        g = rng.standard_normal(6)
        angles = []
        for mu in (1e0, 1e3, 1e6):
            d = lm_direction(g, H, mu)
            cosang = -(g @ d) / (np.linalg.norm(g) * np.linalg.norm(d))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        assert angles[1] < angles[0]
        assert angles[2] < 1e-4


def make_config(**kw):
    defaults = dict(outer_radius=R, sigma1=S1, sigma2=S2, d0=0.05,
                    n_outer=N, n_inner=N)
    defaults.update(kw)
    return ReconstructionConfig(**defaults)


class TestReconstruct:
    def test_initialized_at_target_stops_immediately(self):
        target = ShapeParams(r0=0.75, cos_coeffs=(0.0, 0.08), center=(0.2, 0.0))
        f, g = synth_pair(target)
        config = make_config(mode="lm", basis=BasisSpec(max_mode=2))
        history = reconstruct(config, (f, g), target)
        assert history.status == "objective_converged"
        assert len(history.records) == 1
        assert history.final.j_value <= config.tol_j

    def test_descent_decreases_strictly(self):
        f, g = synth_pair(circle((0.0, 0.0), 0.75))
        config = make_config(mode="descent", basis=BasisSpec(max_mode=2),
                             max_iter=8)
        history = reconstruct(config, (f, g), circle((0.25, 0.0), 0.6))
        assert history.status == "max_iterations"
        j = history.j_values
        assert len(j) == 9
        assert np.all(np.diff(j) < 0)

    def test_lm_reconstructs_mild_target(self):
        target = ShapeParams(r0=0.75, cos_coeffs=(0.0, 0.08), center=(0.2, 0.0))
        f, g = synth_pair(target)
        config = make_config(mode="lm", basis=BasisSpec(max_mode=3))
        history = reconstruct(config, (f, g), circle((0.0, 0.0), 0.75))
        assert history.final.iteration <= 50
        assert history.final.j_value <= 1e-4 * history.initial.j_value
        assert radial_deviation(history.final.params, target) <= 0.02 * (2 * R)

    def test_frozen_mode_also_converges(self):
        target = ShapeParams(r0=0.75, cos_coeffs=(0.0, 0.08), center=(0.2, 0.0))
        f, g = synth_pair(target)
        config = make_config(mode="frozen", basis=BasisSpec(max_mode=2),
                             freeze_period=4)
        history = reconstruct(config, (f, g), circle((0.0, 0.0), 0.75))
        assert history.final.j_value <= 1e-3 * history.initial.j_value

    def test_accepted_steps_satisfy_armijo(self):
        target = ShapeParams(r0=0.75, cos_coeffs=(0.0, 0.08), center=(0.2, 0.0))
        f, g = synth_pair(target)
        config = make_config(mode="lm", basis=BasisSpec(max_mode=2), max_iter=6)
        history = reconstruct(config, (f, g), circle((0.0, 0.0), 0.7))
        j = history.j_values
        assert np.all(np.diff(j) <= 0)

    def test_incompatible_flux_data_propagates(self):
        f, g = synth_pair(circle((0.0, 0.0), 0.75))
        config = make_config()
        with pytest.raises(IncompatibleDataError, match="Neumann data incompatible"):
            reconstruct(config, (f, g + 0.05), circle((0.0, 0.0), 0.7))

    def test_determinism(self):
        target = ShapeParams(r0=0.75, cos_coeffs=(0.0, 0.08), center=(0.2, 0.0))
        f, g = synth_pair(target)
        config = make_config(mode="lm", basis=BasisSpec(max_mode=2), max_iter=10)
        h1 = reconstruct(config, (f, g), circle((0.0, 0.0), 0.75))
        h2 = reconstruct(config, (f, g), circle((0.0, 0.0), 0.75))
        assert h1.status == h2.status
        np.testing.assert_array_equal(h1.j_values, h2.j_values)
        assert h1.final.params == h2.final.params

    def test_exhausted_backtracking_reports_line_search_failure(self):
        # unreachable tolerances at the exact discrete minimum: J is
        # bitwise zero, no step can decrease it, so the driver must fail
        # loudly and hand back the partial history
        target = circle((0.0, 0.0), 0.75)
        f, g = synth_pair(target)
        config = make_config(mode="descent", basis=BasisSpec(max_mode=1),
                             tol_grad=0.0, tol_j=-1.0, max_iter=4)
        with pytest.raises(LineSearchError, match="line search failed") as info:
            reconstruct(config, (f, g), target)
        history = info.value.history
        assert history.status == "line_search_failed"
        assert history.records[0].j_value == 0.0


class TestRadialDeviation:
    def test_vanishes_for_identical_shapes(self):
        p = ShapeParams(r0=0.7, cos_coeffs=(0.1,), center=(0.2, 0.1))
        assert radial_deviation(p, p) < 1e-14

    def test_radius_offset(self):
        a = circle((0.0, 0.0), 0.8)
        b = circle((0.0, 0.0), 0.75)
        assert radial_deviation(a, b) == pytest.approx(0.05)

    def test_center_offset(self):
        a = circle((0.1, 0.0), 0.75)
        b = circle((0.0, 0.0), 0.75)
        assert radial_deviation(a, b) == pytest.approx(0.1, rel=1e-6)
