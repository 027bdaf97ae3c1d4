"""Tests for the energy-mismatch shape calculus.

The derivative formulas are checked three independent ways: against
closed-form mode arithmetic on concentric circles, against high-order
finite differences of the fully assembled objective on wiggly shapes
(where tangential field components are active), and through Taylor
remainder decay for the states evaluated at fixed interior points.
"""

import numpy as np
import pytest

from kvshape.geometry import (
    DeformationField,
    ShapeParams,
    build_curve,
    circle,
    curve_from_points,
    radial_field,
    translation_field,
)
from kvshape.potential import harmonic_eval
from kvshape.shape_calculus import (
    energy_jump_normal_derivative,
    first_order_jumps,
    kv_gradient,
    kv_hessian,
    kv_value,
    make_state_bundle,
    second_order_jumps,
    state_derivatives,
)
from kvshape.transmission import TransmissionSolver

from oracles import FROZEN, ConcentricSolution, kv_energy_concentric, solve_concentric

R, S1, S2, N = 2.0, 1.0, 5.0, 128
RSTAR = 0.75
GSTAR = FROZEN["g_amplitude"]
JS = S1 - S2

OUTER = build_curve(circle((0.0, 0.0), R), N)


def concentric_bundle(rho, f_amp=1.0, g_amp=GSTAR):
    inner = build_curve(circle((0.0, 0.0), rho), N)
    solver = TransmissionSolver(OUTER, inner, S1, S2)
    f = f_amp * np.cos(OUTER.theta)
    g = g_amp * np.cos(OUTER.theta)
    return make_state_bundle(solver, f, g)


TARGET = ShapeParams(r0=0.75, center=(0.1, -0.05), cos_coeffs=(0.0, 0.1), sin_coeffs=(0.06,))
TRIAL = ShapeParams(r0=0.68, center=(0.0, 0.0), cos_coeffs=(0.05,), sin_coeffs=(0.0, -0.04))
F_DATA = np.cos(OUTER.theta) + 0.3 * np.sin(2 * OUTER.theta)
G_DATA = S1 * TransmissionSolver(OUTER, build_curve(TARGET, N), S1, S2).solve_dirichlet(F_DATA).dnu_outer


def wiggly_bundle(params=TRIAL):
    solver = TransmissionSolver(OUTER, build_curve(params, N), S1, S2)
    return make_state_bundle(solver, F_DATA, G_DATA)


def parameter_field(curve, c0=0.0, cos=(), sin=(), translation=(0.0, 0.0)):
    """Deformation whose straight path keeps shapes inside the radial
    trig-polynomial family: rho(theta) radial part plus a translation."""
    rho = np.full(curve.n, float(c0))
    for k, c in enumerate(cos):
        rho += c * np.cos((k + 1) * curve.theta)
    for k, s in enumerate(sin):
        rho += s * np.sin((k + 1) * curve.theta)
    rad = radial_field(curve, rho)
    tra = translation_field(curve, np.asarray(translation, dtype=float))
    return DeformationField(curve=curve, h_n=rad.h_n + tra.h_n, h_tau=rad.h_tau + tra.h_tau)


def shifted(params, t, c0=0.0, cos=(), sin=(), translation=(0.0, 0.0)):
    """Apply the same perturbation to the parameters: exact family transport."""
    k = max(len(cos), len(sin), len(params.cos_coeffs), len(params.sin_coeffs))
    cos_c = np.zeros(k)
    cos_c[: len(params.cos_coeffs)] = params.cos_coeffs
    cos_c[: len(cos)] += t * np.asarray(cos)
    sin_c = np.zeros(k)
    sin_c[: len(params.sin_coeffs)] = params.sin_coeffs
    sin_c[: len(sin)] += t * np.asarray(sin)
    center = (params.center[0] + t * translation[0], params.center[1] + t * translation[1])
    return ShapeParams(r0=params.r0 + t * c0, center=center,
                       cos_coeffs=tuple(cos_c), sin_coeffs=tuple(sin_c))


def J_at(params):
    solver = TransmissionSolver(OUTER, build_curve(params, N), S1, S2)
    return kv_value(make_state_bundle(solver, F_DATA, G_DATA))


class TestFirstOrderJumps:
    def test_concentric_closed_form(self):
        rho = 0.6
        bundle = concentric_bundle(rho)
        ref = solve_concentric(R, rho, S1, S2, kind="dirichlet", bdata={1: 1.0})
        _, B, C = ref.modes[(1, "cos")]
        theta = bundle.inner.theta
        field = radial_field(bundle.inner, np.cos(theta))
        jumps = first_order_jumps(bundle, field, "dirichlet")
        alpha_exact = (JS / S2) * (B - C / rho**2) * np.cos(theta) ** 2
        beta_exact = -(JS / rho) * (B + C / rho**2) * np.cos(2 * theta)
        np.testing.assert_allclose(jumps.alpha, alpha_exact, atol=1e-11)
        np.testing.assert_allclose(jumps.beta, beta_exact, atol=1e-10)

    def test_tangential_field_gives_zero_jumps(self):
        bundle = wiggly_bundle()
        field = DeformationField(curve=bundle.inner,
                                 h_n=np.zeros(N),
                                 h_tau=np.sin(bundle.inner.theta))
        jumps = first_order_jumps(bundle, field)
        assert np.all(jumps.alpha == 0.0)
        assert np.all(jumps.beta == 0.0)

    def test_flux_jump_is_compatible(self):
        # beta' is an exact arclength derivative, so its integral over
        # the closed interface vanishes identically
        bundle = wiggly_bundle()
        field = parameter_field(bundle.inner, c0=0.2, cos=(0.1,), sin=(0.0, 0.3))
        jumps = first_order_jumps(bundle, field, "neumann")
        assert abs(bundle.inner.integrate(jumps.beta)) < 1e-13

    def test_alpha_consistent_from_either_side(self):
        bundle = wiggly_bundle()
        field = parameter_field(bundle.inner, c0=0.3, cos=(0.2,))
        jumps = first_order_jumps(bundle, field)
        other_side = (JS / S1) * field.h_n * bundle.dirichlet.dnu_minus
        np.testing.assert_allclose(jumps.alpha, other_side, atol=1e-10)


class TestValue:
    def test_concentric_against_oracle(self):
        bundle = concentric_bundle(0.6)
        exact = kv_energy_concentric(R, 0.6, S1, S2, {1: 1.0}, {1: GSTAR})
        assert kv_value(bundle) == pytest.approx(exact, rel=1e-10)

    def test_zero_at_matched_shape(self):
        bundle = concentric_bundle(RSTAR)
        assert abs(kv_value(bundle)) < 1e-12

    def test_positive_off_optimum(self):
        assert kv_value(concentric_bundle(0.55)) > 1e-4
        assert kv_value(wiggly_bundle()) > 1e-4

    def test_constant_shift_invariance(self):
        # adding a constant to the Dirichlet data shifts both states by
        # the same constant (the Neumann gauge follows f), so J is blind
        bundle = wiggly_bundle()
        solver = bundle.solver
        shifted_bundle = make_state_bundle(solver, F_DATA + 3.7, G_DATA)
        assert kv_value(shifted_bundle) == pytest.approx(kv_value(bundle), rel=1e-10)


class TestGradient:
    def fd_slope(self, **pert):
        t = 1e-4
        d1 = (J_at(shifted(TRIAL, t, **pert)) - J_at(shifted(TRIAL, -t, **pert))) / (2 * t)
        d2 = (J_at(shifted(TRIAL, t / 2, **pert)) - J_at(shifted(TRIAL, -t / 2, **pert))) / t
        return (4 * d2 - d1) / 3

    def test_radial_field_matches_fd(self):
        bundle = wiggly_bundle()
        pert = dict(c0=0.3, cos=(0.2,), sin=(-0.1,))
        exact = kv_gradient(bundle, parameter_field(bundle.inner, **pert))
        assert exact == pytest.approx(self.fd_slope(**pert), rel=1e-8)

    def test_translation_field_matches_fd(self):
        bundle = wiggly_bundle()
        pert = dict(translation=(0.25, -0.4))
        exact = kv_gradient(bundle, parameter_field(bundle.inner, **pert))
        assert exact == pytest.approx(self.fd_slope(**pert), rel=1e-8)

    def test_tangential_field_gives_exact_zero(self):
        bundle = wiggly_bundle()
        field = DeformationField(curve=bundle.inner, h_n=np.zeros(N),
                                 h_tau=np.cos(3 * bundle.inner.theta))
        assert kv_gradient(bundle, field) == 0.0

    def test_vector_form(self):
        bundle = wiggly_bundle()
        fields = [parameter_field(bundle.inner, c0=1.0),
                  parameter_field(bundle.inner, translation=(1.0, 0.0))]
        vec = kv_gradient(bundle, fields)
        assert vec.shape == (2,)
        assert vec[0] == pytest.approx(kv_gradient(bundle, fields[0]), abs=1e-15)


class TestEnergyJumpSlope:
    def test_concentric_state_against_oracle(self):
        rho = 0.6
        bundle = concentric_bundle(rho)
        ref = solve_concentric(R, rho, S1, S2, kind="dirichlet", bdata={1: 1.0})
        sol = bundle.dirichlet
        computed = energy_jump_normal_derivative(bundle.inner, S1, S2, sol.u_plus,
                                                 sol.dnu_plus, sol.dnu_minus)
        exact = ref.energy_density_jump_slope(bundle.inner.theta)
        np.testing.assert_allclose(computed, exact, atol=1e-9)

    def test_single_mode_closed_form(self):
        # pure k=1 annulus field: inside part linear, so only the
        # outside contributes; closed form in the mode coefficients
        rho = 0.7
        curve = build_curve(circle((0.0, 0.0), rho), N)
        B, C = 0.8, -0.25
        A = B + C / rho**2  # continuous trace
        sol = ConcentricSolution(R=R, rho=rho, sigma1=S1, sigma2=S2)
        sol.modes[(1, "cos")] = (A, B, C)
        theta = curve.theta
        trace = sol.value(rho, theta, "annulus")
        dn_p = sol.d_r(rho, theta, "annulus")
        dn_m = sol.d_r(rho, theta, "inner")
        computed = energy_jump_normal_derivative(curve, S1, S2, trace, dn_p, dn_m)
        expected = S1 * (4.0 * C / rho**3) * (
            (B - C / rho**2) * np.cos(theta) ** 2 - (B + C / rho**2) * np.sin(theta) ** 2)
        np.testing.assert_allclose(computed, expected, atol=1e-10)


class TestHessian:
    def d2_along(self, **pert):
        t = 2e-3
        vals = [J_at(shifted(TRIAL, k * t, **pert)) for k in (-2, -1, 0, 1, 2)]
        return (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * t * t)

    def test_diagonal_matches_fd(self):
        bundle = wiggly_bundle()
        pert = dict(c0=0.3, cos=(0.2,), sin=(-0.1,))
        h = parameter_field(bundle.inner, **pert)
        exact = kv_hessian(bundle, [h])[0, 0]
        assert exact == pytest.approx(self.d2_along(**pert), rel=1e-6)

    def test_mixed_entry_matches_fd(self):
        bundle = wiggly_bundle()
        p1 = dict(c0=0.3, cos=(0.2,), sin=(-0.1,))
        p2 = dict(translation=(0.25, -0.4))
        h1 = parameter_field(bundle.inner, **p1)
        h2 = parameter_field(bundle.inner, **p2)
        H = kv_hessian(bundle, [h1, h2])
        both = dict(c0=0.3, cos=(0.2,), sin=(-0.1,), translation=(0.25, -0.4))
        mixed_fd = 0.5 * (self.d2_along(**both) - self.d2_along(**p1) - self.d2_along(**p2))
        assert H[0, 1] == pytest.approx(mixed_fd, rel=1e-5)
        assert H[0, 1] == pytest.approx(H[1, 0], rel=1e-13)

    def test_concentric_uniform_against_oracle(self):
        # uniform radial growth of a concentric trial circle: J(rho) is
        # exactly computable, so its second derivative is an oracle
        rho = 0.6
        bundle = concentric_bundle(rho)
        h = parameter_field(bundle.inner, c0=1.0)
        exact = kv_hessian(bundle, [h])[0, 0]
        t = 1e-3
        vals = [kv_energy_concentric(R, rho + k * t, S1, S2, {1: 1.0}, {1: GSTAR})
                for k in (-2, -1, 0, 1, 2)]
        fd = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * t * t)
        assert exact == pytest.approx(fd, rel=1e-7)

    def test_entries_computed_independently_are_symmetric(self):
        # each (i, j) entry is assembled on its own, so agreement of the
        # two triangles probes the symmetry of the formula, not bookkeeping
        bundle = wiggly_bundle()
        fields = [parameter_field(bundle.inner, c0=1.0),
                  parameter_field(bundle.inner, cos=(1.0,)),
                  parameter_field(bundle.inner, translation=(0.0, 1.0))]
        H = kv_hessian(bundle, fields)
        scale = np.max(np.abs(H))
        assert np.max(np.abs(H - H.T)) < 1e-13 * scale


class TestTaylorRemainders:
    ts = np.array([1e-2, 5e-3, 2.5e-3])

    def test_objective_orders(self):
        bundle = wiggly_bundle()
        pert = dict(c0=0.3, cos=(0.2,), sin=(-0.1,), translation=(0.1, 0.05))
        h = parameter_field(bundle.inner, **pert)
        J0 = kv_value(bundle)
        dJ = kv_gradient(bundle, h)
        d2J = kv_hessian(bundle, [h])[0, 0]
        r1, r2 = [], []
        for t in self.ts:
            Jt = J_at(shifted(TRIAL, t, **pert))
            r1.append(abs(Jt - J0 - t * dJ))
            r2.append(abs(Jt - J0 - t * dJ - 0.5 * t * t * d2J))
        slope1 = np.polyfit(np.log(self.ts), np.log(r1), 1)[0]
        slope2 = np.polyfit(np.log(self.ts), np.log(r2), 1)[0]
        assert slope1 == pytest.approx(2.0, abs=0.1)
        assert slope2 == pytest.approx(3.0, abs=0.2)

    def test_state_interior_orders(self):
        # expand the Dirichlet state at fixed interior points: first and
        # second shape derivatives drive the remainder orders
        bundle = wiggly_bundle()
        pert = dict(c0=0.25, cos=(0.15,), sin=(-0.1,))
        h = parameter_field(bundle.inner, **pert)
        deriv = state_derivatives(bundle, h)
        jumps2 = second_order_jumps(bundle, deriv, deriv, "dirichlet")
        second = bundle.solver.solve_dirichlet(np.zeros(N), jumps2)

        pts = np.array([[1.3, 0.4], [-1.1, -0.6], [0.1, 0.15], [-0.2, -0.1]])
        regions = ["annulus", "annulus", "inclusion", "inclusion"]

        def eval_all(sol):
            return np.array([harmonic_eval(reg, sol, p[None, :])[0]
                             for reg, p in zip(regions, pts)])

        u0 = eval_all(bundle.dirichlet)
        u1 = eval_all(deriv.dirichlet)
        u2 = eval_all(second)
        r1, r2 = [], []
        for t in self.ts:
            params_t = shifted(TRIAL, t, **pert)
            solver_t = TransmissionSolver(OUTER, build_curve(params_t, N), S1, S2)
            ut = eval_all(solver_t.solve_dirichlet(F_DATA))
            r1.append(np.max(np.abs(ut - u0 - t * u1)))
            r2.append(np.max(np.abs(ut - u0 - t * u1 - 0.5 * t * t * u2)))
        slope1 = np.polyfit(np.log(self.ts), np.log(r1), 1)[0]
        slope2 = np.polyfit(np.log(self.ts), np.log(r2), 1)[0]
        assert slope1 == pytest.approx(2.0, abs=0.1)
        assert slope2 == pytest.approx(3.0, abs=0.2)

    def test_tangential_path_second_order(self):
        # purely tangential displacement changes the shape only at
        # second order in t, and DJ vanishes exactly
        bundle = wiggly_bundle()
        trial_curve = bundle.inner
        psi = np.cos(2 * trial_curve.theta)
        field = DeformationField(curve=trial_curve, h_n=np.zeros(N), h_tau=psi)
        assert kv_gradient(bundle, field) == 0.0
        J0 = kv_value(bundle)
        diffs = []
        for t in self.ts:
            moved = curve_from_points(trial_curve.nodes + t * field.ambient)
            solver = TransmissionSolver(OUTER, moved, S1, S2)
            diffs.append(abs(kv_value(make_state_bundle(solver, F_DATA, G_DATA)) - J0))
        slope = np.polyfit(np.log(self.ts), np.log(diffs), 1)[0]
        assert slope >= 2.0 - 0.1


class TestCriticalPoint:
    def test_gradient_vanishes_and_positivity_identity(self):
        bundle = concentric_bundle(RSTAR)
        assert abs(kv_value(bundle)) < 1e-12

        theta = bundle.inner.theta
        fields = [radial_field(bundle.inner, np.cos(theta)),
                  radial_field(bundle.inner, np.cos(2 * theta))]
        grad = kv_gradient(bundle, fields)
        assert np.max(np.abs(grad)) < 1e-8

        H = kv_hessian(bundle, fields)
        for i, h in enumerate(fields):
            deriv = state_derivatives(bundle, h)
            un_p = deriv.neumann.u_outer
            dn_ud_p = deriv.dirichlet.dnu_outer
            identity = -2.0 * S1 * OUTER.integrate(un_p * dn_ud_p)
            assert H[i, i] == pytest.approx(identity, rel=1e-8)
            assert H[i, i] > 0.0
