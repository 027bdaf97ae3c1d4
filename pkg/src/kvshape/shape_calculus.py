"""Shape derivatives of the energy-mismatch functional.

The reconstruction target is the Kohn-Vogelius style criterion

    J(w) = int_Omega sigma_w |grad (u_d - u_n)|^2 dx,

where u_d and u_n are the transmission fields driven by the measured
Dirichlet trace f and flux g of the same experiment.  Everything here
reduces to boundary integrals: J itself collapses to an integral over
the outer boundary, the first derivative to an integral of a local
density against the normal velocity on the interface, and the second
derivative to interface integrals over the states and their first-order
shape derivatives.  No second-order transmission solves are needed: the
u'' contribution enters only through its interface jumps, paired with
the state difference by Green's identity.

Perturbation fields enter as DeformationField objects on the interface.
The derivatives computed here are those of t -> J((I + tH)(w)) along
straight displacement paths; for fields satisfying (DH)H = 0 (radial
fields, translations) this coincides with the flow derivative.

Sign conventions: jumps are outside minus inside ([q] = q+ - q-), the
interface normal points out of the inclusion, and js = sigma1 - sigma2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Curve, DeformationField
from .transmission import (
    JumpData,
    TransmissionSolution,
    TransmissionSolver,
)

__all__ = [
    "StateBundle",
    "make_state_bundle",
    "first_order_jumps",
    "solve_state_derivative",
    "DerivativeBundle",
    "state_derivatives",
    "second_order_jumps",
    "kv_value",
    "kv_gradient",
    "energy_jump_normal_derivative",
    "kv_hessian",
]


@dataclass(frozen=True)
class StateBundle:
    """The (u_d, u_n) pair for one measurement on one trial shape."""

    solver: TransmissionSolver
    dirichlet: TransmissionSolution
    neumann: TransmissionSolution
    f: np.ndarray
    g: np.ndarray

    @property
    def outer(self) -> Curve:
        return self.solver.outer

    @property
    def inner(self) -> Curve:
        return self.solver.inner

    @property
    def sigma1(self) -> float:
        return self.solver.sigma1

    @property
    def sigma2(self) -> float:
        return self.solver.sigma2


def make_state_bundle(solver: TransmissionSolver, f: np.ndarray, g: np.ndarray) -> StateBundle:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    sol_d, sol_n = solver.solve_states(f, g)
    return StateBundle(solver=solver, dirichlet=sol_d, neumann=sol_n, f=f, g=g)


def kv_value(bundle: StateBundle) -> float:
    """J(w) via its outer-boundary reduction.

    With v = u_d - u_n jump-free, Green's identity collapses the
    sigma-weighted volume energy to
        J = oint (f - u_n) (sigma1 dn u_d - g) ds
    over the outer boundary.
    """
    mismatch_trace = bundle.f - bundle.neumann.u_outer
    mismatch_flux = bundle.sigma1 * bundle.dirichlet.dnu_outer - bundle.g
    return float(bundle.outer.integrate(mismatch_trace * mismatch_flux))


def first_order_jumps(bundle: StateBundle, field: DeformationField,
                      state: str = "dirichlet") -> JumpData:
    """Interface jumps of the shape derivative of one state.

    Differentiating the transmission conditions along the moving
    interface gives, for a jump-free state u,

        [u']          = -h_n [dn u]       = (js / sigma2) h_n (dn u)+,
        [sigma dn u'] = js d_s(h_n d_s u),

    with js = sigma1 - sigma2.  Only the normal velocity enters;
    tangential fields slide along the interface and produce zero jumps.
    """
    sol = bundle.dirichlet if state == "dirichlet" else bundle.neumann
    js = bundle.sigma1 - bundle.sigma2
    curve = bundle.inner
    alpha = (js / bundle.sigma2) * field.h_n * sol.dnu_plus
    beta = js * curve.d_ds(field.h_n * curve.d_ds(sol.u_plus))
    return JumpData(alpha, beta)


def solve_state_derivative(bundle: StateBundle, field: DeformationField,
                           state: str = "dirichlet") -> TransmissionSolution:
    """Shape derivative of one state: same geometry, jump data from the
    moving interface, homogeneous outer data (the measurement is fixed).
    """
    jumps = first_order_jumps(bundle, field, state)
    if state == "dirichlet":
        return bundle.solver.solve_dirichlet(np.zeros(bundle.outer.n), jumps)
    return bundle.solver.solve_neumann(np.zeros(bundle.outer.n), jumps, gauge_mean=0.0)


@dataclass(frozen=True)
class DerivativeBundle:
    """Shape derivatives of both states for one deformation field."""

    field: DeformationField
    dirichlet: TransmissionSolution
    neumann: TransmissionSolution
    jumps_dirichlet: JumpData
    jumps_neumann: JumpData


def state_derivatives(bundle: StateBundle, field: DeformationField) -> DerivativeBundle:
    jumps_d = first_order_jumps(bundle, field, "dirichlet")
    jumps_n = first_order_jumps(bundle, field, "neumann")
    sol_d = bundle.solver.solve_dirichlet(np.zeros(bundle.outer.n), jumps_d)
    sol_n = bundle.solver.solve_neumann(np.zeros(bundle.outer.n), jumps_n, gauge_mean=0.0)
    return DerivativeBundle(field=field, dirichlet=sol_d, neumann=sol_n,
                            jumps_dirichlet=jumps_d, jumps_neumann=jumps_n)


def kv_gradient(bundle: StateBundle, fields):
    """Directional derivative(s) of J.

    The Hadamard density is local on the interface:

        DJ(h) = -js oint { (s1/s2) ((dn u_d+)^2 - (dn u_n+)^2)
                           + (dt u_d)^2 - (dt u_n)^2 } h_n ds.

    fields may be a single DeformationField (returns a float) or a
    sequence (returns the gradient vector).
    """
    s1, s2 = bundle.sigma1, bundle.sigma2
    js = s1 - s2
    curve = bundle.inner
    sol_d, sol_n = bundle.dirichlet, bundle.neumann
    dt_d = curve.d_ds(sol_d.u_plus)
    dt_n = curve.d_ds(sol_n.u_plus)
    density = -js * ((s1 / s2) * (sol_d.dnu_plus**2 - sol_n.dnu_plus**2)
                     + dt_d**2 - dt_n**2)
    if isinstance(fields, DeformationField):
        return float(curve.integrate(density * fields.h_n))
    return np.array([curve.integrate(density * h.h_n) for h in fields])


def energy_jump_normal_derivative(curve: Curve, sigma1: float, sigma2: float,
                                  u_trace: np.ndarray, dnu_plus: np.ndarray,
                                  dnu_minus: np.ndarray) -> np.ndarray:
    """sigma-weighted jump of the normal derivative of |grad u|^2.

    For a field harmonic on each side with continuous trace, the normal
    derivative of the energy density on one side is

        dn(|grad u|^2) = 2 dn_u (-Lap_t u - kappa dn_u)
                         + 2 dt_u (d_s(dn_u) - kappa dt_u),

    using the surface Laplacian Lap_t = d_s^2 and the curvature kappa
    of the interface.  Returns sigma1 * outside - sigma2 * inside.
    """
    kappa = curve.curvature
    dt_u = curve.d_ds(u_trace)
    lap_t = curve.d_ds(dt_u)

    def one_side(dnu):
        dnn = -lap_t - kappa * dnu
        mixed = curve.d_ds(dnu) - kappa * dt_u
        return 2.0 * dnu * dnn + 2.0 * dt_u * mixed

    return sigma1 * one_side(dnu_plus) - sigma2 * one_side(dnu_minus)


def second_order_jumps(bundle: StateBundle, deriv_1: DerivativeBundle,
                       deriv_2: DerivativeBundle, state: str = "dirichlet") -> JumpData:
    """Interface jumps of the second shape derivative of one state.

    Built from the state and the two first-order derivatives; with
    w12 = kappa h1n h2n - kappa h1t h2t + h1t d_s(h2n) + h2t d_s(h1n),

        alpha'' = w12 [dn u] - h1n [dn u'_2] - h2n [dn u'_1],
        beta''  = d_s( h1n [s dt u'_2] + h2n [s dt u'_1] - w12 [s dt u] ).
    """
    s1, s2 = bundle.sigma1, bundle.sigma2
    curve = bundle.inner
    sol = bundle.dirichlet if state == "dirichlet" else bundle.neumann
    dsol_1 = deriv_1.dirichlet if state == "dirichlet" else deriv_1.neumann
    dsol_2 = deriv_2.dirichlet if state == "dirichlet" else deriv_2.neumann
    h1, h2 = deriv_1.field, deriv_2.field

    kappa = curve.curvature
    w12 = (kappa * h1.h_n * h2.h_n - kappa * h1.h_tau * h2.h_tau
           + h1.h_tau * curve.d_ds(h2.h_n) + h2.h_tau * curve.d_ds(h1.h_n))

    dn_jump_state = sol.dnu_plus - sol.dnu_minus
    dn_jump_1 = dsol_1.dnu_plus - dsol_1.dnu_minus
    dn_jump_2 = dsol_2.dnu_plus - dsol_2.dnu_minus
    alpha = w12 * dn_jump_state - h1.h_n * dn_jump_2 - h2.h_n * dn_jump_1

    def sigma_dt_jump(solution):
        return (s1 * curve.d_ds(solution.u_plus) - s2 * curve.d_ds(solution.u_minus))

    beta = curve.d_ds(h1.h_n * sigma_dt_jump(dsol_2) + h2.h_n * sigma_dt_jump(dsol_1)
                      - w12 * sigma_dt_jump(sol))
    return JumpData(alpha, beta)


def _side_quantities(curve: Curve, sol_d: TransmissionSolution, sol_n: TransmissionSolution):
    """Per-side traces and derivatives of v = u_d - u_n on the interface."""
    return {
        "u_plus": sol_d.u_plus - sol_n.u_plus,
        "u_minus": sol_d.u_minus - sol_n.u_minus,
        "dn_plus": sol_d.dnu_plus - sol_n.dnu_plus,
        "dn_minus": sol_d.dnu_minus - sol_n.dnu_minus,
        "dt_plus": curve.d_ds(sol_d.u_plus) - curve.d_ds(sol_n.u_plus),
        "dt_minus": curve.d_ds(sol_d.u_minus) - curve.d_ds(sol_n.u_minus),
    }


def kv_hessian(bundle: StateBundle, fields: Sequence[DeformationField]) -> np.ndarray:
    """Second-derivative matrix of J over a list of deformation fields.

    D2J(h1, h2) assembles five interface integrals: transport of the
    Hadamard density (T1), its normal derivative (T2), the coupling of
    the state difference with the derivative fields (T3), the energy of
    the derivative differences (T4), and the second-order jump pairing
    that stands in for the u'' solves (T5):

        D2J = T1 - T2 - T3 - T4 + T5.

    Every entry is symmetric in (h1, h2) by construction, so the matrix
    is symmetric up to round-off even though entries are computed
    independently.
    """
    s1, s2 = bundle.sigma1, bundle.sigma2
    curve = bundle.inner
    kappa = curve.curvature
    sol_d, sol_n = bundle.dirichlet, bundle.neumann

    v = _side_quantities(curve, sol_d, sol_n)
    # v is jump-free: common trace and tangential derivative
    v_trace = v["u_plus"]
    dt_v = curve.d_ds(v_trace)
    phi = (s1 * (v["dn_plus"] ** 2 + dt_v**2)
           - s2 * (v["dn_minus"] ** 2 + dt_v**2))
    energy_slope = energy_jump_normal_derivative(curve, s1, s2, v_trace,
                                                 v["dn_plus"], v["dn_minus"])

    derivs = [state_derivatives(bundle, h) for h in fields]
    vprimes = [_side_quantities(curve, d.dirichlet, d.neumann) for d in derivs]
    ds_hn = [curve.d_ds(h.h_n) for h in fields]

    def grad_dot_jump(vp):
        # [sigma grad v . grad v'] with per-side products
        plus = v["dn_plus"] * vp["dn_plus"] + dt_v * vp["dt_plus"]
        minus = v["dn_minus"] * vp["dn_minus"] + dt_v * vp["dt_minus"]
        return s1 * plus - s2 * minus

    coupling = [grad_dot_jump(vp) for vp in vprimes]

    m = len(fields)
    hess = np.empty((m, m))
    for i in range(m):
        hi, di, vpi = fields[i], derivs[i], vprimes[i]
        for j in range(m):
            hj, dj, vpj = fields[j], derivs[j], vprimes[j]

            transport = (hi.h_tau * ds_hn[j] + hj.h_tau * ds_hn[i]
                         - kappa * hi.h_tau * hj.h_tau - kappa * hi.h_n * hj.h_n)
            t1 = curve.integrate(phi * transport)
            t2 = curve.integrate(energy_slope * hi.h_n * hj.h_n)
            t3 = 2.0 * curve.integrate(hi.h_n * coupling[j] + hj.h_n * coupling[i])

            # [sigma (u_d'_j dn v'_i + u_d'_i dn v'_j - dn u_n'_j v'_i
            #         - dn u_n'_i v'_j)], per-side products
            def t4_side(side):
                ud_i = getattr(di.dirichlet, "u_" + side)
                ud_j = getattr(dj.dirichlet, "u_" + side)
                dn_un_i = getattr(di.neumann, "dnu_" + side)
                dn_un_j = getattr(dj.neumann, "dnu_" + side)
                tag = "plus" if side == "plus" else "minus"
                return (ud_j * vpi["dn_" + tag] + ud_i * vpj["dn_" + tag]
                        - dn_un_j * vpi["u_" + tag] - dn_un_i * vpj["u_" + tag])

            t4 = curve.integrate(s1 * t4_side("plus") - s2 * t4_side("minus"))

            a2_d = second_order_jumps(bundle, di, dj, "dirichlet")
            a2_n = second_order_jumps(bundle, di, dj, "neumann")
            t5 = 2.0 * curve.integrate(v_trace * a2_n.beta
                                       - s1 * v["dn_plus"] * a2_d.alpha)

            hess[i, j] = t1 - t2 - t3 - t4 + t5
    return hess
