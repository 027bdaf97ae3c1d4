"""Boundary-integral solvers for the two-phase transmission problem.

The conductivity is sigma1 outside the inclusion boundary and sigma2
inside; the field may carry prescribed jumps across the interface,

    [u]         = u_plus - u_minus          = alpha,
    [sigma d_n u] = sigma1 q_plus - sigma2 q_minus = beta,

with the outer boundary driven either by a Dirichlet trace f1 or by a
flux g1 = sigma1 d_n u.  Both problems are reduced to second-kind
systems for the plus-side interface trace coupled with the unknown
outer quantity (normal derivative for Dirichlet, trace for Neumann),
using the representation of the field by layer potentials on the two
boundaries.  With mu = (sigma1 - sigma2) / (sigma1 + sigma2) and
S = sigma1 + sigma2 the Dirichlet system reads

    (1/2 I + mu K_w) v+  +  (s1/S) S_{O->w} q_O = rhs_w,
      mu K_{w->O} v+     +  (s1/S) S_O q_O      = rhs_O,

and the Neumann system, whose kernel is exactly the constants, is
squared up with a bordering column and a mean-value constraint row on
the outer boundary.  Interface fluxes are recovered afterwards from the
interior Calderon identity, so the returned solutions carry full Cauchy
data on every boundary.

Operator subscripts follow source -> target: S_{O->w} maps a density on
the outer boundary to values on the inclusion boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .errors import (
    CapacityDegeneracyError,
    DisjointBoundariesError,
    IllConditionedSystemError,
    IncompatibleDataError,
)
from .geometry import Curve
from .potential import assemble_double_layer, assemble_single_layer

RCOND_FLOOR = 1e-12


@dataclass(frozen=True)
class JumpData:
    """Prescribed interface jumps, sampled at the inclusion nodes."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.shape != beta.shape or alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-d arrays of equal length")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @staticmethod
    def zero(n: int) -> "JumpData":
        return JumpData(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class TransmissionSolution:
    """Cauchy data of a transmission field on both boundaries.

    dnu_outer is the plain normal derivative of the exterior-phase field
    on the outer boundary; the physical flux there is sigma1 * dnu_outer.
    Plus/minus refer to the outside/inside limits at the inclusion
    boundary.  The trace layout matches what harmonic_eval expects, so a
    solution can be handed straight to the off-boundary evaluators.
    """

    kind: str
    outer_curve: Curve
    inner_curve: Curve
    sigma1: float
    sigma2: float
    u_outer: np.ndarray
    dnu_outer: np.ndarray
    u_plus: np.ndarray
    dnu_plus: np.ndarray
    u_minus: np.ndarray
    dnu_minus: np.ndarray

    @property
    def curves(self) -> tuple[Curve, Curve]:
        return (self.outer_curve, self.inner_curve)


def _factor_checked(matrix: np.ndarray, on_singular: str):
    """LU-factor with a 1-norm condition estimate.

    on_singular selects the error contract: "system" raises the
    ill-conditioning error, "capacity" the degenerate-single-layer one.
    """
    anorm = np.linalg.norm(matrix, 1)
    lu, piv = lu_factor(matrix)
    (gecon,) = get_lapack_funcs(("gecon",), (matrix,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_FLOOR:
        cond = np.inf if rcond == 0.0 else 1.0 / max(rcond, np.finfo(float).tiny)
        if on_singular == "capacity":
            raise CapacityDegeneracyError(
                "capacity degeneracy: rescale geometry (inclusion single-layer "
                f"operator has condition estimate {cond:.3g})"
            )
        raise IllConditionedSystemError(
            f"integral system ill-conditioned: condition estimate {cond:.3g} "
            f"exceeds {1.0 / RCOND_FLOOR:.0e}"
        )
    return lu, piv


class TransmissionSolver:
    """Factored boundary-integral operators for one geometry.

    Assembles the eight layer matrices once, builds and factors the
    Dirichlet system, the bordered Neumann system and the inclusion
    single-layer (used for flux recovery), and then answers any number
    of solves with different boundary data and interface jumps.  This is
    the object to keep when many solves share a geometry, e.g. the state
    pair plus a family of derivative problems.
    """

    def __init__(self, outer: Curve, inner: Curve, sigma1: float, sigma2: float,
                 *, gauge_row_scale: float = 1.0):
        if not (sigma1 > 0.0 and sigma2 > 0.0 and np.isfinite(sigma1) and np.isfinite(sigma2)):
            raise ValueError("conductivities must be positive finite numbers")
        self.outer = outer
        self.inner = inner
        self.sigma1 = float(sigma1)
        self.sigma2 = float(sigma2)

        self.K_w = assemble_double_layer(inner).matrix
        self.S_w = assemble_single_layer(inner).matrix
        self.K_O = assemble_double_layer(outer).matrix
        self.S_O = assemble_single_layer(outer).matrix
        self.K_Ow = assemble_double_layer(outer, target=inner).matrix
        self.S_Ow = assemble_single_layer(outer, target=inner).matrix
        self.K_wO = assemble_double_layer(inner, target=outer).matrix
        self.S_wO = assemble_single_layer(inner, target=outer).matrix

        self._check_containment()

        s1, s2 = self.sigma1, self.sigma2
        total = s1 + s2
        mu = (s1 - s2) / total
        ni, no = inner.n, outer.n
        self._ni, self._no = ni, no
        eye_i = np.eye(ni)
        eye_o = np.eye(no)

        a_dir = np.block([
            [0.5 * eye_i + mu * self.K_w, (s1 / total) * self.S_Ow],
            [mu * self.K_wO, (s1 / total) * self.S_O],
        ])
        self._lu_dir = _factor_checked(a_dir, "system")

        a_neu = np.zeros((ni + no + 1, ni + no + 1))
        a_neu[:ni, :ni] = 0.5 * eye_i + mu * self.K_w
        a_neu[:ni, ni:ni + no] = -(s1 / total) * self.K_Ow
        a_neu[ni:ni + no, :ni] = mu * self.K_wO
        a_neu[ni:ni + no, ni:ni + no] = (s1 / total) * (0.5 * eye_o - self.K_O)
        # bordering: the homogeneous problem is solved exactly by the
        # constants, so pin the outer mean and absorb any defect of the
        # right-hand side in the auxiliary unknown
        a_neu[:ni + no, -1] = 1.0
        a_neu[-1, ni:ni + no] = gauge_row_scale * outer.weights
        self._lu_neu = _factor_checked(a_neu, "system")
        self._gauge_row_scale = float(gauge_row_scale)

        self._lu_sw = _factor_checked(self.S_w, "capacity")

    def _check_containment(self) -> None:
        # Gauss integral of the outer double layer at the inclusion
        # nodes: 1 inside, 0 outside, in between when the curves cross.
        winding = self.K_Ow @ np.ones(self.K_Ow.shape[1])
        if np.any(np.abs(winding - 1.0) > 0.1):
            raise DisjointBoundariesError(
                "boundaries must be disjoint: inclusion nodes are not strictly "
                "inside the outer boundary"
            )

    # -- right-hand sides -----------------------------------------------------

    def _interface_rhs(self, jumps: JumpData) -> tuple[np.ndarray, np.ndarray]:
        s1, s2 = self.sigma1, self.sigma2
        total = s1 + s2
        alpha, beta = jumps.alpha, jumps.beta
        r_i = (s2 / total) * (0.5 * alpha - self.K_w @ alpha) + (self.S_w @ beta) / total
        r_o = -(s2 / total) * (self.K_wO @ alpha) + (self.S_wO @ beta) / total
        return r_i, r_o

    def _recover_flux(self, v_plus: np.ndarray, jumps: JumpData) -> np.ndarray:
        # interior Calderon identity for the inside trace v_minus:
        #   S_w q_minus = (-1/2 I + K_w) v_minus,
        # then q_plus = (sigma2 q_minus + beta) / sigma1.
        s1, s2 = self.sigma1, self.sigma2
        v_minus = v_plus - jumps.alpha
        rhs = (s2 / s1) * (-0.5 * v_minus + self.K_w @ v_minus) + (self.S_w @ jumps.beta) / s1
        return lu_solve(self._lu_sw, rhs)

    # -- solves ---------------------------------------------------------------

    def solve_dirichlet(self, f1: np.ndarray, jumps: JumpData | None = None) -> TransmissionSolution:
        """Outer trace f1 prescribed; returns full Cauchy data."""
        f1 = np.asarray(f1, dtype=float)
        if f1.shape != (self._no,):
            raise ValueError("f1 must be sampled at the outer curve nodes")
        if jumps is None:
            jumps = JumpData.zero(self._ni)
        s1, s2 = self.sigma1, self.sigma2
        total = s1 + s2
        r_i, r_o = self._interface_rhs(jumps)
        b_i = (s1 / total) * (self.K_Ow @ f1) + r_i
        b_o = (s1 / total) * (-0.5 * f1 + self.K_O @ f1) + r_o
        x = lu_solve(self._lu_dir, np.concatenate([b_i, b_o]))
        v_plus = x[:self._ni]
        q_outer = x[self._ni:]
        q_plus = self._recover_flux(v_plus, jumps)
        return TransmissionSolution(
            kind="dirichlet", outer_curve=self.outer, inner_curve=self.inner,
            sigma1=s1, sigma2=s2,
            u_outer=f1.copy(), dnu_outer=q_outer,
            u_plus=v_plus, dnu_plus=q_plus,
            u_minus=v_plus - jumps.alpha,
            dnu_minus=(s1 * q_plus - jumps.beta) / s2,
        )

    def solve_neumann(self, g1: np.ndarray, jumps: JumpData | None = None,
                      gauge_mean: float = 0.0) -> TransmissionSolution:
        """Outer flux g1 = sigma1 d_n u prescribed.

        The data must balance the interface flux source, i.e. the
        integral of g1 over the outer boundary has to match the integral
        of beta over the interface; gauge_mean fixes the integral of the
        outer trace.
        """
        g1 = np.asarray(g1, dtype=float)
        if g1.shape != (self._no,):
            raise ValueError("g1 must be sampled at the outer curve nodes")
        if jumps is None:
            jumps = JumpData.zero(self._ni)
        total_g = self.outer.integrate(g1)
        total_b = self.inner.integrate(jumps.beta)
        scale = max(1.0, self.outer.integrate(np.abs(g1)), self.inner.integrate(np.abs(jumps.beta)))
        if abs(total_g - total_b) > 1e-8 * scale:
            raise IncompatibleDataError(
                "Neumann data incompatible: outer flux integral "
                f"{total_g:.6g} does not balance the interface source {total_b:.6g}"
            )
        s1, s2 = self.sigma1, self.sigma2
        total = s1 + s2
        r_i, r_o = self._interface_rhs(jumps)
        b_i = -(self.S_Ow @ g1) / total + r_i
        b_o = -(self.S_O @ g1) / total + r_o
        rhs = np.concatenate([b_i, b_o, [self._gauge_row_scale * gauge_mean]])
        x = lu_solve(self._lu_neu, rhs)
        v_plus = x[:self._ni]
        v_outer = x[self._ni:self._ni + self._no]
        q_plus = self._recover_flux(v_plus, jumps)
        return TransmissionSolution(
            kind="neumann", outer_curve=self.outer, inner_curve=self.inner,
            sigma1=s1, sigma2=s2,
            u_outer=v_outer, dnu_outer=g1 / s1,
            u_plus=v_plus, dnu_plus=q_plus,
            u_minus=v_plus - jumps.alpha,
            dnu_minus=(s1 * q_plus - jumps.beta) / s2,
        )

    def solve_states(self, f: np.ndarray, g: np.ndarray) -> tuple[TransmissionSolution, TransmissionSolution]:
        """Jump-free state pair from one experiment's Cauchy data.

        The Dirichlet state uses the trace f, the Neumann state the flux
        g, gauged so both traces share the same outer mean.
        """
        sol_d = self.solve_dirichlet(f)
        gauge = self.outer.integrate(np.asarray(f, dtype=float))
        sol_n = self.solve_neumann(g, gauge_mean=gauge)
        return sol_d, sol_n


def solve_dirichlet(curves: tuple[Curve, Curve], sigma1: float, sigma2: float,
                    f1: np.ndarray, jumps: JumpData | None = None) -> TransmissionSolution:
    outer, inner = curves
    return TransmissionSolver(outer, inner, sigma1, sigma2).solve_dirichlet(f1, jumps)


def solve_neumann(curves: tuple[Curve, Curve], sigma1: float, sigma2: float,
                  g1: np.ndarray, jumps: JumpData | None = None,
                  gauge_mean: float = 0.0) -> TransmissionSolution:
    outer, inner = curves
    return TransmissionSolver(outer, inner, sigma1, sigma2).solve_neumann(g1, jumps, gauge_mean)


def solve_states(curves: tuple[Curve, Curve], sigma1: float, sigma2: float,
                 f: np.ndarray, g: np.ndarray) -> tuple[TransmissionSolution, TransmissionSolution]:
    outer, inner = curves
    return TransmissionSolver(outer, inner, sigma1, sigma2).solve_states(f, g)
