"""Shape-Hessian spectrum at a recovered inclusion.

At a shape where the two auxiliary states coincide, the Hessian of the
energy mismatch collapses: all transport and curvature terms carry the
energy-density jump or the gradient of the criterion, and both vanish. What
remains is a bilinear form in the first-order interface jumps alone,

    M(h1, h2) = 2 ( <v'(h2), beta'(h1)> - sigma1 <alpha'(h1), dn v'(h2)> ),

one Dirichlet-derivative and one Neumann-derivative solve per basis field
and boundary quadratures for every pair. The form acts on normal components
only; tangential parts of the basis fields are ignored structurally, not
approximately.

The matrix is assembled in a Fourier basis of normal fields, scaled to unit
L2 norm on the interface. The continuous operator is compact (it factors
through smooth cross-boundary kernels), so the eigenvalues must collapse
rapidly; the report quantifies that decay with a least-squares exponential
fit. The basis choice fixes the constants in the decay but not its
super-algebraic character.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotCriticalError
from .geometry import Curve, DeformationField
from .shape_calculus import (
    StateBundle,
    first_order_jumps,
    make_state_bundle,
    state_derivatives,
)
from .transmission import TransmissionSolver

NEGATIVITY_FLAG_FACTOR = 1e-10


def fourier_normal_basis(
    curve: Curve, max_mode: int, *, normalized: bool = True
) -> tuple[list[str], list[DeformationField]]:
    """Normal deformation fields cos(k theta), sin(k theta), k = 1..max_mode.

    With ``normalized`` each field is scaled to unit L2 norm on the curve,
    so the assembled matrix is the Galerkin matrix in an L2-orthonormal
    basis (orthogonal on circular interfaces).
    """
    if max_mode < 1:
        raise ValueError(f"max_mode must be >= 1, got {max_mode}")
    labels: list[str] = []
    fields: list[DeformationField] = []
    zero = np.zeros(curve.n)
    for k in range(1, max_mode + 1):
        for name, h_n in ((f"cos {k}t", np.cos(k * curve.theta)),
                          (f"sin {k}t", np.sin(k * curve.theta))):
            if normalized:
                h_n = h_n / np.sqrt(curve.integrate(h_n * h_n))
            labels.append(name)
            fields.append(DeformationField(curve=curve, h_n=h_n, h_tau=zero))
    return labels, fields


def critical_mismatch(bundle: StateBundle) -> float:
    """Relative sup distance between the two states' traces."""
    scale = max(
        float(np.max(np.abs(bundle.f))),
        float(np.max(np.abs(bundle.dirichlet.u_plus))),
        1e-300,
    )
    gap = max(
        float(np.max(np.abs(bundle.dirichlet.u_plus - bundle.neumann.u_plus))),
        float(np.max(np.abs(bundle.neumann.u_outer - bundle.f))),
    )
    return gap / scale


def hessian_from_bundle(
    bundle: StateBundle,
    fields: list[DeformationField],
    *,
    tol: float = 1e-6,
) -> np.ndarray:
    """Critical-point Hessian matrix over the given deformation fields.

    Requires the configuration to be critical: the Dirichlet and Neumann
    states must share their traces to ``tol`` relative, else the collapsed
    formula does not represent the second derivative.
    """
    mismatch = critical_mismatch(bundle)
    if not mismatch <= tol:
        raise NotCriticalError(
            "not a critical configuration: state traces differ by "
            f"{mismatch:.3e} relative (tolerance {tol:.3e}); the collapsed "
            "Hessian formula requires coinciding states"
        )
    sigma1 = bundle.sigma1
    m = len(fields)
    jumps = [first_order_jumps(bundle, h, "dirichlet") for h in fields]
    vprime, dn_vprime = [], []
    for h in fields:
        deriv = state_derivatives(bundle, h)
        vprime.append(deriv.dirichlet.u_plus - deriv.neumann.u_plus)
        dn_vprime.append(deriv.dirichlet.dnu_plus - deriv.neumann.dnu_plus)
    curve = bundle.inner
    matrix = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            matrix[i, j] = 2.0 * (
                curve.integrate(vprime[j] * jumps[i].beta)
                - sigma1 * curve.integrate(jumps[i].alpha * dn_vprime[j])
            )
    return matrix


def hessian_at_critical(
    outer: Curve,
    inner: Curve,
    sigma1: float,
    sigma2: float,
    data: tuple[np.ndarray, np.ndarray],
    max_mode: int,
    *,
    normalized: bool = True,
    tol: float = 1e-6,
) -> tuple[list[str], np.ndarray]:
    """Assemble the critical-point Hessian in the Fourier normal basis.

    ``data`` is the measurement pair (f, g) on the outer grid, which must
    make ``inner`` the recovered shape (coinciding states). Returns the
    basis labels and the matrix.
    """
    solver = TransmissionSolver(outer, inner, sigma1, sigma2)
    bundle = make_state_bundle(solver, data[0], data[1])
    labels, fields = fourier_normal_basis(inner, max_mode, normalized=normalized)
    return labels, hessian_from_bundle(bundle, fields, tol=tol)


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalue summary of a symmetric Hessian matrix."""

    labels: tuple[str, ...]
    eigenvalues: np.ndarray
    decay_slope: float
    decay_intercept: float
    min_eigenvalue: float
    positive: bool

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def spectrum_report(
    matrix: np.ndarray, labels: tuple[str, ...] | None = None
) -> SpectrumReport:
    """Symmetric eigendecomposition with an exponential-decay fit.

    Eigenvalues are sorted descending. The fit regresses log lambda_k on
    the 1-based rank k over the strictly positive eigenvalues; an identity
    matrix fits slope 0, diag(1, q, q^2, ...) fits slope ln q. The report
    flags non-positivity when the smallest eigenvalue drops below
    -1e-10 times the largest.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    scale = float(np.max(np.abs(matrix)))
    if scale > 0 and float(np.max(np.abs(matrix - matrix.T))) > 1e-8 * scale:
        raise ValueError("matrix must be symmetric")
    if labels is None:
        labels = tuple(f"mode {i}" for i in range(1, matrix.shape[0] + 1))
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))[::-1].copy()
    positive_part = eigenvalues[eigenvalues > 0]
    if positive_part.size >= 2:
        ranks = np.arange(1, positive_part.size + 1, dtype=float)
        slope, intercept = np.polyfit(ranks, np.log(positive_part), 1)
    else:
        slope, intercept = 0.0, float(
            np.log(positive_part[0]) if positive_part.size else np.nan
        )
    lam_max = eigenvalues[0]
    lam_min = eigenvalues[-1]
    return SpectrumReport(
        labels=tuple(labels),
        eigenvalues=eigenvalues,
        decay_slope=float(slope),
        decay_intercept=float(intercept),
        min_eigenvalue=float(lam_min),
        positive=bool(lam_min >= -NEGATIVITY_FLAG_FACTOR * lam_max),
    )
