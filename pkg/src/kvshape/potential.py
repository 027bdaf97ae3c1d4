"""Nystrom discretization of the Laplace layer potentials on closed curves.

The single layer S[phi](x) = int Gamma(x, y) phi(y) ds(y) and double layer
K[phi](x) = int d/dn(y) Gamma(x, y) phi(y) ds(y) use the planar kernel
Gamma(x, y) = ln|x - y| / (2 pi), for which the interior Gauss identity reads
int d/dn(y) Gamma(x, y) ds(y) = 1.

Self-interaction blocks of the single layer are evaluated with the classical
periodic logarithmic quadrature: the kernel is split as

    ln|x(t) - x(s)| = (1/2) ln(4 sin^2((t - s)/2)) + (1/2) ln q(t, s),

where q(t, s) = |x(t) - x(s)|^2 / (4 sin^2((t - s)/2)) is smooth with
q(t, t) = |x'(t)|^2; the log factor gets the exact trigonometric weights and
the smooth factor the trapezoidal rule. The double-layer kernel is continuous
on a smooth curve with diagonal limit kappa(t) |x'(t)| / (4 pi).

All operator matrices fold the quadrature weights in: they map density values
at source nodes to field values at target nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import circulant

from .errors import (
    DisjointBoundariesError,
    NearSingularEvaluationError,
    SingularEvaluationError,
)
from .geometry import TWO_PI, Curve


def newtonian_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gamma(x, y) = ln|x - y| / (2 pi); broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    r2 = np.einsum("...i,...i->...", d, d)
    if np.any(r2 == 0.0):
        raise SingularEvaluationError("singular evaluation: coincident points")
    return np.log(r2) / (4.0 * np.pi)


def normal_kernel(x: np.ndarray, y: np.ndarray, n_y: np.ndarray) -> np.ndarray:
    """d/dn(y) Gamma(x, y) = (y - x) . n_y / (2 pi |x - y|^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_y = np.asarray(n_y, dtype=float)
    d = y - x
    r2 = np.einsum("...i,...i->...", d, d)
    if np.any(r2 == 0.0):
        raise SingularEvaluationError("singular evaluation: coincident points")
    return np.einsum("...i,...i->...", d, n_y) / (TWO_PI * r2)


@dataclass(frozen=True)
class LayerOperator:
    """Dense Nystrom matrix of a layer operator between two curves."""

    source: Curve
    target: Curve
    kind: str
    matrix: np.ndarray

    def apply(self, density: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(density, dtype=float)


def log_quadrature_weights(n: int) -> np.ndarray:
    """Quadrature matrix R for the periodic logarithmic kernel.

    R[i, j] approximates int_0^{2pi} ln(4 sin^2((t_i - s)/2)) f(s) ds through
    sum_j R[i, j] f(s_j); the rule is exact on trigonometric polynomials of
    degree < n/2. Applied to cos(k s) it returns -(2 pi / k) cos(k t), and it
    annihilates constants.
    """
    if n < 4 or n % 2 != 0:
        raise ValueError(f"need an even node count >= 4, got {n}")
    d = TWO_PI * np.arange(n) / n
    m = np.arange(1, n // 2, dtype=float)
    col = -(4.0 * np.pi / n) * (np.cos(np.outer(d, m)) / m).sum(axis=1)
    col -= (4.0 * np.pi / n**2) * np.cos(0.5 * n * d)
    return circulant(col)


def _pairwise_diff(target_pts: np.ndarray, source_pts: np.ndarray) -> np.ndarray:
    """diff[i, j] = source_pts[j] - target_pts[i], shape (nt, ns, 2)."""
    return source_pts[None, :, :] - target_pts[:, None, :]


def _min_distance(a: Curve, b: Curve) -> float:
    diff = _pairwise_diff(a.nodes, b.nodes)
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).min())


def _check_disjoint(source: Curve, target: Curve) -> None:
    gap = _min_distance(source, target)
    scale = max(source.mesh_width, target.mesh_width)
    if gap < scale:
        raise DisjointBoundariesError(
            f"boundaries must be disjoint: node separation {gap:.3g} is below "
            f"the mesh width {scale:.3g}"
        )


def assemble_single_layer(source: Curve, target: Curve | None = None) -> LayerOperator:
    """Single-layer matrix; source and target may be the same curve."""
    if target is None or target is source:
        n = source.n
        diff = _pairwise_diff(source.nodes, source.nodes)
        dist2 = np.einsum("ijk,ijk->ij", diff, diff)
        half = 0.5 * (source.theta[:, None] - source.theta[None, :])
        sin2 = 4.0 * np.sin(half) ** 2
        q = np.empty_like(dist2)
        off = ~np.eye(n, dtype=bool)
        q[off] = dist2[off] / sin2[off]
        q[np.eye(n, dtype=bool)] = source.speed**2
        matrix = (log_quadrature_weights(n) + (TWO_PI / n) * np.log(q)) / (
            4.0 * np.pi
        )
        matrix = matrix * source.speed[None, :]
        return LayerOperator(source=source, target=source, kind="single", matrix=matrix)
    _check_disjoint(source, target)
    diff = _pairwise_diff(target.nodes, source.nodes)
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    matrix = np.log(dist2) / (4.0 * np.pi) * source.weights[None, :]
    return LayerOperator(source=source, target=target, kind="single", matrix=matrix)


def assemble_double_layer(
    source: Curve, target: Curve | None = None, adjoint: bool = False
) -> LayerOperator:
    """Double-layer matrix (kernel d/dn(y) Gamma, or d/dn(x) for the adjoint)."""
    kind = "double-adjoint" if adjoint else "double"
    if target is None or target is source:
        n = source.n
        diff = _pairwise_diff(source.nodes, source.nodes)
        dist2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(dist2, 1.0)
        if adjoint:
            numer = -np.einsum("ijk,ik->ij", diff, source.normal)
        else:
            numer = np.einsum("ijk,jk->ij", diff, source.normal)
        kernel = numer / (TWO_PI * dist2)
        np.fill_diagonal(kernel, source.curvature / (4.0 * np.pi))
        matrix = kernel * source.weights[None, :]
        return LayerOperator(source=source, target=source, kind=kind, matrix=matrix)
    _check_disjoint(source, target)
    diff = _pairwise_diff(target.nodes, source.nodes)
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    if adjoint:
        numer = -np.einsum("ijk,ik->ij", diff, target.normal)
    else:
        numer = np.einsum("ijk,jk->ij", diff, source.normal)
    matrix = numer / (TWO_PI * dist2) * source.weights[None, :]
    return LayerOperator(source=source, target=target, kind=kind, matrix=matrix)


def _eval_layers(
    points: np.ndarray, curve: Curve, trace: np.ndarray, flux: np.ndarray
) -> np.ndarray:
    """K[trace](points) - S[flux](points) by plain quadrature."""
    diff = curve.nodes[None, :, :] - points[:, None, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    double = np.einsum("ijk,jk->ij", diff, curve.normal) / (TWO_PI * dist2)
    single = np.log(dist2) / (4.0 * np.pi)
    w = curve.weights
    return (double * w[None, :]) @ trace - (single * w[None, :]) @ flux


def _eval_layer_gradients(
    points: np.ndarray, curve: Curve, trace: np.ndarray, flux: np.ndarray
) -> np.ndarray:
    """Gradient in the evaluation point of K[trace] - S[flux]."""
    diff = curve.nodes[None, :, :] - points[:, None, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    dn = np.einsum("ijk,jk->ij", diff, curve.normal)
    # grad_x of (y - x) . n_y / (2 pi |y - x|^2)
    grad_double = (
        -curve.normal[None, :, :] * dist2[:, :, None]
        + 2.0 * dn[:, :, None] * diff
    ) / (TWO_PI * dist2[:, :, None] ** 2)
    # grad_x of ln|y - x| / (2 pi)
    grad_single = -diff / (TWO_PI * dist2[:, :, None])
    w = curve.weights[None, :, None]
    return np.einsum(
        "ijk,j->ik", grad_double * w, trace
    ) - np.einsum("ijk,j->ik", grad_single * w, flux)


def _guard_points(points: np.ndarray, curves: tuple[Curve, ...]) -> None:
    for curve in curves:
        diff = curve.nodes[None, :, :] - points[:, None, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).min(axis=1)
        limit = curve.mesh_width
        if np.any(dist <= limit):
            worst = float(dist.min())
            raise NearSingularEvaluationError(
                f"near-singular evaluation refused: point at distance "
                f"{worst:.3g} from a boundary (mesh width {limit:.3g})"
            )


def _region_terms(region: str, traces):
    if region == "annulus":
        return (
            (traces.outer_curve, traces.u_outer, traces.dnu_outer, 1.0),
            (traces.inner_curve, traces.u_plus, traces.dnu_plus, -1.0),
        )
    if region == "inclusion":
        return ((traces.inner_curve, traces.u_minus, traces.dnu_minus, 1.0),)
    raise ValueError(f"unknown region {region!r}; expected 'annulus' or 'inclusion'")


def harmonic_eval(
    region: str, traces, points: np.ndarray, *, guard: bool = True
) -> np.ndarray:
    """Evaluate a harmonic field from its boundary traces at interior points.

    ``region`` selects the Green representation: ``"annulus"`` combines both
    boundaries of the outer region, ``"inclusion"`` uses the inner traces
    only. ``traces`` is any object exposing the trace arrays and curves of a
    transmission solution. Points must stay more than one mesh width away
    from every involved boundary; closer requests are refused rather than
    silently evaluated with an inaccurate quadrature.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    terms = _region_terms(region, traces)
    if guard:
        _guard_points(points, tuple(t[0] for t in terms))
    value = np.zeros(points.shape[0])
    for curve, trace, flux, sign in terms:
        value += sign * _eval_layers(points, curve, np.asarray(trace, float), np.asarray(flux, float))
    return value


def harmonic_gradient(
    region: str, traces, points: np.ndarray, *, guard: bool = True
) -> np.ndarray:
    """Gradient of the field evaluated by harmonic_eval, shape (M, 2)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    terms = _region_terms(region, traces)
    if guard:
        _guard_points(points, tuple(t[0] for t in terms))
    grad = np.zeros((points.shape[0], 2))
    for curve, trace, flux, sign in terms:
        grad += sign * _eval_layer_gradients(
            points, curve, np.asarray(trace, float), np.asarray(flux, float)
        )
    return grad
