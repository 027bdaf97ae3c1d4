"""Closed planar curves and the tangential calculus on them.

Curves are radial graphs x(theta) = center + r(theta) e_r(theta), sampled at N
equispaced parameter nodes with all derivatives taken spectrally. Conventions
used throughout the toolkit:

* counter-clockwise parameterization;
* outward unit normal n = (tau_y, -tau_x);
* curvature kappa = cross(x', x'') / |x'|^3, positive on a convex curve, so
  that dn/ds = kappa tau and dtau/ds = -kappa n;
* quadrature weights w_j = |x'(theta_j)| 2 pi / N, spectrally accurate for
  smooth periodic integrands.

Boundary scalars and tangential fields are plain float arrays of length N
sampled at the curve nodes; ambient vector samples have shape (N, 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DegenerateShapeError, MarginViolationError

TWO_PI = 2.0 * np.pi


def fourier_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Differentiate 2 pi periodic samples spectrally.

    Parameters
    ----------
    values : array, shape (..., N)
        Samples on the uniform grid theta_j = 2 pi j / N.
    order : int
        Derivative order, >= 1.

    For odd orders on an even grid the Nyquist mode is annihilated (it has no
    consistent real-valued derivative); this is exact for band-limited data.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    k = np.arange(n // 2 + 1, dtype=float)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(values) * mult, n)


@dataclass(frozen=True)
class ShapeParams:
    """Radial trigonometric parameterization of a closed curve.

    The boundary is x(theta) = center + r(theta) (cos theta, sin theta) with

        r(theta) = r0 + sum_k a_k cos(k theta) + sum_k b_k sin(k theta),

    a_k = cos_coeffs[k-1], b_k = sin_coeffs[k-1]. The radius must stay
    positive; admissibility additionally requires a margin to the outer
    boundary (checked where the ambient domain is known).
    """

    r0: float
    center: tuple[float, float] = (0.0, 0.0)
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "r0", float(self.r0))
        object.__setattr__(
            self, "center", (float(self.center[0]), float(self.center[1]))
        )
        object.__setattr__(
            self, "cos_coeffs", tuple(float(a) for a in self.cos_coeffs)
        )
        object.__setattr__(
            self, "sin_coeffs", tuple(float(b) for b in self.sin_coeffs)
        )

    @property
    def max_mode(self) -> int:
        return max(len(self.cos_coeffs), len(self.sin_coeffs))

    def radius(self, theta: np.ndarray) -> np.ndarray:
        """Sample r(theta)."""
        theta = np.asarray(theta, dtype=float)
        r = np.full(theta.shape, self.r0)
        for k, a in enumerate(self.cos_coeffs, start=1):
            if a != 0.0:
                r += a * np.cos(k * theta)
        for k, b in enumerate(self.sin_coeffs, start=1):
            if b != 0.0:
                r += b * np.sin(k * theta)
        return r

    def points(self, theta: np.ndarray) -> np.ndarray:
        """Sample boundary points, shape (..., 2)."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack(
            (self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)),
            axis=-1,
        )


def circle(center: Sequence[float], radius: float) -> ShapeParams:
    """Shape parameters of a circle."""
    return ShapeParams(r0=radius, center=(center[0], center[1]))


def validate_shape(
    params: ShapeParams,
    *,
    outer_radius: float | None = None,
    d0: float = 0.0,
    samples: int = 512,
) -> None:
    """Check positivity of the radial map and, when the ambient disk is given,
    the d0 margin to the outer boundary. Raises on violation."""
    theta = TWO_PI * np.arange(samples) / samples
    r = params.radius(theta)
    rmin = float(r.min())
    if rmin <= 0.0:
        raise DegenerateShapeError(
            f"degenerate shape: min radius {rmin:.6g} is not positive"
        )
    if outer_radius is not None:
        pts = params.points(theta)
        reach = float(np.hypot(pts[:, 0], pts[:, 1]).max())
        margin = outer_radius - reach
        if margin <= d0:
            raise MarginViolationError(
                f"violates d0 margin: distance to outer boundary {margin:.6g} "
                f"<= d0 = {d0:.6g}"
            )


@dataclass(frozen=True)
class Curve:
    """Discretized closed curve with spectral differential geometry.

    Arrays are read-only and share the node index: ``nodes[j]`` is the point
    at parameter ``theta[j]``, ``weights[j]`` its arclength quadrature weight.
    ``d1`` and ``d2`` are the first and second parameter derivatives of the
    node coordinates.
    """

    theta: np.ndarray
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    speed: np.ndarray
    weights: np.ndarray
    params: ShapeParams | None = None

    @property
    def n(self) -> int:
        return self.theta.size

    @property
    def perimeter(self) -> float:
        return float(self.weights.sum())

    @property
    def mesh_width(self) -> float:
        """Largest node-to-node arclength step (near-boundary guard scale)."""
        return float(self.weights.max())

    def d_ds(self, f: np.ndarray) -> np.ndarray:
        """Arclength derivative of node samples."""
        return fourier_derivative(f) / self.speed

    def integrate(self, f: np.ndarray) -> float:
        """Quadrature of f ds around the curve."""
        return float(np.dot(np.asarray(f, dtype=float), self.weights))


def _freeze(*arrays: np.ndarray) -> tuple[np.ndarray, ...]:
    for a in arrays:
        a.flags.writeable = False
    return arrays


def build_curve(
    params: ShapeParams,
    n_nodes: int,
    *,
    outer_radius: float | None = None,
    d0: float = 0.0,
) -> Curve:
    """Discretize a radial-graph curve at n_nodes equispaced parameters.

    Raises DegenerateShapeError when the radius is not strictly positive,
    MarginViolationError when the curve leaves the admissible band of the
    ambient disk (only checked when outer_radius is supplied), and ValueError
    for an unusable node count.
    """
    if n_nodes < 16 or n_nodes % 2 != 0:
        raise ValueError(f"n_nodes must be an even integer >= 16, got {n_nodes}")
    if params.max_mode >= n_nodes // 2:
        raise ValueError(
            f"n_nodes = {n_nodes} cannot resolve radial mode {params.max_mode}; "
            f"need n_nodes > {2 * params.max_mode}"
        )
    validate_shape(
        params,
        outer_radius=outer_radius,
        d0=d0,
        samples=max(512, 4 * n_nodes),
    )
    theta = TWO_PI * np.arange(n_nodes) / n_nodes
    nodes = params.points(theta)
    return _assemble_curve(theta, nodes, params)


def _assemble_curve(
    theta: np.ndarray, nodes: np.ndarray, params: ShapeParams | None
) -> Curve:
    n = theta.size
    d1 = np.stack(
        (fourier_derivative(nodes[:, 0]), fourier_derivative(nodes[:, 1])), axis=-1
    )
    d2 = np.stack(
        (fourier_derivative(nodes[:, 0], 2), fourier_derivative(nodes[:, 1], 2)),
        axis=-1,
    )
    speed = np.hypot(d1[:, 0], d1[:, 1])
    if not np.all(np.isfinite(speed)) or speed.min() <= 0.0:
        raise DegenerateShapeError(
            "degenerate shape: parameterization speed vanishes at a node"
        )
    tangent = d1 / speed[:, None]
    normal = np.stack((tangent[:, 1], -tangent[:, 0]), axis=-1)
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
    weights = speed * (TWO_PI / n)
    _freeze(theta, nodes, d1, d2, speed, tangent, normal, curvature, weights)
    return Curve(
        theta=theta,
        nodes=nodes,
        d1=d1,
        d2=d2,
        tangent=tangent,
        normal=normal,
        curvature=curvature,
        speed=speed,
        weights=weights,
        params=params,
    )


def curve_from_points(nodes: np.ndarray) -> Curve:
    """Discretize a closed curve given by uniformly parameterized samples.

    The rows are samples x(theta_j) at the equispaced parameters
    theta_j = 2 pi j / n of a smooth counter-clockwise closed curve; all
    derivatives come from the trigonometric interpolant of the coordinates.
    No radial-graph structure is assumed (``params`` is None), which admits
    curves outside the parameter family, e.g. tangentially displaced ones.
    """
    nodes = np.ascontiguousarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise ValueError("nodes must be an array of shape (n, 2)")
    n = nodes.shape[0]
    if n < 16 or n % 2 != 0:
        raise ValueError(f"node count must be an even integer >= 16, got {n}")
    theta = TWO_PI * np.arange(n) / n
    curve = _assemble_curve(theta, nodes, None)
    area = 0.5 * curve.integrate(
        np.einsum("ij,ij->i", curve.nodes, curve.normal)
    )
    if area <= 0.0:
        raise DegenerateShapeError(
            "degenerate shape: curve encloses no area or runs clockwise"
        )
    return curve


@dataclass(frozen=True)
class DeformationField:
    """Deformation of a curve, stored through its normal and tangential
    components h = h_n n + h_tau tau at the nodes."""

    curve: Curve
    h_n: np.ndarray
    h_tau: np.ndarray

    def __post_init__(self) -> None:
        h_n = np.ascontiguousarray(self.h_n, dtype=float)
        h_tau = np.ascontiguousarray(self.h_tau, dtype=float)
        if h_n.shape != (self.curve.n,) or h_tau.shape != (self.curve.n,):
            raise ValueError("component length does not match the curve node count")
        _freeze(h_n, h_tau)
        object.__setattr__(self, "h_n", h_n)
        object.__setattr__(self, "h_tau", h_tau)

    @property
    def ambient(self) -> np.ndarray:
        """Vector samples h_n n + h_tau tau, shape (N, 2)."""
        return (
            self.h_n[:, None] * self.curve.normal
            + self.h_tau[:, None] * self.curve.tangent
        )


def field_from_ambient(curve: Curve, vectors: np.ndarray) -> DeformationField:
    """Split ambient vector samples into (h_n, h_tau) components."""
    vectors = np.asarray(vectors, dtype=float)
    h_n = np.einsum("ij,ij->i", vectors, curve.normal)
    h_tau = np.einsum("ij,ij->i", vectors, curve.tangent)
    return DeformationField(curve=curve, h_n=h_n, h_tau=h_tau)


def radial_field(
    curve: Curve, rho: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]
) -> DeformationField:
    """Radial field rho(theta) e_r(theta) about the curve's own center.

    For a radial-graph curve the parameter is the polar angle about the
    center, so transporting the curve by t along this field keeps it in the
    radial-graph family: r_t = r + t rho.
    """
    rho_values = rho(curve.theta) if callable(rho) else np.asarray(rho, dtype=float)
    e_r = np.stack((np.cos(curve.theta), np.sin(curve.theta)), axis=-1)
    return field_from_ambient(curve, rho_values[:, None] * e_r)


def translation_field(curve: Curve, direction: Sequence[float]) -> DeformationField:
    """Constant deformation field (a rigid translation)."""
    vec = np.broadcast_to(
        np.asarray(direction, dtype=float), (curve.n, 2)
    )
    return field_from_ambient(curve, vec)


def tangential_gradient(curve: Curve, f: np.ndarray) -> np.ndarray:
    """Tangential gradient of a boundary scalar, returned as the scalar
    component df/ds along tau (the full vector is d_ds(f) tau)."""
    return curve.d_ds(np.asarray(f, dtype=float))


def tangential_divergence(curve: Curve, field) -> np.ndarray:
    """Tangential divergence d(v_tau)/ds + kappa v_n.

    ``field`` is either ambient vector samples of shape (N, 2) or a pair
    (v_tau, v_n) of scalar component samples.
    """
    if isinstance(field, (tuple, list)):
        v_tau = np.asarray(field[0], dtype=float)
        v_n = np.asarray(field[1], dtype=float)
    else:
        field = np.asarray(field, dtype=float)
        v_tau = np.einsum("ij,ij->i", field, curve.tangent)
        v_n = np.einsum("ij,ij->i", field, curve.normal)
    return curve.d_ds(v_tau) + curve.curvature * v_n


def laplace_beltrami(curve: Curve, f: np.ndarray) -> np.ndarray:
    """Second arclength derivative d^2 f / ds^2."""
    return curve.d_ds(curve.d_ds(np.asarray(f, dtype=float)))


def normal_derivatives(
    curve: Curve, h: DeformationField
) -> tuple[np.ndarray, np.ndarray]:
    """Material and shape derivatives of the unit normal under h.

    Returns (material, shape) as ambient vector samples:
    material = -(dh_n/ds) tau + kappa h_tau tau and shape = -(dh_n/ds) tau.
    """
    slope = curve.d_ds(h.h_n)
    shape = -slope[:, None] * curve.tangent
    material = shape + (curve.curvature * h.h_tau)[:, None] * curve.tangent
    return material, shape


def boundary_integral(curve: Curve, f: np.ndarray) -> float:
    """Quadrature of f ds around the curve."""
    return curve.integrate(f)


def domain_margin(curve: Curve, outer_radius: float) -> float:
    """Distance from the curve to the boundary of the centered ambient disk."""
    reach = float(np.hypot(curve.nodes[:, 0], curve.nodes[:, 1]).max())
    return outer_radius - reach
