"""Inclusion reconstruction by descent on the boundary-energy mismatch.

The shape is restricted to a finite-dimensional family: radial Fourier modes
about the inclusion center plus rigid translations. Over that basis the exact
first and second shape derivatives of the criterion are available, so three
schemes share one driver: plain gradient descent, Levenberg-Marquardt with a
mu-scaled identity shift, and a frozen-Newton variant that reuses the Hessian
for several iterations. The mu shift is not an optional tuning knob here: the
shape Hessian is a compact operator, its spectrum accumulates at zero, and an
unshifted Newton step is near-singular as soon as the basis resolves more
than a few modes.

All runs are deterministic: no randomness, no environment dependence, and a
fixed reduction/expansion schedule for both the step length and mu.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateShapeError,
    InadmissibleStepError,
    LineSearchError,
    MarginViolationError,
)
from .geometry import (
    Curve,
    DeformationField,
    ShapeParams,
    build_curve,
    circle,
    radial_field,
    translation_field,
    validate_shape,
)
from .shape_calculus import (
    StateBundle,
    kv_gradient,
    kv_hessian,
    kv_value,
    make_state_bundle,
)
from .transmission import TransmissionSolver

MODES = ("descent", "lm", "frozen")

MIN_STEP_FACTOR = 2.0**-40
MAX_DIRECTION_ATTEMPTS = 30
MU_FLOOR = 1e-14


@dataclass(frozen=True)
class BasisSpec:
    """Finite shape basis: radial fields rho(theta) e_r with
    rho in {1, cos k theta, sin k theta : k <= max_mode}, plus the unit
    translations e_x, e_y when requested.

    Coefficient layout: [r0, a_1..a_K, b_1..b_K, c_x, c_y].
    """

    max_mode: int = 4
    include_translations: bool = True

    def __post_init__(self) -> None:
        if int(self.max_mode) != self.max_mode or self.max_mode < 0:
            raise ValueError(f"max_mode must be an integer >= 0, got {self.max_mode}")
        object.__setattr__(self, "max_mode", int(self.max_mode))

    @property
    def size(self) -> int:
        return 1 + 2 * self.max_mode + (2 if self.include_translations else 0)

    def labels(self) -> list[str]:
        names = ["r0"]
        names += [f"a_{k}" for k in range(1, self.max_mode + 1)]
        names += [f"b_{k}" for k in range(1, self.max_mode + 1)]
        if self.include_translations:
            names += ["c_x", "c_y"]
        return names

    def fields(self, curve: Curve) -> list[DeformationField]:
        """Basis deformation fields sampled on the curve, in layout order."""
        out = [radial_field(curve, np.ones(curve.n))]
        for k in range(1, self.max_mode + 1):
            out.append(radial_field(curve, np.cos(k * curve.theta)))
        for k in range(1, self.max_mode + 1):
            out.append(radial_field(curve, np.sin(k * curve.theta)))
        if self.include_translations:
            out.append(translation_field(curve, (1.0, 0.0)))
            out.append(translation_field(curve, (0.0, 1.0)))
        return out


def assemble_gradient_and_hessian(
    bundle: StateBundle, basis: BasisSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient vector and Hessian matrix of the criterion over the basis."""
    fields = basis.fields(bundle.inner)
    return kv_gradient(bundle, fields), kv_hessian(bundle, fields)


def update_shape(
    params: ShapeParams,
    direction: np.ndarray,
    t: float,
    basis: BasisSpec,
    *,
    outer_radius: float | None = None,
    d0: float = 0.0,
) -> ShapeParams:
    """Transport the shape by t along a basis coefficient direction.

    The basis is constructed so the transport is exact in parameters:
    radial coefficients shift linearly and translations move the center.
    Raises InadmissibleStepError ("step leaves admissible set") when the
    updated shape loses radial positivity or the d0 margin; the caller is
    expected to halve t and retry.
    """
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (basis.size,):
        raise ValueError(
            f"direction has {direction.shape} entries, basis needs {basis.size}"
        )
    if t == 0.0:
        return params
    k = basis.max_mode
    n_cos = max(k, len(params.cos_coeffs))
    n_sin = max(k, len(params.sin_coeffs))
    cos_c = np.zeros(n_cos)
    cos_c[: len(params.cos_coeffs)] = params.cos_coeffs
    cos_c[:k] += t * direction[1 : 1 + k]
    sin_c = np.zeros(n_sin)
    sin_c[: len(params.sin_coeffs)] = params.sin_coeffs
    sin_c[:k] += t * direction[1 + k : 1 + 2 * k]
    center = params.center
    if basis.include_translations:
        center = (center[0] + t * direction[-2], center[1] + t * direction[-1])
    candidate = ShapeParams(
        r0=params.r0 + t * direction[0],
        center=center,
        cos_coeffs=tuple(cos_c),
        sin_coeffs=tuple(sin_c),
    )
    try:
        validate_shape(candidate, outer_radius=outer_radius, d0=d0)
    except (DegenerateShapeError, MarginViolationError) as exc:
        raise InadmissibleStepError(f"step leaves admissible set: {exc}") from exc
    return candidate


def lm_direction(gradient: np.ndarray, hessian: np.ndarray, mu: float) -> np.ndarray:
    """Shifted-Newton direction -(H + mu I)^{-1} g.

    For large mu this tends to the scaled steepest-descent direction, which
    is what makes the mu-escalation loop in the driver safe.
    """
    shifted = hessian + mu * np.eye(hessian.shape[0])
    return -np.linalg.solve(shifted, gradient)


@dataclass(frozen=True)
class IterationRecord:
    """State of the run after an accepted step (iteration 0 is the start)."""

    iteration: int
    params: ShapeParams
    j_value: float
    gradient: np.ndarray
    step: float
    mu: float
    wall_time: float

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.gradient)))


@dataclass
class RunHistory:
    """Accepted iterates of a reconstruction run, oldest first."""

    records: list[IterationRecord] = field(default_factory=list)
    status: str = "running"

    @property
    def initial(self) -> IterationRecord:
        return self.records[0]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    @property
    def j_values(self) -> np.ndarray:
        return np.array([r.j_value for r in self.records])


@dataclass(frozen=True)
class ReconstructionConfig:
    """Everything the reconstruction driver needs besides the data."""

    outer_radius: float
    sigma1: float
    sigma2: float
    d0: float = 0.05
    n_outer: int = 128
    n_inner: int = 128
    mode: str = "lm"
    basis: BasisSpec = BasisSpec()
    max_iter: int = 50
    tol_grad: float = 1e-10
    tol_j: float = 1e-13
    armijo_c: float = 1e-4
    step0: float = 1.0
    mu0: float = 1e-2
    freeze_period: int = 5

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.freeze_period < 1:
            raise ValueError("freeze_period must be >= 1")


def reconstruct(
    config: ReconstructionConfig,
    data: tuple[np.ndarray, np.ndarray],
    initial_shape: ShapeParams,
) -> RunHistory:
    """Minimize the energy mismatch over the basis from an initial shape.

    ``data`` is the measurement pair (f, g) sampled on the outer grid; its
    compatibility (zero flux mean) is enforced by the Neumann solver. Stops
    on gradient norm, objective value, or the iteration cap; a backtracking
    failure raises LineSearchError ("line search failed") with the partial
    history attached as ``exc.history``.
    """
    outer = build_curve(circle((0.0, 0.0), config.outer_radius), config.n_outer)
    f = np.asarray(data[0], dtype=float)
    g = np.asarray(data[1], dtype=float)
    if f.shape != (outer.n,) or g.shape != (outer.n,):
        raise ValueError(
            f"measurement arrays must have shape ({outer.n},) to match n_outer"
        )

    def solve(params: ShapeParams) -> StateBundle:
        inner = build_curve(
            params, config.n_inner, outer_radius=config.outer_radius, d0=config.d0
        )
        solver = TransmissionSolver(outer, inner, config.sigma1, config.sigma2)
        return make_state_bundle(solver, f, g)

    use_hessian = config.mode in ("lm", "frozen")
    start = time.perf_counter()
    mu = config.mu0
    params = initial_shape
    validate_shape(params, outer_radius=config.outer_radius, d0=config.d0)
    bundle = solve(params)
    j_value = kv_value(bundle)
    fields = config.basis.fields(bundle.inner)
    gradient = kv_gradient(bundle, fields)
    hessian = kv_hessian(bundle, fields) if use_hessian else None

    history = RunHistory()
    history.records.append(
        IterationRecord(
            iteration=0,
            params=params,
            j_value=j_value,
            gradient=gradient,
            step=0.0,
            mu=mu,
            wall_time=time.perf_counter() - start,
        )
    )

    def fail(reason: str) -> LineSearchError:
        history.status = "line_search_failed"
        exc = LineSearchError(f"line search failed: {reason}")
        exc.history = history
        return exc

    min_step = config.step0 * MIN_STEP_FACTOR
    for iteration in range(1, config.max_iter + 1):
        if j_value <= config.tol_j:
            history.status = "objective_converged"
            return history
        if np.max(np.abs(gradient)) <= config.tol_grad:
            history.status = "gradient_converged"
            return history

        accepted = None
        for _ in range(MAX_DIRECTION_ATTEMPTS):
            if use_hessian:
                direction = lm_direction(gradient, hessian, mu)
            else:
                direction = -gradient
            slope = float(gradient @ direction)
            if slope >= 0.0:
                # shifted Hessian not positive along g; push toward descent
                mu *= 4.0
                continue
            t = config.step0
            while t >= min_step:
                try:
                    candidate = update_shape(
                        params,
                        direction,
                        t,
                        config.basis,
                        outer_radius=config.outer_radius,
                        d0=config.d0,
                    )
                    candidate_bundle = solve(candidate)
                except InadmissibleStepError:
                    t *= 0.5
                    continue
                candidate_j = kv_value(candidate_bundle)
                if candidate_j <= j_value + config.armijo_c * t * slope:
                    accepted = (candidate, candidate_bundle, candidate_j, t)
                    break
                t *= 0.5
            if accepted is not None:
                break
            if not use_hessian:
                raise fail(
                    f"no decreasing step above {min_step:.3g} at iteration {iteration}"
                )
            mu *= 4.0
        if accepted is None:
            raise fail(f"direction attempts exhausted at iteration {iteration}")

        params, bundle, j_value, step = accepted
        fields = config.basis.fields(bundle.inner)
        gradient = kv_gradient(bundle, fields)
        if config.mode == "lm":
            hessian = kv_hessian(bundle, fields)
            mu = max(mu * 0.5, MU_FLOOR)
        elif config.mode == "frozen":
            if iteration % config.freeze_period == 0:
                hessian = kv_hessian(bundle, fields)
            mu = max(mu * 0.5, MU_FLOOR)
        history.records.append(
            IterationRecord(
                iteration=iteration,
                params=params,
                j_value=j_value,
                gradient=gradient,
                step=step,
                mu=mu,
                wall_time=time.perf_counter() - start,
            )
        )

    history.status = "max_iterations"
    return history


def radial_deviation(
    params: ShapeParams, reference: ShapeParams, samples: int = 2048
) -> float:
    """Worst radial gap between two boundaries, measured about the
    reference center: max over the first curve's samples of the difference
    between their distance to that center and the reference radius at the
    same polar angle."""
    theta = 2.0 * np.pi * np.arange(samples) / samples
    pts = params.points(theta)
    cx, cy = reference.center
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    angles = np.arctan2(dy, dx)
    return float(np.max(np.abs(np.hypot(dx, dy) - reference.radius(angles))))
