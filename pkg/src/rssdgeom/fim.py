"""Fisher information assembly and the spread-angle constraint machinery.

The estimation parameters are theta = (P0, x, y). For Gaussian measurement
noise the FIM is F = Jac.T @ N^-1 @ Jac with Jac = [1, a_x, a_y] per sensor,
where a_x, a_y are the derivatives of the path-loss mean w.r.t. the source
coordinates. The position block of the CRLB factorizes through a reduced
2x2 matrix T = G.T D B D G built from the direction matrix G, the
sensitivity diagonal D = diag(r_i / d_i^2) and a noise-coupling matrix B.

The determinant identity relating both routes is

    det(F) = (10*gamma/ln 10)^4 * (N * mean_inv_var)^3 * det(T)

where mean_inv_var is the average inverse effective variance. Note the cube:
every entry of F carries exactly one factor of the noise inverse-covariance,
so det(F) scales with its third power. (A frequently quoted version of this
identity with a square instead of a cube does not match a direct evaluation
of F; see tests.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Placement,
    Scenario,
    SourceParams,
    Variant,
    direction_to_angle,
    sensor_positions,
    wrap_angle,
)

TWO_PI = 2.0 * math.pi


def loss_slope(gamma: float) -> float:
    """Coefficient 10*gamma/ln(10) converting dB path loss to log-distance."""
    return 10.0 * gamma / math.log(10.0)


@dataclass
class NoiseWeights:
    """Normalized inverse-variance weights and their unnormalized mean.

    w sums to one; mean_inv_var is the average of the inverse effective
    variances (variance of one averaged measurement, sigma_i^2 / m).
    """

    w: np.ndarray
    mean_inv_var: float


def noise_weights(scenario: Scenario) -> NoiseWeights:
    inv_var = 1.0 / scenario.effective_var
    return NoiseWeights(w=inv_var / inv_var.sum(), mean_inv_var=float(inv_var.mean()))


@dataclass
class CouplingMatrix:
    """Noise-coupling matrix B of the reduced information form.

    RSSD (unknown power): B = diag(w) - w w^T, which is PSD and annihilates
    the all-ones vector. RSS (known power): B = diag(w).
    """

    b: np.ndarray
    variant: Variant


def coupling_matrix(weights: NoiseWeights, variant: Variant = Variant.RSSD) -> CouplingMatrix:
    w = weights.w
    if Variant(variant) is Variant.RSSD:
        b = np.diag(w) - np.outer(w, w)
    else:
        b = np.diag(w)
    return CouplingMatrix(b=0.5 * (b + b.T), variant=Variant(variant))


@dataclass
class SensitivityDiag:
    """Diagonal entries r_i / d_i^2 of the range-sensitivity matrix D."""

    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if np.any(self.d <= 0):
            raise ValueError("sensitivity entries must be positive")


def sensitivity_diag(scenario: Scenario) -> SensitivityDiag:
    d = scenario.slant_distances()
    return SensitivityDiag(d=scenario.horiz_dist / d**2)


def t_matrix(g: np.ndarray, d: SensitivityDiag, b: CouplingMatrix) -> np.ndarray:
    """Reduced 2x2 information matrix G.T D B D G (symmetric PSD)."""
    g = np.asarray(g, dtype=float)
    dg = d.d[:, None] * g
    t = dg.T @ b.b @ dg
    return 0.5 * (t + t.T)


@dataclass
class FimSummary:
    """FIM, CRLB and scalar figures of merit for one placement.

    When f is numerically singular (degenerate geometry) crlb holds the
    pseudo-inverse and lb_rmse is +inf with the degenerate flag set.
    """

    f: np.ndarray
    crlb: np.ndarray
    t: np.ndarray
    det_f: float
    lb_rmse: float
    degenerate: bool = False


_DEGENERACY_RCOND = 1e-12


def fim_full(scenario: Scenario, placement: Placement, source: SourceParams) -> FimSummary:
    """Assemble the full 3x3 FIM of a placement, evaluated at a source position.

    Sensor positions are built around the scenario's own source; the FIM is
    evaluated against the supplied source, which may differ (that is how a
    placement designed around a prior estimate is scored against the truth).
    """
    pos = sensor_positions(scenario, placement)
    dx = pos[:, 0] - source.position[0]
    dy = pos[:, 1] - source.position[1]
    r = np.hypot(dx, dy)
    if np.any(r <= 0):
        raise ValueError("a sensor sits directly above the evaluation source")
    d_sq = r**2 + pos[:, 2] ** 2
    slope = loss_slope(scenario.gamma)
    a_x = slope * dx / d_sq
    a_y = slope * dy / d_sq
    jac = np.column_stack([np.ones_like(a_x), a_x, a_y])
    inv_var = 1.0 / scenario.effective_var
    f = jac.T @ (inv_var[:, None] * jac)
    f = 0.5 * (f + f.T)

    weights = noise_weights(scenario)
    b = coupling_matrix(weights, scenario.variant)
    # direction rows [cos, sin] of the angle convention tan(beta) = dx/dy
    g_rel = np.column_stack([dy / r, dx / r])
    t = t_matrix(g_rel, SensitivityDiag(d=r / d_sq), b)

    det_f = float(np.linalg.det(f))
    eigvals = np.linalg.eigvalsh(f)
    degenerate = eigvals[0] <= _DEGENERACY_RCOND * max(eigvals[-1], 0.0)
    if degenerate:
        crlb = np.linalg.pinv(f)
        lb = math.inf
    else:
        crlb = np.linalg.inv(f)
        lb = math.sqrt(crlb[1, 1] + crlb[2, 2])
    return FimSummary(f=f, crlb=crlb, t=t, det_f=det_f, lb_rmse=lb, degenerate=degenerate)


def lb_rmse(f: np.ndarray) -> float:
    """Root of the summed position variances of F^-1; +inf if F is singular."""
    f = np.asarray(f, dtype=float)
    if f.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {f.shape}")
    scale = max(1.0, float(np.max(np.abs(f))))
    if np.max(np.abs(f - f.T)) > 1e-10 * scale:
        raise ValueError("FIM must be symmetric")
    eigvals = np.linalg.eigvalsh(f)
    if eigvals[0] <= _DEGENERACY_RCOND * max(eigvals[-1], 0.0):
        return math.inf
    crlb = np.linalg.inv(f)
    return math.sqrt(crlb[1, 1] + crlb[2, 2])


def apply_orthogonal(placement: Placement, u: np.ndarray) -> Placement:
    """Rotate/reflect every direction row by an orthogonal 2x2 matrix.

    The reduced information determinant (hence the FIM determinant and the
    LB-RMSE) is invariant under this transform.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (2, 2) or np.max(np.abs(u.T @ u - np.eye(2))) > 1e-10:
        raise ValueError("expected an orthogonal 2x2 matrix")
    rotated = placement.directions @ u.T
    return Placement.from_directions(rotated)


@dataclass
class ConstraintBound:
    """Elementwise lower bound g0 equivalent to the spread-angle constraint.

    A unit vector g satisfies g >= g0 exactly when its angle lies in the
    bound's feasible arc: [0, beta_max] itself when beta_max <= pi, and for
    beta_max > pi the rotation-equivalent arc centered on pi/2 (see
    solver_arc_offset).
    """

    g0: np.ndarray
    beta_max: float


def g0_bound(beta_max: float) -> ConstraintBound:
    if not 0.0 < beta_max <= TWO_PI + 1e-12:
        raise ValueError(f"beta_max must lie in (0, 2*pi], got {beta_max!r}")
    beta_max = min(float(beta_max), TWO_PI)
    if beta_max <= math.pi:
        g0 = np.array([math.cos(beta_max), 0.0])
    else:
        g0 = np.array([-1.0, math.cos(beta_max / 2.0)])
    return ConstraintBound(g0=g0, beta_max=beta_max)


def solver_arc_offset(beta_max: float) -> float:
    """Rotation mapping [0, beta_max] onto the vector-bound feasible arc.

    Zero for beta_max <= pi. For beta_max > pi the feasible arc of the vector
    bound is centered on pi/2, so angles are shifted by pi/2 - beta_max/2
    (an overall rotation, which leaves the information determinant unchanged).
    """
    if beta_max <= math.pi:
        return 0.0
    return math.pi / 2.0 - beta_max / 2.0


def in_equivalent_arc(beta: float, beta_max: float, tol: float = 0.0) -> bool:
    """Membership of an angle in the arc described by the vector bound."""
    beta = wrap_angle(beta)
    if beta_max <= math.pi:
        return -tol <= beta <= beta_max + tol or beta >= TWO_PI - tol
    lo = 5.0 * math.pi / 2.0 - beta_max / 2.0
    hi = math.pi / 2.0 + beta_max / 2.0
    return beta <= hi + tol or beta >= lo - tol


@dataclass
class FeasibilityReport:
    """Outcome of a feasibility check with per-row violation details."""

    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def is_feasible(placement: Placement, bound: ConstraintBound, tol: float = 1e-9) -> FeasibilityReport:
    """Check every direction row against the vector bound and unit norm."""
    violations = []
    norms = np.linalg.norm(placement.directions, axis=1)
    for i, (g, norm) in enumerate(zip(placement.directions, norms)):
        if abs(norm - 1.0) > tol:
            violations.append((i, "norm", float(norm)))
        for axis in range(2):
            if g[axis] < bound.g0[axis] - tol:
                violations.append((i, f"coord{axis}", float(g[axis])))
    return FeasibilityReport(ok=not violations, violations=violations)
