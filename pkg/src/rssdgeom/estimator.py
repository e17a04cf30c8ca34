"""Maximum-likelihood source estimation from averaged RSS measurements.

The negative log-likelihood (up to constants) is the weighted squared
residual sum over sensors

    Q(P0, x, y) = sum_i (P_i - P0 + 10*gamma*log10(d_i(x, y)))^2 / var_i.

P0 enters linearly, so it is profiled out in closed form (the weighted mean
of P_i + 10*gamma*log10(d_i)); the horizontal position is found by damped
Gauss-Newton on the profiled residual, optionally restarted from a small grid
of offsets around the initial guess to escape distant local minima.

Profiling P0 also makes the position estimate exactly insensitive to a
constant shift of all measurements, matching the difference-based nature of
the measurement model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SourceParams

_DAMPING_START = 1e-3
_DAMPING_UP = 10.0
_DAMPING_DOWN = 0.1
_STEP_TOL = 1e-8
_MAX_ITERS = 200


@dataclass
class MleResult:
    """Estimated (P0, x, y), final weighted residual norm, and solver status."""

    theta_hat: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int


def _profiled_residual(xy, measurements, pos, inv_std, gamma):
    """Weighted residuals with the optimal P0 substituted, plus that P0."""
    d_sq = (xy[0] - pos[:, 0]) ** 2 + (xy[1] - pos[:, 1]) ** 2 + pos[:, 2] ** 2
    log_term = 5.0 * gamma * np.log10(d_sq)  # 10*gamma*log10(d)
    shifted = measurements + log_term
    wsum = np.sum(inv_std**2)
    p0 = float(np.sum(inv_std**2 * shifted) / wsum)
    res = inv_std * (shifted - p0)
    return res, p0, d_sq


def _jacobian(xy, pos, inv_std, gamma, d_sq):
    """Jacobian of the profiled residuals w.r.t. (x, y)."""
    slope = 10.0 * gamma / math.log(10.0)
    # d(10*gamma*log10 d_i)/dx = slope * (x - x_i) / d_i^2
    raw = np.column_stack(
        [
            slope * (xy[0] - pos[:, 0]) / d_sq,
            slope * (xy[1] - pos[:, 1]) / d_sq,
        ]
    )
    w2 = inv_std**2
    wsum = np.sum(w2)
    mean_row = (w2 @ raw) / wsum
    return inv_std[:, None] * (raw - mean_row[None, :])


def _solve_from(xy0, measurements, pos, inv_std, gamma):
    """Damped Gauss-Newton from one start; returns (xy, cost, converged, iters)."""
    xy = np.asarray(xy0, dtype=float).copy()
    res, _, d_sq = _profiled_residual(xy, measurements, pos, inv_std, gamma)
    cost = float(res @ res)
    damping = _DAMPING_START
    converged = False
    it = 0
    for it in range(1, _MAX_ITERS + 1):
        jac = _jacobian(xy, pos, inv_std, gamma, d_sq)
        grad = jac.T @ res
        hess = jac.T @ jac
        try:
            step = np.linalg.solve(hess + damping * np.eye(2), -grad)
        except np.linalg.LinAlgError:
            break
        trial = xy + step
        if not np.all(np.isfinite(trial)):
            damping *= _DAMPING_UP
            continue
        # reject steps that would land a sensor at zero distance
        t_sq = (trial[0] - pos[:, 0]) ** 2 + (trial[1] - pos[:, 1]) ** 2 + pos[:, 2] ** 2
        if np.any(t_sq <= 0):
            damping *= _DAMPING_UP
            continue
        res_t, _, d_sq_t = _profiled_residual(trial, measurements, pos, inv_std, gamma)
        cost_t = float(res_t @ res_t)
        if cost_t <= cost:
            xy, res, cost, d_sq = trial, res_t, cost_t, d_sq_t
            damping = max(damping * _DAMPING_DOWN, 1e-15)
            if float(np.linalg.norm(step)) < _STEP_TOL:
                converged = True
                break
        else:
            damping *= _DAMPING_UP
            if damping > 1e15:
                break
    return xy, cost, converged, it


def mle_estimate(
    measurements: np.ndarray,
    sensor_positions: np.ndarray,
    sigma_eff: np.ndarray,
    gamma: float,
    init: SourceParams,
    multistart_spread: float = 0.0,
) -> MleResult:
    """Weighted nonlinear least-squares source estimate.

    Args:
        measurements: length-N averaged RSS values (dB).
        sensor_positions: (N, 3) sensor positions (m).
        sigma_eff: length-N noise std of the averaged measurements (dB).
        gamma: path-loss exponent.
        init: initial guess (its position seeds the iteration; its p0 is
            ignored since the power is profiled out).
        multistart_spread: half-width (m) of a 5x5 restart grid of horizontal
            offsets around the init; 0 runs a single start.

    Returns:
        MleResult with theta_hat = (P0_hat, x_hat, y_hat). The residual at
        the estimate never exceeds the residual at the init.
    """
    measurements = np.asarray(measurements, dtype=float)
    pos = np.asarray(sensor_positions, dtype=float)
    sigma_eff = np.asarray(sigma_eff, dtype=float)
    n = len(measurements)
    if pos.shape != (n, 3) or sigma_eff.shape != (n,):
        raise ValueError("inconsistent input dimensions")
    if n < 3:
        raise ValueError(f"need at least 3 sensors to fix 3 unknowns, got {n}")
    if np.any(sigma_eff <= 0):
        raise ValueError("sigma_eff must be positive")
    inv_std = 1.0 / sigma_eff

    starts = [np.asarray(init.position, dtype=float)]
    if multistart_spread > 0:
        offsets = np.linspace(-multistart_spread, multistart_spread, 5)
        for ox in offsets:
            for oy in offsets:
                if ox == 0.0 and oy == 0.0:
                    continue
                starts.append(init.position + np.array([ox, oy]))

    best = None
    any_converged = False
    total_iters = 0
    for s in starts:
        xy, cost, conv, iters = _solve_from(s, measurements, pos, inv_std, gamma)
        total_iters += iters
        any_converged = any_converged or conv
        if best is None or cost < best[1]:
            best = (xy, cost, conv)
    xy, cost, conv = best
    res, p0, _ = _profiled_residual(xy, measurements, pos, inv_std, gamma)
    theta = np.array([p0, xy[0], xy[1]])
    return MleResult(
        theta_hat=theta,
        residual_norm=math.sqrt(cost),
        converged=any_converged and bool(np.all(np.isfinite(theta))),
        iterations=total_iters,
    )
