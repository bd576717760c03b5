"""Travelling-wave profile joining the congested state ``v = 1`` to ``v_plus``.

In the wave frame ``xi = x - s t`` the profile solves the autonomous ODE

    v' = s (v_plus - v) v (v - 1)**(gamma + 1) / (eps * gamma),

anchored at ``v(0) = (1 + v_plus) / 2``.  Velocities follow algebraically:
``u = s v_plus + u_plus - s v`` and ``w = u_plus``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidParametersError, ResolutionError, SolverFailure, UnsupportedOrderError
from .model import ModelParams, envelope_constants, phi
from .numerics import Grid, trapz

__all__ = [
    "Profile",
    "BoundReport",
    "ode_rhs",
    "ode_derivatives",
    "solve_profile",
    "profile_derivative",
    "envelope_bounds",
    "global_upper_bound",
    "verify_envelopes",
    "shock_limit_error",
    "weighted_profile_norms",
]

STOP_FRACTION = 1e-12


def ode_rhs(v, params):
    """Right-hand side of the profile ODE as a function of ``v``."""
    e, g, vp, s = params.epsilon, params.gamma, params.v_plus, params.s
    return s * (vp - v) * v * (v - 1) ** (g + 1) / (e * g)


def ode_derivatives(v, params, k):
    """Derivative of order ``k`` (1 to 3) of the profile, as a function of ``v``.

    Writing ``v' = R(v)``, the chain rule gives ``v'' = R' R`` and
    ``v''' = (R'' R + R'^2) R`` with ``R', R''`` differentiated by hand.
    """
    if k not in (1, 2, 3):
        raise UnsupportedOrderError(f"profile derivatives are available for k in 1..3, got {k}")
    v = np.asarray(v, dtype=float)
    e, g, vp, s = params.epsilon, params.gamma, params.v_plus, params.s
    K = s / (e * g)
    m = g + 1
    y = v - 1
    q = (vp - v) * v
    dq = vp - 2 * v
    R = K * q * y**m
    if k == 1:
        return R
    dR = K * (dq * y**m + m * q * y ** (m - 1))
    if k == 2:
        return dR * R
    d2R = K * (-2 * y**m + 2 * m * dq * y ** (m - 1) + m * (m - 1) * q * y ** (m - 2))
    return (d2R * R + dR**2) * R


@dataclass(frozen=True)
class Profile:
    """Grid-sampled travelling wave with its analytic derivatives.

    Attributes
    ----------
    grid : Grid
    params : ModelParams
    v_eps, u_eps, w_eps : ndarray
        Specific volume, velocity and desired velocity on the grid.
    anchor_value : float
        ``(1 + v_plus) / 2``.
    derivatives : tuple of ndarray
        ``(v', v'', v''')`` evaluated from the ODE at the grid nodes.
    evaluator : callable or None
        Dense evaluation ``xi -> v_eps(xi)`` off the grid.
    """

    grid: Grid
    params: ModelParams
    v_eps: np.ndarray
    u_eps: np.ndarray
    w_eps: np.ndarray
    anchor_value: float
    derivatives: tuple
    evaluator: Optional[Callable] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_samples(cls, grid, params, v_eps, derivatives=None):
        """Build a profile from given samples; derivatives default to the ODE values."""
        v_eps = np.asarray(v_eps, dtype=float)
        if derivatives is None:
            derivatives = tuple(ode_derivatives(v_eps, params, k) for k in (1, 2, 3))
        u_eps = params.s * params.v_plus + params.u_plus - params.s * v_eps
        w_eps = u_eps - phi(v_eps, params) * derivatives[0]
        return cls(grid, params, v_eps, u_eps, w_eps, (1 + params.v_plus) / 2, tuple(derivatives))

    def __call__(self, xi):
        if self.evaluator is None:
            return np.interp(xi, self.grid.xi, self.v_eps)
        return self.evaluator(xi)


class _Branch:
    """One direction of integration from the anchor, with an analytic tail past the stop."""

    def __init__(self, params, anchor, end, v0, tail, rtol, atol):
        self.params = params
        self.anchor = anchor
        self.tail = tail
        vp = params.v_plus
        stop = STOP_FRACTION * (vp - 1)
        if tail == "left":
            event = lambda x, y: y[0] - 1 - stop
        else:
            event = lambda x, y: vp - y[0] - stop
        event.terminal = True
        sol = solve_ivp(
            lambda x, y: ode_rhs(y, params), (anchor, end), [v0], method="DOP853",
            rtol=rtol, atol=atol, dense_output=True, events=event,
        )
        if sol.status < 0:
            raise SolverFailure(f"profile integration failed: {sol.message}")
        self.sol = sol.sol
        self.stop_xi = float(sol.t[-1])
        self.stop_v = float(sol.y[0, -1])
        self.stopped = sol.status == 1

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        inside = (xi >= self.stop_xi) if self.tail == "left" else (xi <= self.stop_xi)
        out = np.empty_like(xi)
        if np.any(inside):
            out[inside] = self.sol(xi[inside])[0]
        if np.any(~inside):
            out[~inside] = self._asymptote(xi[~inside])
        return out

    def _asymptote(self, xi):
        p = self.params
        if self.tail == "left":
            # near v = 1: (v - 1)**(-gamma) grows linearly with rate s (v_plus - 1) / eps
            base = (self.stop_v - 1) ** (-p.gamma)
            return 1 + (base - p.s * (p.v_plus - 1) * (xi - self.stop_xi) / p.epsilon) ** (-1 / p.gamma)
        rate = envelope_constants(p).a3 / p.epsilon
        return p.v_plus - (p.v_plus - self.stop_v) * np.exp(-rate * (xi - self.stop_xi))


def solve_profile(params, grid, *, anchor=0.0, rtol=1e-12, atol=1e-12):
    """Integrate the profile ODE from the anchor and sample it on ``grid``.

    Parameters
    ----------
    params : ModelParams
    grid : Grid
    anchor : float
        Location where ``v = (1 + v_plus) / 2``; shifts the wave.
    rtol, atol : float
        Local tolerances of the adaptive Dormand-Prince 8(5,3) integrator.
        At ``1e-10`` the sampled values are already accurate to ``1e-8``,
        but the derivative of the dense output is not; the tighter default
        keeps that below ``1e-8`` as well.

    Returns
    -------
    Profile
    """
    e, g, vp, s = params.epsilon, params.gamma, params.v_plus, params.s
    scale = e * g / (s * vp * (vp - 1) ** (g + 1))
    if not scale > grid.dx / 10:
        raise ResolutionError(
            f"transition length {scale:.3g} is unresolved by dx = {grid.dx:.3g}; refine the grid"
        )
    if not grid.xi_min <= anchor <= grid.xi_max:
        raise InvalidParametersError(f"anchor {anchor} lies outside the grid")
    v0 = (1 + vp) / 2
    left = _Branch(params, anchor, grid.xi_min, v0, "left", rtol, atol) if grid.xi_min < anchor else None
    right = _Branch(params, anchor, grid.xi_max, v0, "right", rtol, atol) if grid.xi_max > anchor else None

    def evaluate(xi):
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.full_like(xi_arr, v0)
        lo, hi = xi_arr < anchor, xi_arr > anchor
        if np.any(lo):
            out[lo] = left(xi_arr[lo]) if left else np.nan
        if np.any(hi):
            out[hi] = right(xi_arr[hi]) if right else np.nan
        return out if np.ndim(xi) else float(out[0])

    v = evaluate(grid.xi)
    if not np.all(np.isfinite(v)):
        raise SolverFailure("profile sampling produced non-finite values")
    base = Profile.from_samples(grid, params, v)
    return Profile(
        base.grid, base.params, base.v_eps, base.u_eps, base.w_eps, base.anchor_value,
        base.derivatives, evaluate,
    )


def profile_derivative(profile, k, at=None):
    """Analytic ``k``-th derivative of the profile.

    Parameters
    ----------
    profile : Profile
    k : int
        Order, 1 to 3.
    at : Grid, optional
        Evaluate on another grid through the dense solution; defaults to the
        profile grid.
    """
    if k not in (1, 2, 3):
        raise UnsupportedOrderError(f"profile derivatives are available for k in 1..3, got {k}")
    if at is None:
        return profile.derivatives[k - 1]
    return ode_derivatives(profile(at.xi), profile.params, k)


@dataclass(frozen=True)
class BoundReport:
    """Worst violations of the envelope bounds (positive means violated)."""

    max_lower_violation: float
    max_upper_violation: float
    region: str
    passed: bool
    worst_xi: float = float("nan")
    details: tuple = ()

    def to_dict(self):
        return {
            "region": self.region,
            "max_lower_violation": self.max_lower_violation,
            "max_upper_violation": self.max_upper_violation,
            "worst_xi": self.worst_xi,
            "pass": self.passed,
            "details": [d.to_dict() for d in self.details],
        }


def envelope_bounds(xi, params):
    """Two-sided envelope: algebraic for ``xi <= 0``, exponential for ``xi > 0``."""
    xi = np.asarray(xi, dtype=float)
    c = envelope_constants(params)
    e, g, vp = params.epsilon, params.gamma, params.v_plus
    xl = np.minimum(xi, 0.0)
    xr = np.maximum(xi, 0.0)
    cong_lo = 1 + (c.b - c.a0 * xl / e) ** (-1 / g)
    cong_hi = 1 + (c.b - c.a1 * xl / e) ** (-1 / g)
    free_lo = vp - 0.5 * (vp - 1) * np.exp(-c.a2 * xr / e)
    free_hi = vp - 0.5 * (vp - 1) * np.exp(-c.a3 * xr / e)
    congested = xi <= 0
    return np.where(congested, cong_lo, free_lo), np.where(congested, cong_hi, free_hi)


def global_upper_bound(xi, params):
    """Upper bound valid on the whole line: algebraic tail left, ``v_plus`` right."""
    xi = np.asarray(xi, dtype=float)
    c = envelope_constants(params)
    left = 1 + (c.b - c.a1 * np.minimum(xi, 0.0) / params.epsilon) ** (-1 / params.gamma)
    return np.where(xi < 0, left, params.v_plus)


def _report(region, lower, upper, v, xi, tol):
    lo = lower - v
    hi = v - upper
    worst = int(np.argmax(np.maximum(lo, hi)))
    lmax, umax = float(np.max(lo)), float(np.max(hi))
    return BoundReport(lmax, umax, region, bool(lmax <= tol and umax <= tol), float(xi[worst]))


def verify_envelopes(profile, constants=None, tol=1e-6):
    """Check the sampled profile against the envelope bounds.

    Returns a global :class:`BoundReport` whose ``details`` hold the
    congested-side, free-side and whole-line checks separately.  The
    ``constants`` argument is accepted for symmetry with the bound formulas;
    when omitted they are derived from the profile parameters.
    """
    params = profile.params
    xi, v = profile.grid.xi, profile.v_eps
    lower, upper = envelope_bounds(xi, params)
    cong, free = xi <= 0, xi >= 0
    parts = (
        _report("congested", lower[cong], upper[cong], v[cong], xi[cong], tol),
        _report("free", lower[free], upper[free], v[free], xi[free], tol),
        _report("global", np.ones_like(v), global_upper_bound(xi, params), v, xi, tol),
    )
    if constants is not None and constants != envelope_constants(params):
        raise InvalidParametersError("envelope constants do not match the profile parameters")
    lmax = max(p.max_lower_violation for p in parts)
    umax = max(p.max_upper_violation for p in parts)
    worst = max(parts, key=lambda p: max(p.max_lower_violation, p.max_upper_violation))
    return BoundReport(lmax, umax, "global", all(p.passed for p in parts), worst.worst_xi, parts)


def shock_limit_error(epsilons, window=5.0, params=None, grid=None):
    """L1 distance on ``[-window, window]`` between the profile and the shock.

    Parameters
    ----------
    epsilons : sequence of float
    window : float
        Half-width ``L``; both ``-L`` and ``L`` must be grid nodes.
    params : ModelParams, optional
        Supplies ``gamma``, ``v_plus`` and the velocities.
    grid : Grid, optional
        Defaults to ``[-10, 20]`` with 6001 nodes.

    Returns
    -------
    list of (float, float)
        ``(eps, error)`` pairs in input order.
    """
    params = params or ModelParams()
    grid = grid or Grid(-10.0, 20.0, 6001)
    xi = grid.xi
    mask = np.abs(xi) <= window + 1e-9 * grid.dx
    sub = xi[mask]
    if abs(sub[0] + window) > 1e-9 * grid.dx or abs(sub[-1] - window) > 1e-9 * grid.dx:
        raise InvalidParametersError("window endpoints must be grid nodes")
    shock = np.where(sub < 0, 1.0, np.where(sub > 0, params.v_plus, (1 + params.v_plus) / 2))
    out = []
    for eps in epsilons:
        prof = solve_profile(params.with_epsilon(eps), grid)
        out.append((float(eps), float(np.trapezoid(np.abs(prof.v_eps[mask] - shock), sub))))
    return out


def weighted_profile_norms(profile):
    """L2 norms of ``sqrt(phi) v'`` and ``sqrt(phi) v'' / (v - 1)`` on the grid."""
    v = profile.v_eps
    ph = phi(v, profile.params)
    d1, d2 = profile.derivatives[0], profile.derivatives[1]
    return (
        float(np.sqrt(trapz(ph * d1**2, profile.grid))),
        float(np.sqrt(trapz(ph * (d2 / (v - 1)) ** 2, profile.grid))),
    )
