"""Closed-form coefficients of the singular-offset Aw-Rascle system.

In Lagrangian mass coordinates the specific volume ``v`` and the desired
velocity ``w`` obey

    v_t - w_x = (phi(v) v_x)_x,        w_t = 0,

with the singular diffusion coefficient

    phi(v) = eps * gamma / (v * (v - 1)**(gamma + 1)),

which blows up at the maximal packing state ``v = 1``.  The left state of
the travelling wave is fixed at ``v_- = 1``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate

from .errors import DomainError, InvalidParametersError, UnsupportedOrderError

__all__ = [
    "ModelParams",
    "EnvelopeConstants",
    "shock_speed",
    "phi",
    "phi_derivative",
    "psi",
    "psi_difference",
    "h_function",
    "delta_phi",
    "envelope_constants",
]

PSI_ATOL = 1e-12


def shock_speed(params):
    """Speed of the viscous shock joining ``v = 1`` to ``v_plus``.

    Parameters
    ----------
    params : object
        Anything exposing ``u_minus``, ``u_plus`` and ``v_plus``.

    Returns
    -------
    float
        ``(u_minus - u_plus) / (v_plus - 1)``, strictly positive.
    """
    v_plus, u_plus, u_minus = params.v_plus, params.u_plus, params.u_minus
    if not v_plus > 1:
        raise InvalidParametersError(f"v_plus must exceed 1, got {v_plus}")
    if not u_minus > u_plus:
        raise InvalidParametersError(
            f"u_minus must exceed u_plus for a shock, got {u_minus} <= {u_plus}"
        )
    return (u_minus - u_plus) / (v_plus - 1)


@dataclass(frozen=True)
class ModelParams:
    """Physical and asymptotic parameters.

    The shock speed ``s`` is derived from the other fields and is never
    stored independently.
    """

    epsilon: float = 0.1
    gamma: float = 1.0
    v_plus: float = 2.0
    u_plus: float = 0.0
    u_minus: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "gamma", "v_plus", "u_plus", "u_minus"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParametersError(f"{name} must be finite, got {value}")
        if not self.epsilon > 0:
            raise InvalidParametersError(f"epsilon must be positive, got {self.epsilon}")
        if not self.gamma >= 1:
            raise InvalidParametersError(f"gamma must satisfy gamma >= 1, got {self.gamma}")
        shock_speed(self)

    @property
    def s(self):
        return shock_speed(self)

    def with_epsilon(self, epsilon):
        return ModelParams(epsilon, self.gamma, self.v_plus, self.u_plus, self.u_minus)


@dataclass(frozen=True)
class EnvelopeConstants:
    """Rates of the two-sided envelopes of the travelling profile."""

    a0: float
    a1: float
    a2: float
    a3: float
    b: float


def envelope_constants(params):
    """Constants of the congested-side algebraic and free-side exponential envelopes."""
    s, vp, g = params.s, params.v_plus, params.gamma
    return EnvelopeConstants(
        a0=s * (vp - 1) * (vp + 1) / 2,
        a1=s * (vp - 1) / 2,
        a2=s * (vp + 1) * (vp - 1) ** (g + 1) / (2 ** (g + 2) * g),
        a3=s * vp * (vp - 1) ** (g + 1) / g,
        b=(2 / (vp - 1)) ** g,
    )


def _as_checked_array(v, what="v"):
    arr = np.asarray(v, dtype=float)
    if np.any(~(arr > 1)):
        bad = float(np.min(arr)) if arr.size else float("nan")
        raise DomainError(f"{what} must exceed 1 (uncongested), got min {bad}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def phi(v, params):
    """Diffusion coefficient ``eps*gamma / (v (v-1)**(gamma+1))``."""
    x = _as_checked_array(v)
    e, g = params.epsilon, params.gamma
    return _out(e * g / (x * (x - 1) ** (g + 1)), v)


def phi_derivative(v, k, params):
    """Exact derivative of order ``k`` (1 or 2) of :func:`phi`.

    Parameters
    ----------
    v : float or ndarray
        Specific volume, strictly above 1.
    k : int
        Derivative order.
    params : ModelParams

    Returns
    -------
    float or ndarray
    """
    if k not in (1, 2):
        raise UnsupportedOrderError(f"phi derivatives are available for k in (1, 2), got {k}")
    x = _as_checked_array(v)
    e, g = params.epsilon, params.gamma
    m = g + 1
    y = x - 1
    if k == 1:
        out = -e * g * (1 / (x**2 * y**m) + m / (x * y ** (m + 1)))
    else:
        out = e * g * (
            2 / (x**3 * y**m) + 2 * m / (x**2 * y ** (m + 1)) + m * (m + 1) / (x * y ** (m + 2))
        )
    return _out(out, v)


def _psi_gamma1(x, eps):
    return eps * (np.log(x / (x - 1)) - 1 / (x - 1))


def _segment_integral(a, b, params, integrand, epsabs):
    """Integrate ``integrand(a + t (b - a)) * (b - a)`` over ``t`` in [0, 1], vectorised."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))

    def fun(t):
        return integrand(a + t * (b - a)) * (b - a)

    val, _ = integrate.quad_vec(fun, 0.0, 1.0, epsabs=epsabs, epsrel=1e-13, norm="max")
    return val


def psi(v, params):
    """Antiderivative of :func:`phi` normalised by ``psi(v_plus) = 0``.

    The closed form is used for ``gamma = 1``; otherwise adaptive quadrature
    from ``v_plus`` with absolute tolerance ``1e-12``.
    """
    x = _as_checked_array(v)
    if params.gamma == 1:
        out = _psi_gamma1(x, params.epsilon) - _psi_gamma1(np.float64(params.v_plus), params.epsilon)
        return _out(out, v)
    flat = x.ravel()
    val = _segment_integral(
        np.full_like(flat, params.v_plus), flat, params,
        lambda y: params.epsilon * params.gamma / (y * (y - 1) ** (params.gamma + 1)),
        PSI_ATOL,
    )
    return _out(val.reshape(x.shape), v)


def psi_difference(v, v_ref, params):
    """``psi(v) - psi(v_ref)`` evaluated without cancellation.

    For ``gamma = 1`` the closed form is rearranged with ``log1p``; otherwise
    the integral of ``phi`` along the segment is computed with a tolerance
    relative to the local size of ``phi``.
    """
    x = _as_checked_array(v)
    r = _as_checked_array(v_ref, "v_ref")
    x, r = np.broadcast_arrays(x, r)
    d = x - r
    if params.gamma == 1:
        e = params.epsilon
        out = e * (np.log1p(d / r) - np.log1p(d / (r - 1)) + d / ((x - 1) * (r - 1)))
        return _out(out, v)
    g = params.gamma
    scale = np.asarray(phi(r, params))
    val = _segment_integral(
        r.ravel(), x.ravel(), params,
        lambda y: params.epsilon * g / (y * (y - 1) ** (g + 1)) / scale.ravel(),
        1e-13,
    )
    return _out(val.reshape(x.shape) * scale, v)


def h_function(f, v_eps, params):
    """Second-order Taylor remainder of ``psi`` around ``v_eps``.

    ``H(f) = psi(v_eps + f) - psi(v_eps) - phi(v_eps) f``, evaluated through
    the integral form ``f**2 * int_0^1 (1 - t) phi'(v_eps + t f) dt`` so that
    small offsets keep full relative accuracy.
    """
    f_arr = np.asarray(f, dtype=float)
    v = _as_checked_array(v_eps, "v_eps")
    f_arr, v = np.broadcast_arrays(f_arr, v)
    _as_checked_array(v + f_arr, "v_eps + f")
    dphi = np.asarray(phi_derivative(v, 1, params))
    ff, vv, dd = f_arr.ravel(), v.ravel(), dphi.ravel()

    def fun(t):
        return (1 - t) * phi_derivative(vv + t * ff, 1, params) / dd

    val, _ = integrate.quad_vec(fun, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, norm="max")
    out = (ff**2 * dd * val).reshape(v.shape)
    return _out(out, f if np.ndim(f) else v_eps)


def delta_phi(f, v_eps, params):
    """Increment ``phi(v_eps + f) - phi(v_eps)``."""
    f_arr = np.asarray(f, dtype=float)
    v = _as_checked_array(v_eps, "v_eps")
    out = phi(v + f_arr, params) - phi(v, params)
    return _out(np.asarray(out), f if np.ndim(f) else v_eps)
