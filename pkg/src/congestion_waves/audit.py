"""Numerical audits of the a-priori bounds on the profile, ``H`` and the linear operators.

Each audit builds both sides of an inequality on the grid, fits the smallest
constant that makes it hold, and repeats the fit on a twice finer grid.  A
report passes when the constant is finite and the fine/base ratio lies in
``[0.8, 1.25]``.

Families of test functions are laid out in the stretched variable ``xi/eps``
so that the fitted constants can be compared across ``eps``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, InvalidParametersError, SizeMismatchError
from .model import phi, phi_derivative
from .numerics import diff1, diff2, trapz
from .profile import Profile, profile_derivative, solve_profile

__all__ = [
    "AuditReport",
    "FMember",
    "EtaMember",
    "DENOMINATOR_FLOOR",
    "REFINEMENT_RANGE",
    "audit_veps_derivatives",
    "audit_psi_estimate",
    "audit_h_bounds",
    "audit_linear_operator_bounds",
    "default_f_family",
    "default_eta_family",
    "h_derivatives",
    "operator_coefficients",
    "l_eps_apply",
    "c_eps_apply",
    "l_eps_quadratic_split",
]

DENOMINATOR_FLOOR = 1e-14
REFINEMENT_RANGE = (0.8, 1.25)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_T = 0.5 * (_GL_NODES + 1)
_GL_W = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one fitted inequality."""

    lemma_id: str
    fitted_constant: float
    refinement_ratio: float
    passed: bool
    worst_point: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lemma_id": self.lemma_id,
            "fitted_constant": self.fitted_constant,
            "refinement_ratio": self.refinement_ratio,
            "pass": self.passed,
            "worst_point": dict(self.worst_point),
        }


def _report(lemma_id, base, fine, worst):
    c0, c1 = base, fine
    if c0 == 0 and c1 == 0:
        ratio = 1.0
    elif c0 == 0 or not np.isfinite(c0):
        ratio = float("inf")
    else:
        ratio = c1 / c0
    lo, hi = REFINEMENT_RANGE
    ok = bool(np.isfinite(c0) and lo <= ratio <= hi)
    return AuditReport(lemma_id, float(c0), float(ratio), ok, worst)


def _refine(profile):
    fine = profile.grid.refined(2)
    if profile.evaluator is not None:
        return solve_profile(profile.params, fine)
    return Profile.from_samples(fine, profile.params, profile(fine.xi))


def _masked_sup(num, den):
    """Max of ``num/den`` over entries with ``den >= DENOMINATOR_FLOOR``; returns (value, index)."""
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    ok = den >= DENOMINATOR_FLOOR
    if not np.any(ok):
        return 0.0, -1
    r = np.where(ok, num / np.where(ok, den, 1.0), -np.inf)
    i = int(np.argmax(r))
    return float(r[i]), i


# ---------------------------------------------------------------- profile and psi


def _veps_ratio(profile, params, k):
    v = profile.v_eps
    return np.abs(profile_derivative(profile, k)) * params.epsilon**k / (v - 1) ** (k * params.gamma + 1)


def audit_veps_derivatives(profile, params, k_max=3):
    """Fit ``C_k = sup |d^k v_eps| eps^k / (v_eps - 1)^(k gamma + 1)`` for ``k = 1..k_max``."""
    if not 1 <= k_max <= 3:
        raise InvalidParametersError(f"k_max must lie in 1..3, got {k_max}")
    fine = _refine(profile)
    out = []
    for k in range(1, k_max + 1):
        r0 = _veps_ratio(profile, params, k)
        r1 = _veps_ratio(fine, params, k)
        i = int(np.argmax(r0))
        worst = {"xi": float(profile.grid.xi[i]), "v_eps": float(profile.v_eps[i]), "ratio": float(r0[i])}
        out.append(_report(f"veps-derivative-{k}", float(r0.max()), float(r1.max()), worst))
    return out


def _psi_ratio(y, params, k):
    v = 1 + y
    dpsi = phi(v, params) if k == 1 else phi_derivative(v, 1, params)
    return np.abs(dpsi) * y ** (params.gamma + k) / params.epsilon


def audit_psi_estimate(params, v_bar=None, n=2000, y_min=1e-8):
    """Fit ``sup |psi^(k)(v)| (v - 1)^(gamma + k) / eps`` over ``v in (1, v_bar)``, ``k = 1, 2``.

    The sample is log-spaced in ``v - 1`` from ``y_min``; refinement doubles it.
    """
    v_bar = params.v_plus if v_bar is None else v_bar
    if not v_bar > 1:
        raise InvalidParametersError(f"v_bar must exceed 1, got {v_bar}")
    out = []
    for k in (1, 2):
        ys = [np.geomspace(y_min, v_bar - 1, m) for m in (n, 2 * n - 1)]
        r0, r1 = (_psi_ratio(y, params, k) for y in ys)
        i = int(np.argmax(r0))
        worst = {"v": float(1 + ys[0][i]), "ratio": float(r0[i])}
        out.append(_report(f"psi-derivative-{k}", float(r0.max()), float(r1.max()), worst))
    return out


# ---------------------------------------------------------------- H bounds


@dataclass(frozen=True)
class FMember:
    """Admissible offset ``f = theta (v_eps - 1) g(xi/eps)`` with ``max |g| = 1``.

    ``kind`` is ``"gaussian"``, ``"dipole"`` or ``"constant"``; ``center`` and
    ``width`` are in units of ``xi/eps``.
    """

    theta: float
    kind: str = "gaussian"
    center: float = 0.0
    width: float = 3.0

    def shape(self, xi, eps):
        """``g, g', g''`` as functions of ``xi``."""
        z = (xi / eps - self.center) / self.width
        c = 1 / (eps * self.width)
        if self.kind == "constant":
            one = np.ones_like(xi)
            return one, 0 * one, 0 * one
        e = np.exp(-(z**2))
        if self.kind == "gaussian":
            return e, -2 * z * e * c, (4 * z**2 - 2) * e * c**2
        if self.kind == "dipole":
            k = np.sqrt(2 * np.e)
            return k * z * e, k * (1 - 2 * z**2) * e * c, k * (4 * z**3 - 6 * z) * e * c**2
        raise InvalidParametersError(f"unknown f shape {self.kind!r}")

    def evaluate(self, profile):
        """``f, f', f''`` on the profile grid."""
        xi, eps = profile.grid.xi, profile.params.epsilon
        y = profile.v_eps - 1
        d1, d2 = profile.derivatives[0], profile.derivatives[1]
        g, g1, g2 = self.shape(xi, eps)
        t = self.theta
        return t * y * g, t * (d1 * g + y * g1), t * (d2 * g + 2 * d1 * g1 + y * g2)


def default_f_family(delta=0.5):
    """Gaussians, dipoles and a flat member at relative size ``delta`` and ``delta/2``, both signs."""
    members = []
    for theta in (delta, -delta, 0.5 * delta):
        members += [FMember(theta, "gaussian", c) for c in (-20.0, -5.0, 0.0, 5.0)]
        members += [FMember(theta, "dipole", c) for c in (-5.0, 0.0)]
        members.append(FMember(theta, "constant"))
    return members


def _remainder(fun, v, f):
    # f * int_0^1 (fun(v + t f) - fun(v)) dt by Gauss-Legendre; the integrand
    # is smooth since |f| < v - 1
    base = fun(v)
    acc = np.zeros_like(v)
    for t, w in zip(_GL_T, _GL_W):
        acc += w * (fun(v + t * f) - base)
    return f * acc


def h_derivatives(f, df, d2f, profile, params):
    """``H(f)``, ``d_xi H(f)`` and ``d_xi^2 H(f)`` from the chain rule.

    Differences of ``phi`` are written as integral remainders so that small
    offsets keep their relative accuracy.
    """
    v = profile.v_eps
    v1, v2 = profile.derivatives[0], profile.derivatives[1]
    p0 = lambda x: phi(x, params)
    p1 = lambda x: phi_derivative(x, 1, params)
    p2 = lambda x: phi_derivative(x, 2, params)
    # H = f^2 int (1-t) phi'(v + t f): weight (1 - t) folded into the rule
    H = f**2 * sum(w * (1 - t) * p1(v + t * f) for t, w in zip(_GL_T, _GL_W))
    d0 = p0(v + f) - p0(v)
    d1 = _remainder(p1, v, f)
    e1 = p1(v + f) - p1(v)
    e2 = _remainder(p2, v, f)
    dH = d1 * v1 + d0 * df
    dd1 = e2 * v1 + e1 * df
    dd0 = e1 * v1 + p1(v + f) * df
    d2H = dd1 * v1 + d1 * v2 + dd0 * df + d0 * d2f
    return H, dH, d2H


def _h_ratios(profile, params, member, delta):
    f, df, d2f = member.evaluate(profile)
    y = profile.v_eps - 1
    rel = float(np.max(np.abs(f / y)))
    if rel > delta * (1 + 1e-12):
        raise AdmissibilityError(f"|f/(v_eps - 1)| reaches {rel:.6g} > delta = {delta}")
    eps, g = params.epsilon, params.gamma
    H, dH, d2H = h_derivatives(f, df, d2f, profile, params)
    dens = (
        eps * f**2 / y ** (g + 2),
        f**2 / y**2 + eps * np.abs(f * df) / y ** (g + 2),
        y ** (g - 2) * f**2 / eps + eps * (np.abs(f * d2f) + df**2) / y ** (g + 2),
    )
    return [(np.abs(n), d) for n, d in zip((H, dH, d2H), dens)]


def audit_h_bounds(profile, params, f_family=None, delta=0.5):
    """Fit the constants of the three ``H`` bounds over a family of admissible offsets.

    Returns three reports, ``"H"``, ``"dxH"`` and ``"dx2H"``; each constant is
    the sup of the left side divided by the unit-weight sum of the right-side
    terms.  Members with ``f == 0`` contribute nothing.
    """
    if not 0 < delta < 1:
        raise InvalidParametersError(f"delta must lie in (0, 1), got {delta}")
    family = default_f_family(delta) if f_family is None else list(f_family)
    fine = _refine(profile)
    best = [[0.0, 0.0, {}] for _ in range(3)]
    for idx, m in enumerate(family):
        for level, prof in enumerate((profile, fine)):
            for j, (num, den) in enumerate(_h_ratios(prof, params, m, delta)):
                c, i = _masked_sup(num, den)
                if c > best[j][level]:
                    best[j][level] = c
                    if level == 0:
                        best[j][2] = {"xi": float(prof.grid.xi[i]), "member": idx, "ratio": c}
    return [_report(name, b[0], b[1], b[2]) for name, b in zip(("H", "dxH", "dx2H"), best)]


# ---------------------------------------------------------------- linear operators


def operator_coefficients(profile, params):
    """Coefficients of the linearised operators and their analytic derivatives.

    ``a1 = v'/(v-1)``, ``a2 = phi v'/(v-1)``, ``a3 = a1 a2`` and
    ``a4 = phi'(v) v' (v-1)``, all at ``v = v_eps``; keys ``da1..da4`` hold
    the ``xi``-derivatives.
    """
    v = profile.v_eps
    y = v - 1
    v1, v2 = profile.derivatives[0], profile.derivatives[1]
    p0 = phi(v, params)
    p1 = phi_derivative(v, 1, params)
    p2 = phi_derivative(v, 2, params)
    a1 = v1 / y
    a2 = p0 * v1 / y
    return {
        "y": y, "v1": v1, "phi": p0, "dphi": p1 * v1,
        "a1": a1, "a2": a2, "a3": a1 * a2, "a4": p1 * v1 * y,
        "da1": v2 / y - v1**2 / y**2,
        "da2": (p1 * v1**2 + p0 * v2) / y - p0 * v1**2 / y**2,
        "da3": p1 * v1**3 / y**2 + 2 * p0 * v1 * v2 / y**2 - 2 * p0 * v1**3 / y**3,
        "da4": p2 * v1**2 * y + p1 * v2 * y + p1 * v1**2,
    }


def _check_eta(eta, profile):
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (profile.grid.n,):
        raise SizeMismatchError(f"eta has shape {eta.shape}, grid has {profile.grid.n} nodes")
    return eta


def l_eps_apply(eta, profile, params, coeffs=None):
    """Linearised operator acting on the weighted unknown ``eta``.

    ``s a1 eta + a2 (eta' + a1 eta) + (a2 eta)' + (a4 eta)' / (v_eps - 1)``
    with the outer derivatives taken by :func:`~congestion_waves.numerics.diff1`.
    """
    eta = _check_eta(eta, profile)
    c = operator_coefficients(profile, params) if coeffs is None else coeffs
    g = profile.grid
    return (
        params.s * c["a1"] * eta
        + c["a2"] * diff1(eta, g)
        + c["a3"] * eta
        + diff1(c["a2"] * eta, g)
        + diff1(c["a4"] * eta, g) / c["y"]
    )


def c_eps_apply(eta, profile, params, coeffs=None):
    """Commutator operator of the differentiated ``eta`` equation.

    ``(phi_eps' eta')'`` plus the commutator of ``d_xi`` with
    :func:`l_eps_apply`, expanded into six terms with analytic coefficient
    derivatives.
    """
    eta = _check_eta(eta, profile)
    c = operator_coefficients(profile, params) if coeffs is None else coeffs
    g = profile.grid
    deta = diff1(eta, g)
    return (
        diff1(c["dphi"] * deta, g)
        + params.s * c["da1"] * eta
        + c["da2"] * deta
        + c["da3"] * eta
        + diff1(c["da2"] * eta, g)
        - c["v1"] / c["y"] ** 2 * diff1(c["a4"] * eta, g)
        + diff1(c["da4"] * eta, g) / c["y"]
    )


def l_eps_quadratic_split(eta, profile, params):
    """``int L(eta) eta`` split into four integrals after integrating by parts.

    Returns ``(I1, I2, I3, I4)`` whose sum matches the assembled quadratic form
    up to discretisation error when ``eta`` vanishes at both ends.
    """
    eta = _check_eta(eta, profile)
    c = operator_coefficients(profile, params)
    g = profile.grid
    deta = diff1(eta, g)
    dV = eta * c["y"]
    pv = c["a4"] / c["y"]  # phi'(v) v'
    i1 = trapz(params.s * c["a1"] * eta**2, g)
    i2 = trapz(c["a2"] * eta * (deta + c["a1"] * eta), g)
    i3 = -trapz(deta * c["a2"] * eta, g)
    i4 = -trapz(deta / c["y"] * pv * dV, g) + trapz(c["v1"] * eta / c["y"] ** 2 * pv * dV, g)
    return i1, i2, i3, i4


@dataclass(frozen=True)
class EtaMember:
    """Smooth, effectively compactly supported ``eta`` in units of ``xi/eps``.

    ``kind`` is ``"gaussian"``, ``"dipole"`` or ``"weighted"``; the last is
    ``(v_eps - 1)`` times a Gaussian window.
    """

    kind: str
    center: float
    width: float = 2.0

    def evaluate(self, profile):
        z = (profile.grid.xi / profile.params.epsilon - self.center) / self.width
        e = np.exp(-(z**2))
        if self.kind == "gaussian":
            return e
        if self.kind == "dipole":
            return z * e
        if self.kind == "weighted":
            return (profile.v_eps - 1) * e
        raise InvalidParametersError(f"unknown eta shape {self.kind!r}")


def default_eta_family():
    """Twelve members: six bumps, three dipoles and three weighted windows."""
    return (
        [EtaMember("gaussian", c) for c in (-30.0, -10.0, -3.0, 0.0, 3.0, 10.0)]
        + [EtaMember("dipole", c) for c in (-10.0, 0.0, 10.0)]
        + [EtaMember("weighted", c, 5.0) for c in (-10.0, 0.0, 10.0)]
    )


def _operator_terms(eta, profile, params, coeffs):
    g = profile.grid
    ph = coeffs["phi"]
    deta = diff1(eta, g)
    dV = eta * coeffs["y"]
    eps = params.epsilon
    first = (
        trapz(l_eps_apply(eta, profile, params, coeffs) * eta, g),
        trapz(ph * deta**2, g),
        trapz(ph * dV**2, g),
    )
    second = (
        trapz(c_eps_apply(eta, profile, params, coeffs) * deta, g),
        trapz(ph * diff2(eta, g) ** 2, g),
        trapz(ph * (deta**2 + dV**2 / eps**2), g),
    )
    return first, second


def _fit(I, A, B, alpha, eps):
    if B < DENOMINATOR_FLOOR:
        return None
    return (abs(I) - alpha * A) * alpha * eps**2 / B


def audit_linear_operator_bounds(profile, params, eta_family=None, alpha=0.25):
    """Fit ``C`` in ``|int L(eta) eta| <= alpha A + C B / (alpha eps^2)`` and its commutator analogue.

    ``A`` and ``B`` are the ``phi``-weighted integrals of the higher and lower
    derivatives.  Each member gives ``C = (|I| - alpha A) alpha eps^2 / B``;
    the fitted constant is the largest of these, floored at zero.
    """
    if not 0 < alpha < 1:
        raise InvalidParametersError(f"alpha must lie in (0, 1), got {alpha}")
    family = default_eta_family() if eta_family is None else list(eta_family)
    fine = _refine(profile)
    fits = {"L": [[0.0, 0.0], {}], "C": [[0.0, 0.0], {}]}
    for level, prof in enumerate((profile, fine)):
        coeffs = operator_coefficients(prof, params)
        for idx, m in enumerate(family):
            eta = m.evaluate(prof) if hasattr(m, "evaluate") else np.asarray(m(prof), dtype=float)
            edge = max(abs(eta[0]), abs(eta[-1]))
            if edge > 1e-8 * max(1.0, float(np.max(np.abs(eta)))):
                raise AdmissibilityError(f"eta member {idx} does not vanish at the grid ends")
            for key, (I, A, B) in zip(("L", "C"), _operator_terms(eta, prof, params, coeffs)):
                c = _fit(I, A, B, alpha, params.epsilon)
                if c is not None and c > fits[key][0][level]:
                    fits[key][0][level] = c
                    if level == 0:
                        fits[key][1] = {"member": idx, "I": I, "A": A, "B": B, "constant": c}
    return [
        _report(name, *fits[key][0], fits[key][1])
        for name, key in (("linear-L", "L"), ("linear-C", "C"))
    ]
