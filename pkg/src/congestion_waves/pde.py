"""Time integration of the (w, v) system in the wave frame.

With ``xi = x - s t`` the system reads

    v_t = (s v + w + phi(v) v_xi)_xi,        w_t = s w_xi,

so the travelling profile is stationary and ``w`` is transported exactly,
``w(t, xi) = w0(xi + s t)``.  Each step is linearly implicit: the diffusion
coefficient is frozen at the old level, advection is implicit and centred,
and the ``w`` source is explicit.  One tridiagonal solve per step.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math
import warnings

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import (
    BoundaryContaminationWarning,
    CongestionError,
    InvalidParametersError,
)
from .model import phi, psi_difference
from .numerics import TridiagonalSystem, diff1, div_flux, solve_tridiagonal, trapz

__all__ = [
    "PerturbationSpec",
    "State",
    "Scheme",
    "Snapshot",
    "Trajectory",
    "perturbation_potential",
    "initial_state",
    "default_dt",
    "step",
    "run",
    "reconstruct_u",
    "u_equation_residual",
    "CONGESTION_THRESHOLD",
]

CONGESTION_THRESHOLD = 1 + 1e-13
SHAPES = ("gaussian-dipole", "compact-bump-derivative", "custom-samples")
TARGETS = ("v-only", "v-and-w")
BOUNDARIES = ("flux", "dirichlet")
CONTAMINATION_LEVEL = 1e-10
CONTAMINATION_CELLS = 10


@dataclass(frozen=True)
class PerturbationSpec:
    """Zero-mean initial perturbation, built as the derivative of a potential.

    ``amplitude`` is the peak value of the perturbation itself; positive
    amplitudes put the positive lobe on the left of ``center``.  The ``w_*``
    fields describe the desired-velocity perturbation when
    ``applies_to == "v-and-w"`` and default to the ``v`` values.
    ``samples`` holds the potential on the grid for ``custom-samples``.
    """

    shape: str = "gaussian-dipole"
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 0.5
    applies_to: str = "v-only"
    w_amplitude: float = None
    w_center: float = None
    w_width: float = None
    samples: tuple = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidParametersError(f"unknown perturbation shape {self.shape!r}; expected one of {SHAPES}")
        if self.applies_to not in TARGETS:
            raise InvalidParametersError(f"applies_to must be one of {TARGETS}, got {self.applies_to!r}")
        for name in ("amplitude", "center", "width"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParametersError(f"perturbation {name} must be finite")
        if not self.width > 0:
            raise InvalidParametersError(f"perturbation width must be positive, got {self.width}")
        if self.w_width is not None and not self.w_width > 0:
            raise InvalidParametersError(f"w perturbation width must be positive, got {self.w_width}")
        if self.shape == "custom-samples" and self.samples is None:
            raise InvalidParametersError("custom-samples needs the potential samples")

    def scaled(self, factor):
        """Same shape with both amplitudes multiplied by ``factor``."""
        w_amp = None if self.w_amplitude is None else self.w_amplitude * factor
        return replace(self, amplitude=self.amplitude * factor, w_amplitude=w_amp)

    def for_w(self):
        """The spec describing the ``w`` perturbation."""
        pick = lambda a, b: a if a is not None else b
        return replace(
            self,
            amplitude=pick(self.w_amplitude, self.amplitude),
            center=pick(self.w_center, self.center),
            width=pick(self.w_width, self.width),
        )


def _bump(x):
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1 / (1 - x[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_slope_peak():
    slope = lambda x: -np.exp(-1 / (1 - x * x)) * 2 * x / (1 - x * x) ** 2
    res = minimize_scalar(lambda x: -slope(x), bounds=(-0.999, 0.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(slope(res.x))


def perturbation_potential(spec, grid):
    """Potential ``P`` on the grid; the perturbation is ``diff1(P)``."""
    xi = grid.xi
    a, c, w = spec.amplitude, spec.center, spec.width
    if spec.shape == "gaussian-dipole":
        return a * w * math.sqrt(math.e / 2) * np.exp(-(((xi - c) / w) ** 2))
    if spec.shape == "compact-bump-derivative":
        return a * w * _bump((xi - c) / w) / _bump_slope_peak()
    samples = np.asarray(spec.samples, dtype=float)
    if samples.shape != (grid.n,):
        raise InvalidParametersError(f"custom potential has {samples.size} samples, grid has {grid.n}")
    peak = np.max(np.abs(samples))
    if peak > 0 and max(abs(samples[0]), abs(samples[-1])) > 1e-12 * peak:
        raise InvalidParametersError("custom potential must vanish at both ends for a zero-mean perturbation")
    return a * samples


@dataclass(frozen=True)
class State:
    """Fields at time ``t`` on the wave-frame grid.

    ``w_initial`` is kept so that ``w`` can be transported exactly.
    """

    t: float
    v: np.ndarray
    w: np.ndarray
    grid: object
    w_initial: np.ndarray = field(repr=False)


def _check_uncongested(v, grid, t):
    i = int(np.argmin(v))
    if not v[i] > CONGESTION_THRESHOLD:
        raise CongestionError(
            f"specific volume reached the congested state: v = {v[i]!r} at xi = {grid.xi[i]:.6g}, t = {t:.6g}",
            t=t, xi=float(grid.xi[i]), value=float(v[i]),
        )


def initial_state(profile, pert):
    """Profile plus a zero-mean perturbation of ``v`` (and of ``w`` if requested)."""
    grid = profile.grid
    v = profile.v_eps + diff1(perturbation_potential(pert, grid), grid)
    w = profile.w_eps.copy()
    if pert.applies_to == "v-and-w":
        w = w + diff1(perturbation_potential(pert.for_w(), grid), grid)
    _check_uncongested(v, grid, 0.0)
    return State(0.0, v, w, grid, w.copy())


def default_dt(grid, params):
    """``min(dx / (2 s), eps / 100)``."""
    return min(grid.dx / (2 * params.s), 0.01 * params.epsilon)


@dataclass(frozen=True)
class Scheme:
    """Discretisation choices.

    Attributes
    ----------
    balanced : bool
        Subtract the discrete residual of the sampled profile so that it is
        an exact fixed point of the scheme.
    boundary : {"flux", "dirichlet"}
        ``"flux"`` holds the boundary flux at its background value, which is
        zero perturbation flux and conserves the grid integral of ``v``.
        ``"dirichlet"`` pins ``v`` to the profile values at both ends.
    corrector_sweeps : int
        Extra solves with the coefficient re-evaluated at the new level.
    corrector_tol : float
        Stop the corrector once the update falls below this value.
    """

    balanced: bool = True
    boundary: str = "flux"
    corrector_sweeps: int = 0
    corrector_tol: float = 1e-10

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise InvalidParametersError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not 0 <= self.corrector_sweeps <= 3:
            raise InvalidParametersError("corrector_sweeps must lie in 0..3")


class _Stepper:
    """Precomputed pieces of the scheme for one profile."""

    def __init__(self, params, profile, scheme, w_initial):
        self.params = params
        self.profile = profile
        self.scheme = scheme
        self.grid = profile.grid
        self.s = params.s
        # background flux s v + w + phi(v) v' is s v_plus + u_plus everywhere
        self.flux_bg = self.s * params.v_plus + params.u_plus
        self.residual = self._background_residual() if scheme.balanced else np.zeros(self.grid.n)
        self.w_initial = np.asarray(w_initial, dtype=float)
        if np.ptp(self.w_initial) == 0:
            self._spline = None
        else:
            self._spline = CubicSpline(self.grid.xi, self.w_initial)

    def faces(self, v, w, a):
        dx = self.grid.dx
        return self.s * 0.5 * (v[1:] + v[:-1]) + 0.5 * (w[1:] + w[:-1]) + a * np.diff(v) / dx

    def _background_residual(self):
        prof, dx = self.profile, self.grid.dx
        a = _face_mean(phi(prof.v_eps, self.params))
        flux = self.faces(prof.v_eps, prof.w_eps, a)
        res = np.empty(self.grid.n)
        res[1:-1] = np.diff(flux) / dx
        res[0] = (flux[0] - self.flux_bg) * 2 / dx
        res[-1] = (self.flux_bg - flux[-1]) * 2 / dx
        return res

    def transport(self, t):
        if self._spline is None:
            return self.w_initial.copy()
        x = self.grid.xi + self.s * t
        out = np.full(self.grid.n, self.w_initial[-1])
        inside = x <= self.grid.xi_max
        out[inside] = self._spline(x[inside])
        return out

    def system(self, v_old, w_new, a, dt):
        n, dx, s = self.grid.n, self.grid.dx, self.s
        lo = -dt * (a / dx**2 - s / (2 * dx))
        up = -dt * (a / dx**2 + s / (2 * dx))
        di = np.empty(n)
        di[1:-1] = 1 + dt * (a[:-1] + a[1:]) / dx**2
        rhs = v_old - dt * self.residual
        rhs[1:-1] += dt * (w_new[2:] - w_new[:-2]) / (2 * dx)
        if self.scheme.boundary == "flux":
            r = 2 * dt / dx
            di[0] = 1 + r * (a[0] / dx - s / 2)
            up[0] = -r * (s / 2 + a[0] / dx)
            rhs[0] += r * (0.5 * (w_new[0] + w_new[1]) - self.flux_bg)
            di[-1] = 1 + r * (s / 2 + a[-1] / dx)
            lo[-1] = r * (s / 2 - a[-1] / dx)
            rhs[-1] += r * (self.flux_bg - 0.5 * (w_new[-2] + w_new[-1]))
        else:
            di[0] = di[-1] = 1.0
            up[0] = lo[-1] = 0.0
            rhs[0], rhs[-1] = self.profile.v_eps[0], self.profile.v_eps[-1]
        return TridiagonalSystem(lo, di, up, rhs)

    def advance(self, state, dt, check_dominance=False, t_new=None):
        t_new = state.t + dt if t_new is None else t_new
        w_new = self.transport(t_new)
        a = _face_mean(phi(state.v, self.params))
        v_new = solve_tridiagonal(self.system(state.v, w_new, a, dt), check_dominance=check_dominance)
        for _ in range(self.scheme.corrector_sweeps):
            if not np.all(v_new > 1):
                break
            a = _face_mean(phi(v_new, self.params))
            v_next = solve_tridiagonal(self.system(state.v, w_new, a, dt), check_dominance=False)
            change = np.max(np.abs(v_next - v_new))
            v_new = v_next
            if change < self.scheme.corrector_tol:
                break
        _check_uncongested(v_new, self.grid, t_new)
        return State(t_new, v_new, w_new, self.grid, state.w_initial)


def _face_mean(c):
    return 0.5 * (c[1:] + c[:-1])


def step(state, dt, params, profile, scheme=Scheme()):
    """Advance ``state`` by one linearly implicit step of size ``dt``."""
    if not dt > 0:
        raise InvalidParametersError(f"dt must be positive, got {dt}")
    _check_uncongested(state.v, state.grid, state.t)
    return _Stepper(params, profile, scheme, state.w_initial).advance(state, dt)


def reconstruct_u(state, params, profile, method="psi"):
    """Velocity ``u = w + phi(v) v_xi``.

    ``method="psi"`` writes the flux as ``(psi(v) - psi(v_eps))_xi`` plus
    the exact background flux ``s (v_plus - v_eps)``; the grid integral of
    ``u - u_eps`` then telescopes.  ``method="phi"`` multiplies
    ``phi(v)`` by ``diff1(v)`` directly.
    """
    v, grid = state.v, state.grid
    _check_uncongested(v, grid, state.t)
    if method == "phi":
        return state.w + phi(v, params) * diff1(v, grid)
    if method != "psi":
        raise InvalidParametersError(f"unknown reconstruction {method!r}")
    background = params.s * (params.v_plus - profile.v_eps)
    return state.w + diff1(psi_difference(v, profile.v_eps, params), grid) + background


def u_equation_residual(state, params, profile):
    """Residual of the velocity equation evaluated on the reconstructed ``u``.

    The time derivative of ``u`` is taken from the (w, v) system,
    ``u_t = s w_xi + (phi(v) v_t)_xi`` with ``v_t`` given by the spatial
    operator, and compared against the wave-frame velocity equation

        (u - u_eps)_t - s (u - u_eps)_xi - (phi(v_eps) (u - u_eps)_xi)_xi
            = ((phi(v) - phi(v_eps)) u_xi)_xi.

    Both sides agree exactly in the continuum, so the returned array is
    pure truncation error.
    """
    grid, s = state.grid, params.s
    v, w = state.v, state.w
    ph, ph_eps = phi(v, params), phi(profile.v_eps, params)
    u = reconstruct_u(state, params, profile)
    dv = u - profile.u_eps
    v_t = s * diff1(v, grid) + diff1(w, grid) + div_flux(ph, v, grid)
    u_t = s * diff1(w, grid) + diff1(ph * v_t, grid)
    source = diff1((ph - ph_eps) * diff1(u, grid), grid)
    return u_t - s * diff1(dv, grid) - div_flux(ph_eps, dv, grid) - source


@dataclass(frozen=True)
class Snapshot:
    """Diagnostic record at one output time."""

    t: float
    state: State
    u: np.ndarray
    report: object


@dataclass
class Trajectory:
    """Snapshots of a run plus run-level bookkeeping."""

    snapshots: list
    dt: float
    n_steps: int
    scheme: Scheme
    contamination_time: float = None

    @property
    def final(self):
        return self.snapshots[-1]

    def summary(self):
        first, last = self.snapshots[0].report, self.snapshots[-1].report
        reports = [snap.report for snap in self.snapshots]
        return {
            "t_end": last.t,
            "dt": self.dt,
            "n_steps": self.n_steps,
            "boundary": self.scheme.boundary,
            "balanced": self.scheme.balanced,
            "initial_sup_v_dev": first.sup_v_dev,
            "initial_sup_u_dev": first.sup_u_dev,
            "final_sup_v_dev": last.sup_v_dev,
            "final_sup_u_dev": last.sup_u_dev,
            "max_mass_v_drift": max(abs(r.mass_v - first.mass_v) for r in reports),
            "max_mass_u_drift": max(abs(r.mass_u - first.mass_u) for r in reports),
            "max_energy_ratio": max(
                (r.e0 + 2 * r.int_d0) / first.e0 if first.e0 > 0 else 0.0 for r in reports
            ),
            "x_norm_sq": last.x_norm_sq,
            "min_v": min(float(np.min(snap.state.v)) for snap in self.snapshots),
            "contamination_time": self.contamination_time,
        }


def _contaminated(state, profile):
    k = CONTAMINATION_CELLS
    dv = np.abs(state.v - profile.v_eps)
    dw = np.abs(state.w - profile.w_eps)
    edge = np.r_[dv[:k], dv[-k:], dw[:k], dw[-k:]]
    return bool(np.max(edge) > CONTAMINATION_LEVEL)


def run(state0, t_end, params, profile, *, dt=None, stride=None, observers=(), c=(1.0, 1.0, 1.0),
        scheme=Scheme()):
    """Integrate to ``t_end`` and collect diagnostic snapshots.

    Parameters
    ----------
    state0 : State
    t_end : float
        Final time; ``0`` returns only the initial snapshot.
    params : ModelParams
    profile : Profile
    dt : float, optional
        Requested step, shortened so that ``t_end`` is hit exactly.
        Defaults to :func:`default_dt`.
    stride : int, optional
        Steps between snapshots; defaults to about one hundred snapshots.
        The final time is always recorded.
    observers : iterable of callables
        Called with every :class:`Snapshot` as it is produced.
    c : tuple of float
        Weights of the three energy levels in the running norm.
    scheme : Scheme

    Returns
    -------
    Trajectory
    """
    from .diagnostics import EnergyAccumulator, energies

    if not t_end >= 0:
        raise InvalidParametersError(f"t_end must be non-negative, got {t_end}")
    dt = default_dt(state0.grid, params) if dt is None else dt
    if not dt > 0:
        raise InvalidParametersError(f"dt must be positive, got {dt}")
    n_steps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    dt = t_end / n_steps if n_steps else dt
    stride = max(1, n_steps // 100) if stride is None else int(stride)
    if stride < 1:
        raise InvalidParametersError("snapshot stride must be at least 1")
    _check_uncongested(state0.v, state0.grid, state0.t)

    stepper = _Stepper(params, profile, scheme, state0.w_initial)
    acc = EnergyAccumulator(profile, params, c, state0)
    snapshots = []
    contamination_time = None

    def record(state):
        u = reconstruct_u(state, params, profile)
        report = energies(state, profile, params, c, accumulated=acc, u=u)
        snap = Snapshot(state.t, state, u, report)
        snapshots.append(snap)
        for obs in observers:
            obs(snap)

    state = state0
    record(state)
    for k in range(1, n_steps + 1):
        try:
            state = stepper.advance(state, dt, check_dominance=(k == 1), t_new=state0.t + k * dt)
        except Exception as err:
            if getattr(err, "t", None) is None:
                err.t = state.t + dt
            raise
        acc.update(state)
        if contamination_time is None and _contaminated(state, profile):
            contamination_time = state.t
            warnings.warn(
                f"perturbation reached within {CONTAMINATION_CELLS} cells of the boundary at t = {state.t:.6g}",
                BoundaryContaminationWarning, stacklevel=2,
            )
        if k % stride == 0 or k == n_steps:
            record(state)
    return Trajectory(snapshots, dt, n_steps, scheme, contamination_time)
