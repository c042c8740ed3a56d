"""
Second-order sliding-mode tracking controller for one motor axis.

The quadrature voltage is the flat-model feedforward plus a switching term on
either the position surface or the velocity surface. The direct axis gets its
own switching loop on ``s_d = i_d - i_dr`` so that ``v_d`` is closed as well.

Surface values are expressed in the units of an angular acceleration
(rad/s^2) for the q channel and amperes for the d channel, which is why the
two channels carry separate boundary-layer widths and super-twisting gains.
"""
from dataclasses import dataclass, field, asdict
import math

import numba
import numpy as np

from .motor import MotorParams, ControlInput, DomainError, _inverse, _rk4

HARD, BOUNDARY, SUPER_TWISTING = 0, 1, 2
MODES = {"hard": HARD, "boundary": BOUNDARY, "super_twisting": SUPER_TWISTING}

POSITION, VELOCITY = 0, 1
LOOPS = {"position": POSITION, "velocity": VELOCITY}

PRINTED, EXPANDED = 0, 1
POSITION_FORMS = {"printed": PRINTED, "expanded": EXPANDED}

# slots of the packed gain vector handed to the compiled kernels
(G_MU, G_MU1, G_MU2, G_U0, G_U0D, G_MODE, G_EPS, G_EPS_D, G_ALPHA, G_BETA,
 G_ALPHA_D, G_BETA_D, G_LOOP, G_FORM, G_VMAX, G_LOAD_BW, G_FF, G_REACH) = range(18)
N_GAINS = 18

EQUIVALENT, REFERENCE = 0, 1
FEEDFORWARDS = {"equivalent": EQUIVALENT, "reference": REFERENCE}


@dataclass(frozen=True)
class ControllerGains:
    """
    Sliding-surface and switching gains.

    ``position_form`` picks how the position surface weighs the velocity
    error: ``"printed"`` uses ``mu1`` on both position and velocity error,
    ``"expanded"`` uses ``mu2`` on the velocity error. With the reference
    gains only the printed form damps the position loop enough to settle
    inside 15 s (zeta ~0.55 against ~0.16).

    ``load_bandwidth`` (rad/s) sets the residual load-torque estimator that
    feeds the acceleration term of both surfaces and the one-step model; 0
    disables it and the residual is taken as zero. ``inf`` gives a one-sample
    deadbeat estimate.

    ``feedforward`` selects the nominal control. ``"reference"`` is the flat
    inverse model evaluated on the reference alone. ``"equivalent"`` is the
    sampled-data equivalent control: the pair of voltages which, held over
    one sample, moves the model from the current state to surfaces scaled by
    ``1 - reach`` (``reach=1`` is deadbeat). Switching is added on top, so
    hard switching chatters symmetrically about the surface instead of
    locking into a cycle around an arbitrary offset. With Table 1 values one
    volt held for 0.1 ms moves ``s_theta`` by about 17.6, which is why the
    reference-only feedforward cannot resolve the position term.
    """

    mu: float = 0.135
    mu1: float = 1.2
    mu2: float = 0.355
    k1: float = 1.0
    k2: float = 1.0
    U0: float = 24.0
    U0d: float = 12.0
    eta: float = 1.0
    mode: str = "hard"
    eps: float = 500.0
    eps_d: float = 0.3
    alpha: float = 0.01
    beta: float = 1.0
    alpha_d: float = 0.5
    beta_d: float = 20.0
    loop: str = "position"
    position_form: str = "printed"
    v_max: float | None = None
    load_bandwidth: float = math.inf
    feedforward: str = "equivalent"
    reach: float = 1.0

    def __post_init__(self):
        for name in ("mu", "mu1", "mu2", "k1", "k2", "U0", "U0d", "eta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {sorted(MODES)}, got {self.mode!r}")
        if self.loop not in LOOPS:
            raise DomainError(f"loop must be one of {sorted(LOOPS)}, got {self.loop!r}")
        if self.position_form not in POSITION_FORMS:
            raise DomainError(
                f"position_form must be one of {sorted(POSITION_FORMS)}, got {self.position_form!r}")
        if self.feedforward not in FEEDFORWARDS:
            raise DomainError(
                f"feedforward must be one of {sorted(FEEDFORWARDS)}, got {self.feedforward!r}")
        if not 0.0 < self.reach <= 1.0:
            raise DomainError(f"reach must be in (0, 1], got {self.reach!r}")
        if self.mode == "boundary":
            for name in ("eps", "eps_d"):
                if not getattr(self, name) > 0:
                    raise DomainError(f"{name} must be > 0 in boundary mode")
        if self.mode == "super_twisting":
            for name in ("alpha", "beta", "alpha_d", "beta_d"):
                if not getattr(self, name) > 0:
                    raise DomainError(f"{name} must be > 0 in super_twisting mode")
        if self.v_max is not None and not self.v_max > 0:
            raise DomainError(f"v_max must be > 0 when set, got {self.v_max!r}")
        if not self.load_bandwidth >= 0:
            raise DomainError(f"load_bandwidth must be >= 0, got {self.load_bandwidth!r}")

    def to_array(self):
        g = np.zeros(N_GAINS)
        g[G_MU], g[G_MU1], g[G_MU2] = self.mu, self.mu1, self.mu2
        g[G_U0], g[G_U0D] = self.U0, self.U0d
        g[G_MODE] = MODES[self.mode]
        g[G_EPS], g[G_EPS_D] = self.eps, self.eps_d
        g[G_ALPHA], g[G_BETA] = self.alpha, self.beta
        g[G_ALPHA_D], g[G_BETA_D] = self.alpha_d, self.beta_d
        g[G_LOOP] = LOOPS[self.loop]
        g[G_FORM] = POSITION_FORMS[self.position_form]
        g[G_VMAX] = np.inf if self.v_max is None else self.v_max
        g[G_LOAD_BW] = self.load_bandwidth
        g[G_FF] = FEEDFORWARDS[self.feedforward]
        g[G_REACH] = self.reach
        return g

    def scaled(self, factor):
        """Copy with both position gains and the switching amplitude scaled."""
        d = asdict(self)
        for name in ("mu", "mu1", "mu2", "U0"):
            d[name] *= factor
        return ControllerGains(**d)


@dataclass(frozen=True)
class TrackingError:
    e1: float
    e2: float
    e3: float
    e4: float


@dataclass(frozen=True)
class SurfaceValues:
    s_omega: float
    s_theta: float
    s_d: float


# -- compiled kernels ------------------------------------------------------

@numba.njit(cache=True, error_model="numpy")
def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@numba.njit(cache=True, error_model="numpy")
def _accel_error(e2, e3, residual, J, K, f_v):
    return (K * e2 - f_v * e3 - residual) / J


@numba.njit(cache=True, error_model="numpy")
def _s_omega(e2, e3, residual, mu, J, K, f_v):
    return mu * e3 + _accel_error(e2, e3, residual, J, K, f_v)


@numba.njit(cache=True, error_model="numpy")
def _s_theta(e2, e3, e4, residual, mu1, mu2, form, J, K, f_v):
    w = mu2 if form == EXPANDED else mu1
    return mu1 * e4 + w * e3 + _accel_error(e2, e3, residual, J, K, f_v)


@numba.njit(cache=True, error_model="numpy")
def _switch(s, mode, amplitude, eps, alpha, w):
    if mode == HARD:
        return -amplitude * _sign(s)
    if mode == BOUNDARY:
        r = s / eps
        if r > 1.0:
            r = 1.0
        elif r < -1.0:
            r = -1.0
        return -amplitude * r
    return -alpha * math.sqrt(abs(s)) * _sign(s) + w


@numba.njit(cache=True, error_model="numpy")
def _surfaces_at(i_d, i_q, omega_m, theta, theta_r, omega_r, domega_r, i_dr, C_r,
                 residual, g, p):
    R, L, J, K, f_v = p[0], p[1], p[2], p[3], p[4]
    i_qr = (J * domega_r + f_v * omega_r + C_r) / K
    e2 = i_q - i_qr
    e3 = omega_m - omega_r
    e4 = theta - theta_r
    s_om = _s_omega(e2, e3, residual, g[G_MU], J, K, f_v)
    s_th = _s_theta(e2, e3, e4, residual, g[G_MU1], g[G_MU2], int(g[G_FORM]), J, K, f_v)
    return i_d - i_dr, s_om, s_th


@numba.njit(cache=True, error_model="numpy")
def _predict(i_d, i_q, omega_m, theta, v_d, v_q, nxt, C_r, residual, dt, g, p):
    """Surfaces one sample ahead under the model, for held (v_d, v_q)."""
    a, b, c, d = _rk4(i_d, i_q, omega_m, theta, v_d, v_q, C_r + residual, dt,
                      p[0], p[1], p[2], p[3], p[4], p[5])
    s_d, s_om, s_th = _surfaces_at(a, b, c, d, nxt[0], nxt[1], nxt[2], nxt[3], C_r,
                                   residual, g, p)
    if int(g[G_LOOP]) == POSITION:
        return s_d, s_th
    return s_d, s_om


@numba.njit(cache=True, error_model="numpy")
def _equivalent(i_d, i_q, omega_m, theta, v_d, v_q, s_d, s_q, nxt, C_r, residual,
                dt, g, p):
    # The one-step map is affine in the held voltages up to the small
    # N L omega cross-coupling, so a secant solve from the feedforward is
    # accurate to rounding.
    keep = 1.0 - g[G_REACH]
    d0, q0 = _predict(i_d, i_q, omega_m, theta, v_d, v_q, nxt, C_r, residual, dt, g, p)
    d1, q1 = _predict(i_d, i_q, omega_m, theta, v_d + 1.0, v_q, nxt, C_r, residual, dt, g, p)
    d2, q2 = _predict(i_d, i_q, omega_m, theta, v_d, v_q + 1.0, nxt, C_r, residual, dt, g, p)
    a11, a12 = d1 - d0, d2 - d0
    a21, a22 = q1 - q0, q2 - q0
    r1 = keep * s_d - d0
    r2 = keep * s_q - q0
    det = a11 * a22 - a12 * a21
    return v_d + (r1 * a22 - r2 * a12) / det, v_q + (a11 * r2 - a21 * r1) / det


@numba.njit(cache=True, error_model="numpy")
def _control_law(i_d, i_q, omega_m, theta, theta_r, omega_r, domega_r, jerk_r,
                 i_dr, C_r, residual, w_d, w_q, dt, g, p):
    """Returns (v_d, v_q, s_omega, s_theta, s_d)."""
    R, L, J, K, f_v, N = p[0], p[1], p[2], p[3], p[4], p[5]
    _, _, v_dr, v_qr = _inverse(omega_r, domega_r, jerk_r, i_dr, 0.0, C_r, 0.0,
                                R, L, J, K, f_v, N)
    s_d, s_om, s_th = _surfaces_at(i_d, i_q, omega_m, theta, theta_r, omega_r,
                                   domega_r, i_dr, C_r, residual, g, p)
    s_q = s_th if int(g[G_LOOP]) == POSITION else s_om

    v_d0 = v_dr
    v_q0 = v_qr
    if int(g[G_FF]) == EQUIVALENT:
        # reference one sample ahead, from its own derivatives
        nxt = np.empty(4)
        nxt[0] = theta_r + dt * (omega_r + dt * (0.5 * domega_r + dt * jerk_r / 6.0))
        nxt[1] = omega_r + dt * (domega_r + 0.5 * dt * jerk_r)
        nxt[2] = domega_r + dt * jerk_r
        nxt[3] = i_dr
        v_d0, v_q0 = _equivalent(i_d, i_q, omega_m, theta, v_dr, v_qr, s_d, s_q, nxt,
                                 C_r, residual, dt, g, p)

    mode = int(g[G_MODE])
    u_q = _switch(s_q, mode, g[G_U0], g[G_EPS], g[G_ALPHA], w_q)
    u_d = _switch(s_d, mode, g[G_U0D], g[G_EPS_D], g[G_ALPHA_D], w_d)
    v_max = g[G_VMAX]
    v_d = min(max(v_d0 + u_d, -v_max), v_max)
    v_q = min(max(v_q0 + u_q, -v_max), v_max)
    return v_d, v_q, s_om, s_th, s_d


@numba.njit(cache=True, error_model="numpy")
def _omega_next(i_d, i_q, omega_m, theta, v_d, v_q, C_r, residual, dt, p):
    """Model velocity one sample ahead; the load estimator compares it with the next sample."""
    return _rk4(i_d, i_q, omega_m, theta, v_d, v_q, C_r + residual, dt,
                p[0], p[1], p[2], p[3], p[4], p[5])[2]


@numba.njit(cache=True, error_model="numpy")
def _load_update(d_hat, omega_m, omega_pred, l, dt, J):
    # An unmodelled torque d slows the sample by d dt / J relative to the
    # prediction; blend that into the estimate with a first-order lag of
    # bandwidth l, discretised exactly.
    if l <= 0.0:
        return 0.0
    a = 1.0 - math.exp(-l * dt)
    return d_hat - a * J * (omega_m - omega_pred) / dt


# -- public API ------------------------------------------------------------

def tracking_error(state, ref, params=MotorParams()):
    """
    Error between the motor state and a reference point.

    The current references come from the flat model: ``i_dr`` is carried by
    the reference and ``i_qr`` balances the reference torque.
    """
    i_qr = (params.J * ref.domega_r + params.f_v * ref.omega_r + ref.C_r) / params.K
    return TrackingError(
        e1=state.i_d - ref.i_dr,
        e2=state.i_q - i_qr,
        e3=state.omega - ref.omega_r,
        e4=state.theta - ref.theta_r,
    )


def generic_surface(e, de, gains):
    """``k1 e + k2 de/dt``; not used by the default loops."""
    return gains.k1 * e + gains.k2 * de


def velocity_surface(e, gains, params=MotorParams(), C_r=0.0):
    """
    ``s_omega = mu e3 + de3/dt`` with the velocity-error rate taken from the
    motor model, ``(K e2 - f_v e3 - C_r) / J``. ``C_r`` is the load torque not
    accounted for by the reference.
    """
    return _s_omega(e.e2, e.e3, C_r, gains.mu, params.J, params.K, params.f_v)


def position_surface(e, gains, params=MotorParams(), C_r=0.0):
    return _s_theta(e.e2, e.e3, e.e4, C_r, gains.mu1, gains.mu2,
                    POSITION_FORMS[gains.position_form],
                    params.J, params.K, params.f_v)


def surfaces(e, gains, params=MotorParams(), C_r=0.0):
    return SurfaceValues(
        s_omega=velocity_surface(e, gains, params, C_r),
        s_theta=position_surface(e, gains, params, C_r),
        s_d=e.e1,
    )


def switching_term(s, gains, w=0.0, channel="q"):
    """
    Discontinuous part of the control for one channel.

    ``hard`` is ``-U0 sign(s)`` with ``sign(0) = 0``; ``boundary`` replaces the
    sign by a saturation of width ``eps``; ``super_twisting`` returns
    ``-alpha |s|^(1/2) sign(s) + w`` where the caller integrates
    ``dw/dt = -beta sign(s)``.
    """
    if channel == "q":
        amp, eps, alpha = gains.U0, gains.eps, gains.alpha
    elif channel == "d":
        amp, eps, alpha = gains.U0d, gains.eps_d, gains.alpha_d
    else:
        raise ValueError(f"channel must be 'q' or 'd', got {channel!r}")
    return _switch(float(s), MODES[gains.mode], amp, eps, alpha, float(w))


def compose_control(nominal, switching):
    """Nominal plus switching control, channel by channel."""
    d, q = switching
    return ControlInput(nominal.v_d + d, nominal.v_q + q)


def reaching_condition(s, s_dot, eta):
    """True iff ``s * s_dot <= -eta |s|``."""
    if not eta > 0:
        raise DomainError(f"eta must be > 0, got {eta!r}")
    return s * s_dot <= -eta * abs(s)


def nominal_control(ref, params=MotorParams()):
    """Feedforward ``(v_dr, v_qr)`` for a reference point."""
    _, _, v_dr, v_qr = _inverse(ref.omega_r, ref.domega_r, ref.jerk_r, ref.i_dr, 0.0,
                                ref.C_r, 0.0, *params.as_tuple())
    return ControlInput(v_dr, v_qr)


def control_step(state, ref, gains, params=MotorParams(), residual=0.0, w=(0.0, 0.0),
                 dt=1e-4):
    """
    One evaluation of the control law.

    ``state.omega`` is whatever velocity the caller trusts (measured or
    estimated). ``residual`` is the load torque beyond ``ref.C_r``, ``w``
    the super-twisting integrals ``(w_d, w_q)`` and ``dt`` the hold time of
    the returned voltages.

    Returns
    -------
    ControlInput
    """
    v_d, v_q, *_ = _control_law(
        state.i_d, state.i_q, state.omega, state.theta,
        ref.theta_r, ref.omega_r, ref.domega_r, ref.jerk_r, ref.i_dr, ref.C_r,
        float(residual), float(w[0]), float(w[1]), float(dt),
        gains.to_array(), np.array(params.as_tuple()))
    return ControlInput(v_d, v_q)


@dataclass
class SlidingModeController:
    """
    Stateful controller for one axis.

    Holds the super-twisting integrals and the residual load-torque
    estimate. After each control the model predicts the next velocity
    sample; the mismatch with the sample that actually arrives is read as
    an unmodelled torque and filtered at ``gains.load_bandwidth``.
    """

    gains: ControllerGains = field(default_factory=ControllerGains)
    params: MotorParams = field(default_factory=MotorParams)
    w_d: float = 0.0
    w_q: float = 0.0
    d_hat: float = 0.0
    omega_pred: float | None = None

    def step(self, state, ref, dt):
        """Compute the control for ``state`` and advance internal state by ``dt``."""
        g, p = self.gains, self.params
        pa = np.array(p.as_tuple())
        if self.omega_pred is not None:
            self.d_hat = _load_update(self.d_hat, state.omega, self.omega_pred,
                                      g.load_bandwidth, dt, p.J)
        v_d, v_q, s_om, s_th, s_d = _control_law(
            state.i_d, state.i_q, state.omega, state.theta,
            ref.theta_r, ref.omega_r, ref.domega_r, ref.jerk_r, ref.i_dr, ref.C_r,
            self.d_hat, self.w_d, self.w_q, dt, g.to_array(), pa)
        if g.mode == "super_twisting":
            s_q = s_th if g.loop == "position" else s_om
            self.w_q += -g.beta * _sign(s_q) * dt
            self.w_d += -g.beta_d * _sign(s_d) * dt
        self.omega_pred = _omega_next(state.i_d, state.i_q, state.omega, state.theta,
                                      v_d, v_q, ref.C_r, self.d_hat, dt, pa)
        return ControlInput(v_d, v_q), SurfaceValues(s_om, s_th, s_d)
