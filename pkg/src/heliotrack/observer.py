"""
Sliding-mode velocity observer.

Reconstructs ``(theta_hat, omega_hat)`` from the measured position and the
quadrature current so the controller can run without a tachometer.

Two injection modes are provided. ``"paper"`` drives the velocity estimate
with ``sign(omega - omega_hat)`` and therefore needs the true velocity; it
exists to check the Lyapunov conditions as stated. ``"sensorless"`` uses
``sign(theta - theta_hat)`` for both injections and never sees ``omega``.

``lambda2`` is a torque (N m): it enters the velocity estimate as
``lambda2 / J``, which is the scaling under which ``lambda2 > |C_r|max`` is the
velocity-error Lyapunov condition, ``C_r`` here being the load torque the
observer does not know about.

The default ``lambda2`` is small on purpose. The injection is a sign, so in
sampled form it kicks ``omega_hat`` by ``lambda2 / J * dt`` every step; at
``lambda2 = 1.56`` and ``dt = 1e-4`` that is 0.52 rad/s of chatter. Raise it
only when the observer has to absorb an unknown load.
"""
from dataclasses import dataclass
import math

import numba
import numpy as np

from .motor import MotorParams, DomainError
from .controller import _sign

PAPER, SENSORLESS = 0, 1
INJECTIONS = {"paper": PAPER, "sensorless": SENSORLESS}


class ObserverConfigError(DomainError):
    pass


@dataclass(frozen=True)
class ObserverGains:
    lambda1: float = 1.0
    lambda2: float = 0.003
    injection: str = "sensorless"

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")
        if self.injection not in INJECTIONS:
            raise DomainError(
                f"injection must be one of {sorted(INJECTIONS)}, got {self.injection!r}")

    def to_array(self):
        return np.array([self.lambda1, self.lambda2, float(INJECTIONS[self.injection])])


@dataclass(frozen=True)
class ObserverState:
    theta_hat: float = 0.0
    omega_hat: float = 0.0


@dataclass(frozen=True)
class EstimationError:
    eps_theta: float
    eps_omega: float


@dataclass(frozen=True)
class GainReport:
    lambda1_ok: bool
    lambda1_margin: float
    lambda2_ok: bool
    lambda2_margin: float

    @property
    def ok(self):
        return self.lambda1_ok and self.lambda2_ok


@numba.njit(cache=True, error_model="numpy")
def _obs_rhs(theta_hat, omega_hat, theta_meas, i_q, omega_true, C_r,
             lambda1, lambda2, injection, J, K, f_v):
    s_theta = _sign(theta_meas - theta_hat)
    if injection == PAPER:
        s_omega = _sign(omega_true - omega_hat)
    else:
        s_omega = s_theta
    domega_hat = (K * i_q - f_v * omega_hat - C_r + lambda2 * s_omega) / J
    dtheta_hat = omega_hat + lambda1 * s_theta
    return dtheta_hat, domega_hat


@numba.njit(cache=True, error_model="numpy")
def _obs_rk4(theta_hat, omega_hat, theta_meas, i_q, omega_true, C_r, dt,
             lambda1, lambda2, injection, J, K, f_v):
    a1, b1 = _obs_rhs(theta_hat, omega_hat, theta_meas, i_q, omega_true, C_r,
                      lambda1, lambda2, injection, J, K, f_v)
    h = 0.5 * dt
    a2, b2 = _obs_rhs(theta_hat + h * a1, omega_hat + h * b1, theta_meas, i_q,
                      omega_true, C_r, lambda1, lambda2, injection, J, K, f_v)
    a3, b3 = _obs_rhs(theta_hat + h * a2, omega_hat + h * b2, theta_meas, i_q,
                      omega_true, C_r, lambda1, lambda2, injection, J, K, f_v)
    a4, b4 = _obs_rhs(theta_hat + dt * a3, omega_hat + dt * b3, theta_meas, i_q,
                      omega_true, C_r, lambda1, lambda2, injection, J, K, f_v)
    s = dt / 6.0
    return (theta_hat + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            omega_hat + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4))


def _omega_arg(gains, omega_true):
    if gains.injection == "paper":
        if omega_true is None:
            raise ObserverConfigError("paper injection needs the true velocity")
        return float(omega_true)
    return 0.0


def observer_derivative(obs, theta_meas, i_q, params=MotorParams(), gains=ObserverGains(),
                        C_r=None, omega_true=None):
    """
    Observer right-hand side.

    Returns
    -------
    tuple
        ``(dtheta_hat/dt, domega_hat/dt)``.

    Raises
    ------
    ObserverConfigError
        Paper injection without ``omega_true``.
    """
    C_r = params.C if C_r is None else C_r
    w = _omega_arg(gains, omega_true)
    return _obs_rhs(obs.theta_hat, obs.omega_hat, float(theta_meas), float(i_q), w,
                    float(C_r), gains.lambda1, gains.lambda2,
                    INJECTIONS[gains.injection], params.J, params.K, params.f_v)


def observer_step(obs, theta_meas, i_q, params=MotorParams(), gains=ObserverGains(),
                  C_r=None, dt=1e-4, omega_true=None):
    """RK4 step of the observer with the measurements held over ``dt``."""
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    C_r = params.C if C_r is None else C_r
    w = _omega_arg(gains, omega_true)
    th, om = _obs_rk4(obs.theta_hat, obs.omega_hat, float(theta_meas), float(i_q), w,
                      float(C_r), float(dt), gains.lambda1, gains.lambda2,
                      INJECTIONS[gains.injection], params.J, params.K, params.f_v)
    return ObserverState(th, om)


def estimation_error(plant, obs):
    return EstimationError(plant.theta - obs.theta_hat, plant.omega - obs.omega_hat)


def validate_gains(gains, eps_omega_bound, C_r_bound):
    """
    Check the two Lyapunov conditions ``lambda1 > |eps_omega|max`` and
    ``lambda2 > |C_r|max`` (strict), reporting the margins.
    """
    if eps_omega_bound < 0 or C_r_bound < 0:
        raise DomainError("bounds must be >= 0")
    m1 = gains.lambda1 - eps_omega_bound
    m2 = gains.lambda2 - C_r_bound
    return GainReport(m1 > 0, m1, m2 > 0, m2)


def lyapunov_v1(eps_theta):
    return 0.5 * np.square(eps_theta)


def lyapunov_v2(eps_theta, eps_omega, J):
    return 0.5 * (np.square(eps_theta) + J * np.square(eps_omega))
