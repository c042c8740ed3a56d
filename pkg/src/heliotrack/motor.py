"""
Continuous-time d-q model of a two-phase stepper motor.

State order is fixed as ``x = [i_d, i_q, theta, omega]`` wherever the state
is serialized. The scalar kernels (``_rhs``, ``_rk4``) are compiled with
numba so the closed-loop simulator can call them from its own compiled loop;
the dataclass API below wraps them for interactive use.
"""
from dataclasses import dataclass, astuple, fields
import math

import numba
import numpy as np


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


@dataclass(frozen=True)
class MotorParams:
    """
    Physical constants of one stepper motor.

    Defaults are the measured values of the tracker's motors. ``N`` is the
    rotor tooth count (50 for a 1.8 deg hybrid stepper).

    Parameters
    ----------
    R : float
        Winding resistance (Ohm).
    L : float
        Winding inductance (H).
    J : float
        Rotor inertia (kg m^2).
    K : float
        Torque constant (N m / A).
    f_v : float
        Viscous friction (N m s / rad).
    N : int
        Number of rotor teeth.
    C : float
        Nominal load torque (N m).
    """

    R: float = 3.15
    L: float = 8.15e-3
    J: float = 3.0145e-4
    K: float = 0.433
    f_v: float = 0.0172
    N: int = 50
    C: float = 0.780

    def __post_init__(self):
        for name in ("R", "L", "J", "K"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")
        if not (math.isfinite(self.f_v) and self.f_v >= 0):
            raise DomainError(f"f_v must be >= 0, got {self.f_v!r}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.N!r}")
        if not math.isfinite(self.C):
            raise DomainError(f"C must be finite, got {self.C!r}")

    def as_tuple(self):
        """(R, L, J, K, f_v, N) in the order the kernels expect."""
        return (self.R, self.L, self.J, self.K, self.f_v, float(self.N))


@dataclass(frozen=True)
class MotorState:
    i_d: float = 0.0
    i_q: float = 0.0
    omega: float = 0.0
    theta: float = 0.0

    def as_vector(self):
        """State as ``[i_d, i_q, theta, omega]``."""
        return np.array([self.i_d, self.i_q, self.theta, self.omega])

    @classmethod
    def from_vector(cls, x):
        i_d, i_q, theta, omega = (float(v) for v in x)
        return cls(i_d=i_d, i_q=i_q, omega=omega, theta=theta)


@dataclass(frozen=True)
class ControlInput:
    v_d: float = 0.0
    v_q: float = 0.0

    def clamp(self, v_max):
        """Symmetric saturation; ``v_max=None`` disables it."""
        if v_max is None:
            return self
        return ControlInput(
            min(max(self.v_d, -v_max), v_max), min(max(self.v_q, -v_max), v_max)
        )


@dataclass(frozen=True)
class MotorStateDerivative:
    di_d: float
    di_q: float
    domega: float
    dtheta: float


@dataclass(frozen=True)
class FlatReference:
    """
    Flat outputs and their derivatives: position ``y1`` and direct current
    ``y2``, plus the load torque the reference is computed against.
    """

    y1: float = 0.0
    dy1: float = 0.0
    ddy1: float = 0.0
    dddy1: float = 0.0
    y2: float = 0.0
    dy2: float = 0.0
    C_r: float = 0.0
    dC_r: float = 0.0


def _check_finite(*objs):
    for obj in objs:
        values = astuple(obj) if hasattr(obj, "__dataclass_fields__") else (obj,)
        for v in values:
            if not math.isfinite(v):
                raise DomainError(f"non-finite input in {obj!r}")


# -- compiled kernels ------------------------------------------------------

@numba.njit(cache=True, error_model="numpy")
def _rhs(i_d, i_q, omega, v_d, v_q, load, R, L, J, K, f_v, N):
    # The N L omega cross terms carry opposite signs so they exchange
    # power between the axes without creating any.
    di_d = (v_d - R * i_d + N * L * omega * i_q) / L
    di_q = (v_q - R * i_q - N * L * omega * i_d - K * omega) / L
    domega = (K * i_q - f_v * omega - load) / J
    return di_d, di_q, domega, omega


@numba.njit(cache=True, error_model="numpy")
def _rk4(i_d, i_q, omega, theta, v_d, v_q, load, dt, R, L, J, K, f_v, N):
    a1, b1, c1, d1 = _rhs(i_d, i_q, omega, v_d, v_q, load, R, L, J, K, f_v, N)
    h = 0.5 * dt
    a2, b2, c2, d2 = _rhs(i_d + h * a1, i_q + h * b1, omega + h * c1,
                          v_d, v_q, load, R, L, J, K, f_v, N)
    a3, b3, c3, d3 = _rhs(i_d + h * a2, i_q + h * b2, omega + h * c2,
                          v_d, v_q, load, R, L, J, K, f_v, N)
    a4, b4, c4, d4 = _rhs(i_d + dt * a3, i_q + dt * b3, omega + dt * c3,
                          v_d, v_q, load, R, L, J, K, f_v, N)
    s = dt / 6.0
    return (i_d + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            i_q + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            omega + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
            theta + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4))


@numba.njit(cache=True, error_model="numpy")
def _inverse(y1d, y1dd, y1ddd, y2, y2d, C_r, C_rd, R, L, J, K, f_v, N):
    i_qr = (J * y1dd + f_v * y1d + C_r) / K
    v_dr = L * y2d + R * y2 - (N * L / K) * y1d * (J * y1dd + f_v * y1d + C_r)
    v_qr = (J * L / K * y1ddd + (L * f_v + R * J) / K * y1dd
            + (R * f_v / K + K + N * L * y2) * y1d
            + L / K * C_rd + R * C_r / K)
    return y2, i_qr, v_dr, v_qr


# -- public API ------------------------------------------------------------

def derivative(state, u, load, params=MotorParams()):
    """
    Right-hand side of the d-q motor equations.

    Returns
    -------
    MotorStateDerivative
        ``(di_d/dt, di_q/dt, domega/dt, dtheta/dt)``.
    """
    _check_finite(state, u, load)
    out = _rhs(state.i_d, state.i_q, state.omega, u.v_d, u.v_q, float(load),
               *params.as_tuple())
    return MotorStateDerivative(*out)


def integrate_step(state, u, load, params=MotorParams(), dt=1e-4, dt_max=None):
    """
    Advance the motor by one classical RK4 step with the input held.

    Raises
    ------
    DomainError
        If ``dt`` is not positive or exceeds ``dt_max``.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    if dt_max is not None and dt > dt_max:
        raise DomainError(f"dt={dt} exceeds dt_max={dt_max}")
    _check_finite(state, u, load)
    i_d, i_q, omega, theta = _rk4(state.i_d, state.i_q, state.omega, state.theta,
                                  u.v_d, u.v_q, float(load), float(dt),
                                  *params.as_tuple())
    return MotorState(i_d=i_d, i_q=i_q, omega=omega, theta=theta)


def inverse_dynamics(ref, params=MotorParams()):
    """
    Currents and voltages that make the motor follow a flat reference.

    Position ``y1`` and direct current ``y2`` are flat outputs, so the
    quadrature current follows from the torque balance and both voltages
    from the electrical equations. Feeding ``(v_dr, v_qr)`` to the plant from
    the matching initial state reproduces the reference in open loop.

    Returns
    -------
    tuple
        ``(i_dr, i_qr, v_dr, v_qr)``.
    """
    _check_finite(ref)
    return _inverse(ref.dy1, ref.ddy1, ref.dddy1, ref.y2, ref.dy2, ref.C_r,
                    ref.dC_r, *params.as_tuple())


def holding_current(params=MotorParams(), load=None):
    """Quadrature current that balances ``load`` at standstill."""
    load = params.C if load is None else load
    return load / params.K


def stored_energy(state, params=MotorParams()):
    """Magnetic plus kinetic energy (J)."""
    return 0.5 * params.L * (state.i_d ** 2 + state.i_q ** 2) + 0.5 * params.J * state.omega ** 2


@numba.njit(cache=True, error_model="numpy")
def _power_terms(i_d, i_q, omega, v_d, v_q, load, R, f_v):
    supplied = v_d * i_d + v_q * i_q
    lost = R * (i_d * i_d + i_q * i_q) + f_v * omega * omega + load * omega
    return supplied, lost


def energy_balance_step(state, u, load, params=MotorParams(), dt=1e-4):
    """
    Take one RK4 step while integrating supplied and dissipated energy on the
    same stages.

    Returns ``(new_state, residual)`` where ``residual`` is the change in
    stored energy minus (supplied - lost), divided by the largest of the
    terms involved. The ``N L omega`` cross terms exchange power between the
    axes, so the residual is pure integration error.
    """
    R, L, J, K, f_v, N = params.as_tuple()
    x = np.array([state.i_d, state.i_q, state.omega, state.theta])

    def f(x):
        d = _rhs(x[0], x[1], x[2], u.v_d, u.v_q, load, R, L, J, K, f_v, N)
        p_in, p_out = _power_terms(x[0], x[1], x[2], u.v_d, u.v_q, load, R, f_v)
        return np.array(d), p_in, p_out

    k1, a1, b1 = f(x)
    k2, a2, b2 = f(x + 0.5 * dt * k1)
    k3, a3, b3 = f(x + 0.5 * dt * k2)
    k4, a4, b4 = f(x + dt * k3)
    x1 = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    e_in = dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    e_out = dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    new = MotorState(i_d=x1[0], i_q=x1[1], omega=x1[2], theta=x1[3])
    d_stored = stored_energy(new, params) - stored_energy(state, params)
    scale = max(abs(d_stored), abs(e_in), abs(e_out), np.finfo(float).tiny)
    return new, abs(d_stored - (e_in - e_out)) / scale


def params_from_dict(d):
    names = {f.name for f in fields(MotorParams)}
    unknown = set(d) - names
    if unknown:
        raise DomainError(f"unknown motor parameter(s): {sorted(unknown)}")
    return MotorParams(**d)
