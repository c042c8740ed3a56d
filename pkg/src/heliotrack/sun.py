"""
Reference generation for the two tracker axes.

Solar angles use the low-precision almanac formulation (mean longitude and
anomaly, ecliptic longitude, declination and hour angle), good to about
0.01 deg in declination between 1950 and 2050. No refraction correction.
"""
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
import math

import numpy as np

from .motor import DomainError, MotorParams

AXES = ("azimuth", "altitude")

_J2000 = 2451545.0
_UNIX_EPOCH_JD = 2440587.5
_VALID_YEARS = (1950, 2050)
MIN_SLEW_SAMPLES = 60


@dataclass(frozen=True)
class Site:
    latitude: float = 35.8
    longitude: float = 10.6
    utc_offset: float = 1.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise DomainError(f"latitude must be in [-90, 90], got {self.latitude!r}")
        if not -180.0 <= self.longitude <= 180.0:
            raise DomainError(f"longitude must be in [-180, 180], got {self.longitude!r}")
        if not -14.0 <= self.utc_offset <= 14.0:
            raise DomainError(f"utc_offset must be in [-14, 14] h, got {self.utc_offset!r}")

    @classmethod
    def parse(cls, text):
        """Parse ``"lat,lon,utc"``."""
        try:
            lat, lon, utc = (float(v) for v in text.split(","))
        except ValueError:
            raise DomainError(f"site must be 'lat,lon,utc_offset', got {text!r}") from None
        return cls(lat, lon, utc)


@dataclass(frozen=True)
class ReferencePoint:
    """Setpoint of one axis at one instant."""

    theta_r: float = 0.0
    omega_r: float = 0.0
    domega_r: float = 0.0
    jerk_r: float = 0.0
    i_dr: float = 0.0
    C_r: float = MotorParams.C


@dataclass(frozen=True)
class DisturbanceSpec:
    period: float = 15.0
    amplitude: float = 0.0
    shape: str = "square"
    start: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise DomainError(f"period must be > 0, got {self.period!r}")
        if not self.amplitude >= 0:
            raise DomainError(f"amplitude must be >= 0, got {self.amplitude!r}")
        if self.shape not in ("square", "sine"):
            raise DomainError(f"shape must be 'square' or 'sine', got {self.shape!r}")


# -- ephemeris -------------------------------------------------------------

def _julian_day(instants):
    """Julian day of UTC datetimes (naive values are taken as UTC)."""
    out = []
    for dt in np.atleast_1d(instants):
        if dt.tzinfo is not None:
            dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
        out.append(dt)
    years = np.array([d.year for d in out])
    if years.min() < _VALID_YEARS[0] or years.max() > _VALID_YEARS[1]:
        raise DomainError(
            f"solar position is only valid for {_VALID_YEARS[0]}-{_VALID_YEARS[1]}")
    epoch = datetime(1970, 1, 1)
    secs = np.array([(d - epoch) / timedelta(seconds=1) for d in out])
    return _UNIX_EPOCH_JD + secs / 86400.0


def solar_angles(jd, latitude, longitude):
    """
    Vectorised sun azimuth and elevation (deg) for Julian days ``jd``.

    Azimuth is measured clockwise from north in [0, 360).
    """
    n = np.asarray(jd, dtype=float) - _J2000
    mean_lon = np.mod(280.460 + 0.9856474 * n, 360.0)
    anomaly = np.radians(np.mod(357.528 + 0.9856003 * n, 360.0))
    ecl_lon = np.radians(mean_lon + 1.915 * np.sin(anomaly) + 0.020 * np.sin(2 * anomaly))
    obliq = np.radians(23.439 - 4.0e-7 * n)

    ra = np.arctan2(np.cos(obliq) * np.sin(ecl_lon), np.cos(ecl_lon))
    dec = np.arcsin(np.sin(obliq) * np.sin(ecl_lon))

    ut_hours = np.mod(n + 0.5, 1.0) * 24.0
    gmst = np.mod(6.697375 + 0.0657098242 * n + ut_hours, 24.0)
    lmst = gmst + longitude / 15.0
    ha = np.radians(np.mod(lmst * 15.0 - np.degrees(ra) + 180.0, 360.0) - 180.0)

    lat = math.radians(latitude)
    sin_el = np.sin(dec) * math.sin(lat) + np.cos(dec) * math.cos(lat) * np.cos(ha)
    el = np.arcsin(np.clip(sin_el, -1.0, 1.0))
    az = np.arctan2(-np.cos(dec) * np.sin(ha),
                    np.sin(dec) * math.cos(lat) - np.cos(dec) * np.cos(ha) * math.sin(lat))
    return np.mod(np.degrees(az), 360.0), np.degrees(el)


def solar_position(instant, site):
    """
    Sun azimuth and elevation (deg) at a UTC instant.

    Raises
    ------
    DomainError
        For instants outside 1950-2050.
    """
    az, el = solar_angles(_julian_day(instant), site.latitude, site.longitude)
    return float(az[0]), float(el[0])


def day_angles(day, site, sample_dt):
    """
    Sun angles over one local calendar day.

    Returns
    -------
    t : ndarray
        Seconds since local midnight, ``0 <= t < 86400``.
    az, el : ndarray
        Degrees.
    """
    if not sample_dt > 0:
        raise DomainError(f"sample_dt must be > 0, got {sample_dt!r}")
    if not _VALID_YEARS[0] <= day.year <= _VALID_YEARS[1]:
        raise DomainError(
            f"solar position is only valid for {_VALID_YEARS[0]}-{_VALID_YEARS[1]}")
    t = np.arange(0.0, 86400.0, sample_dt)
    midnight_utc = datetime(day.year, day.month, day.day) - timedelta(hours=site.utc_offset)
    jd0 = _julian_day(midnight_utc)[0]
    az, el = solar_angles(jd0 + t / 86400.0, site.latitude, site.longitude)
    return t, az, el


# -- reference profiles ----------------------------------------------------

@dataclass(frozen=True)
class ReferenceProfile:
    """
    Sampled references for both axes.

    ``theta``, ``omega``, ``domega`` and ``jerk`` have shape ``(2, n)`` in
    motor-shaft radians, axis order ``AXES``.
    """

    t: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    domega: np.ndarray
    jerk: np.ndarray
    sunrise: float = float("nan")
    sunset: float = float("nan")
    slew_end: float = float("nan")

    def sample(self, times):
        """Linearly interpolated ``(theta, omega, domega, jerk)`` at ``times``."""
        times = np.asarray(times, dtype=float)
        return tuple(
            np.vstack([np.interp(times, self.t, arr[i]) for i in range(2)])
            for arr in (self.theta, self.omega, self.domega, self.jerk))

    def at(self, t, C_r=MotorParams.C):
        th, om, dom, jk = self.sample([t])
        return {ax: ReferencePoint(th[i, 0], om[i, 0], dom[i, 0], jk[i, 0], 0.0, C_r)
                for i, ax in enumerate(AXES)}

    def to_csv(self, path):
        header = "t,theta_r_az,theta_r_alt,omega_r_az,omega_r_alt"
        data = np.column_stack([self.t, self.theta[0], self.theta[1],
                                self.omega[0], self.omega[1]])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")


def _derivatives(theta, dt):
    omega = np.gradient(theta, dt, axis=-1)
    domega = np.gradient(omega, dt, axis=-1)
    jerk = np.gradient(domega, dt, axis=-1)
    return omega, domega, jerk


def _rate_limit(x, max_step):
    y = np.empty_like(x)
    y[0] = x[0]
    for k in range(1, len(x)):
        y[k] = y[k - 1] + min(max(x[k] - y[k - 1], -max_step), max_step)
    return y


def reference_profile(day, site, sample_dt=1.0, speed_limit=math.pi, gear_ratio=1.0):
    """
    Axis references for a full local day of sun tracking.

    Before sunrise both axes hold the sunrise pose. During daylight the
    azimuth axis follows the sun azimuth (unwrapped) and the altitude axis
    the sun elevation. After sunset the tracker returns to the sunrise pose
    along a minimum-jerk (quintic) slew whose peak rate is ``speed_limit``
    (rad/s, at the motor shaft), then holds there. The slew is stretched to at least
    ``MIN_SLEW_SAMPLES`` samples so the sampled rates still describe it.

    Raises
    ------
    DomainError
        When the sun does not rise or does not set on ``day`` at ``site``.
    """
    if not speed_limit > 0:
        raise DomainError(f"speed_limit must be > 0, got {speed_limit!r}")
    t, az, el = day_angles(day, site, sample_dt)
    up = el > 0.0
    if not up.any():
        raise DomainError(f"polar night: the sun does not rise on {day} at {site}")
    if up.all():
        raise DomainError(f"polar day: the sun does not set on {day} at {site}")
    rise = int(np.argmax(up))
    if rise == 0:
        # day already under way at local midnight; the morning rise is later
        rise = int(np.argmax(~up))
        rise += int(np.argmax(up[rise:]))
    sets = len(up) - 1 - int(np.argmax(up[::-1]))

    pose = np.vstack([np.unwrap(np.radians(az)), np.radians(el)]) * gear_ratio
    max_step = speed_limit * sample_dt
    theta = np.empty_like(pose)
    for i in range(2):
        track = pose[i].copy()
        track[:rise] = pose[i, rise]
        track[rise:sets + 1] = _rate_limit(pose[i, rise:sets + 1], max_step)
        theta[i] = track

    start = theta[:, sets].copy()
    home = theta[:, rise].copy()
    span = np.abs(home - start).max()
    # 10u^3 - 15u^4 + 6u^5 peaks at 15/8 span/duration
    duration = max(1.875 * span / speed_limit, MIN_SLEW_SAMPLES * sample_dt)
    u = np.minimum((t[sets + 1:] - t[sets]) / duration, 1.0)
    frac = u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)
    theta[:, sets + 1:] = start[:, None] + (home - start)[:, None] * frac[None, :]

    omega, domega, jerk = _derivatives(theta, sample_dt)
    return ReferenceProfile(t, theta, omega, domega, jerk,
                            sunrise=float(t[rise]), sunset=float(t[sets]),
                            slew_end=float(t[sets] + duration))


def synthetic_reference(kind, times, amplitude=(1.0, 1.0), rate=(0.1, 0.1),
                        frequency=0.1, t0=0.0):
    """
    Analytic test references.

    ``step`` jumps to ``amplitude`` at ``t0``; ``ramp`` moves at ``rate`` from
    ``t0``; ``sine`` is ``amplitude sin(2 pi f (t - t0))`` from ``t0``.

    Returns
    -------
    tuple of ndarray
        ``(theta, omega, domega, jerk)``, each of shape ``(2, len(times))``.
    """
    t = np.asarray(times, dtype=float)
    on = (t >= t0)[None, :]
    amp = np.asarray(amplitude, dtype=float)[:, None]
    zeros = np.zeros((2, t.size))
    if kind == "step":
        return amp * on, zeros, zeros.copy(), zeros.copy()
    if kind == "ramp":
        r = np.asarray(rate, dtype=float)[:, None]
        tau = np.maximum(t - t0, 0.0)[None, :]
        return r * tau, r * on, zeros, zeros.copy()
    if kind == "sine":
        w = 2.0 * math.pi * frequency
        ph = w * (t - t0)[None, :]
        return (amp * np.sin(ph) * on, amp * w * np.cos(ph) * on,
                -amp * w ** 2 * np.sin(ph) * on, -amp * w ** 3 * np.cos(ph) * on)
    raise DomainError(f"unknown synthetic reference {kind!r}")


def disturbance(t, spec):
    """
    Periodic load-torque disturbance (N m), zero before ``spec.start``.

    Works on scalars and arrays.
    """
    t = np.asarray(t, dtype=float)
    phase = np.mod(t - spec.start, spec.period) / spec.period
    if spec.shape == "square":
        d = np.where(phase < 0.5, spec.amplitude, -spec.amplitude)
    else:
        d = spec.amplitude * np.sin(2.0 * math.pi * phase)
    d = np.where(t < spec.start, 0.0, d)
    return float(d) if d.ndim == 0 else d


def parse_date(text):
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise DomainError(f"date must be YYYY-MM-DD, got {text!r}") from None
