"""
Direct-beam cosine model of the energy collected by a panel over a day.

Irradiance is a constant clear-sky beam with no diffuse part, so only the
incidence angle matters and the irradiance level cancels from every ratio.
"""
from dataclasses import dataclass

import numpy as np

from .motor import DomainError
from .sun import day_angles

STRATEGIES = ("horizontal_fixed", "tilted_fixed", "dual_axis_tracked")


@dataclass(frozen=True)
class PanelOrientation:
    strategy: str = "dual_axis_tracked"
    tilt: float = 0.0
    azimuth: float = 180.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DomainError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 <= self.tilt <= 90.0:
            raise DomainError(f"tilt must be in [0, 90] deg, got {self.tilt!r}")

    @classmethod
    def parse(cls, text):
        """``horizontal``, ``tracked`` or ``tilted:<tilt>:<azimuth>``."""
        name, *args = text.split(":")
        if name in ("horizontal", "horizontal_fixed"):
            return cls("horizontal_fixed")
        if name in ("tracked", "dual_axis_tracked"):
            return cls("dual_axis_tracked")
        if name in ("tilted", "tilted_fixed") and len(args) == 2:
            return cls("tilted_fixed", float(args[0]), float(args[1]))
        raise DomainError(f"cannot parse panel orientation {text!r}")

    @property
    def label(self):
        if self.strategy == "tilted_fixed":
            return f"tilted_fixed({self.tilt:g},{self.azimuth:g})"
        return self.strategy


def _unit(az_deg, el_deg):
    az, el = np.radians(az_deg), np.radians(el_deg)
    return np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)


def incidence_factor(orientation, sun_azimuth, sun_elevation):
    """
    Cosine of the angle between panel normal and sun direction, clamped to
    ``[0, 1]``; zero whenever the sun is at or below the horizon.
    """
    el = np.asarray(sun_elevation, dtype=float)
    az = np.asarray(sun_azimuth, dtype=float)
    if orientation.strategy == "dual_axis_tracked":
        f = np.ones_like(el)
    elif orientation.strategy == "horizontal_fixed":
        f = np.sin(np.radians(el))
    else:
        sx, sy, sz = _unit(az, el)
        nx, ny, nz = _unit(orientation.azimuth, 90.0 - orientation.tilt)
        f = sx * nx + sy * ny + sz * nz
    f = np.where(el > 0.0, np.clip(f, 0.0, 1.0), 0.0)
    return float(f) if f.ndim == 0 else f


def daily_energy(site, day, orientation, dt=60.0):
    """Integral of the incidence factor over the local day (seconds)."""
    t, az, el = day_angles(day, site, dt)
    return float(np.sum(incidence_factor(orientation, az, el)) * dt)


def daily_energy_ratio(site, day, a, b, dt=60.0):
    """
    Energy collected by orientation ``a`` over that of ``b`` for one day.

    Raises
    ------
    DomainError
        If ``b`` collects nothing (polar night, or a panel facing away).
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    den = daily_energy(site, day, b, dt)
    if den == 0.0:
        raise DomainError(f"{b.label} collects no energy on {day} at {site}")
    return daily_energy(site, day, a, dt) / den


def ratio_table(site, day, strategies, dt=60.0):
    """Energy of each strategy relative to horizontal, as ``(label, energy_s, ratio)``."""
    base = daily_energy(site, day, PanelOrientation("horizontal_fixed"), dt)
    if base == 0.0:
        raise DomainError(f"no sunshine on {day} at {site}")
    rows = []
    for o in strategies:
        e = daily_energy(site, day, o, dt)
        rows.append((o.label, e, e / base))
    return rows

