"""
Closed-loop simulation of the two tracker axes.

Each axis is an independent plant/controller/observer stack. Per step the
controller samples the plant (position, currents, and either the true or
the observed velocity), its output is held over the step, and plant and
observer are integrated together with RK4 so the observer sees the same
continuous position and current signals the plant produces.

The controller and observer are given the nominal load torque; the
disturbance is applied to the plant only.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from datetime import date
import io
import itertools
import logging
import math
import os
import random

import numba
import numpy as np

from .config import SimConfig
from .controller import (_control_law, _load_update, _omega_next, _sign,
                         G_MODE, G_LOOP, G_BETA, G_BETA_D,
                         G_LOAD_BW, SUPER_TWISTING, POSITION)
from .motor import DomainError, _rhs
from .observer import INJECTIONS, _obs_rhs
from .sun import AXES, disturbance, reference_profile, synthetic_reference

log = logging.getLogger(__name__)

COLUMNS = ("theta_ref", "theta", "omega", "omega_hat", "theta_hat", "i_d", "i_q",
           "v_d", "v_q", "s_omega", "s_theta", "disturbance")
CSV_HEADER = "t,axis," + ",".join(COLUMNS)
(C_THETA_REF, C_THETA, C_OMEGA, C_OMEGA_HAT, C_THETA_HAT, C_I_D, C_I_Q, C_V_D,
 C_V_Q, C_S_OMEGA, C_S_THETA, C_DIST) = range(len(COLUMNS))

_STATE_NAMES = ("i_d", "i_q", "omega", "theta", "theta_hat", "omega_hat")

SETTLING_BAND = 0.02


class SimulationError(RuntimeError):
    pass


@numba.njit(cache=True, error_model="numpy")
def _joint_rhs(i_d, i_q, om, th_h, om_h, v_d, v_q, load, th, C_r, og, p):
    R, L, J, K, f_v, N = p[0], p[1], p[2], p[3], p[4], p[5]
    a, b, c, d = _rhs(i_d, i_q, om, v_d, v_q, load, R, L, J, K, f_v, N)
    e, f = _obs_rhs(th_h, om_h, th, i_q, om, C_r, og[0], og[1], int(og[2]), J, K, f_v)
    return a, b, c, d, e, f


@numba.njit(cache=True, error_model="numpy")
def _run_axis(dt, x0, theta_r, omega_r, domega_r, jerk_r, dist, C_r, g, p, og,
              sensorless, zero_feed, out):
    n = out.shape[0]
    i_d, i_q, om, th, th_h, om_h = x0[0], x0[1], x0[2], x0[3], x0[4], x0[5]
    J, K, f_v = p[2], p[3], p[4]
    l = g[G_LOAD_BW]
    st = int(g[G_MODE]) == SUPER_TWISTING
    pos_loop = int(g[G_LOOP]) == POSITION
    w_d = 0.0
    w_q = 0.0
    d_hat = 0.0
    om_pred = 0.0
    for k in range(n):
        feed = 0.0 if zero_feed else om
        om_m = om_h if sensorless else feed
        if k > 0:
            d_hat = _load_update(d_hat, om_m, om_pred, l, dt, J)
        v_d, v_q, s_om, s_th, s_d = _control_law(
            i_d, i_q, om_m, th, theta_r[k], omega_r[k], domega_r[k], jerk_r[k],
            0.0, C_r, d_hat, w_d, w_q, dt, g, p)
        row = out[k]
        row[0] = theta_r[k]
        row[1] = th
        row[2] = om
        row[3] = om_h
        row[4] = th_h
        row[5] = i_d
        row[6] = i_q
        row[7] = v_d
        row[8] = v_q
        row[9] = s_om
        row[10] = s_th
        row[11] = dist[k]
        if k == n - 1:
            break
        if st:
            w_q += -g[G_BETA] * _sign(s_th if pos_loop else s_om) * dt
            w_d += -g[G_BETA_D] * _sign(s_d) * dt
        om_pred = _omega_next(i_d, i_q, om_m, th, v_d, v_q, C_r, d_hat, dt, p)

        load = C_r + dist[k]
        h = 0.5 * dt
        a1, b1, c1, d1, e1, f1 = _joint_rhs(i_d, i_q, om, th_h, om_h, v_d, v_q, load,
                                            th, C_r, og, p)
        a2, b2, c2, d2, e2, f2 = _joint_rhs(
            i_d + h * a1, i_q + h * b1, om + h * c1, th_h + h * e1, om_h + h * f1,
            v_d, v_q, load, th + h * d1, C_r, og, p)
        a3, b3, c3, d3, e3, f3 = _joint_rhs(
            i_d + h * a2, i_q + h * b2, om + h * c2, th_h + h * e2, om_h + h * f2,
            v_d, v_q, load, th + h * d2, C_r, og, p)
        a4, b4, c4, d4, e4, f4 = _joint_rhs(
            i_d + dt * a3, i_q + dt * b3, om + dt * c3, th_h + dt * e3, om_h + dt * f3,
            v_d, v_q, load, th + dt * d3, C_r, og, p)
        s = dt / 6.0
        i_d = i_d + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        i_q = i_q + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        om = om + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        th = th + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        th_h = th_h + s * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
        om_h = om_h + s * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        vals = (i_d, i_q, om, th, th_h, om_h)
        for j in range(6):
            if not math.isfinite(vals[j]):
                return k + 1, j
    return -1, -1


@dataclass
class SimLog:
    """
    Sampled record of a run: ``t`` of shape ``(n,)`` and, per axis, an
    ``(n, len(COLUMNS))`` array in ``COLUMNS`` order.
    """

    t: np.ndarray
    data: dict
    dt: float

    def column(self, axis, name):
        return self.data[axis][:, COLUMNS.index(name)]

    def __getitem__(self, key):
        axis, name = key
        return self.column(axis, name)

    def to_csv(self, fh):
        """Write the log, interleaving axes sample by sample, at full precision."""
        chunks = {}
        for axis in AXES:
            buf = io.StringIO()
            fmt = "%.17g," + axis + "," + ",".join(["%.17g"] * len(COLUMNS))
            np.savetxt(buf, np.column_stack([self.t, self.data[axis]]), fmt=fmt)
            chunks[axis] = buf.getvalue().splitlines()
        fh.write(CSV_HEADER + "\n")
        for rows in zip(*(chunks[a] for a in AXES)):
            fh.write("\n".join(rows))
            fh.write("\n")

    @classmethod
    def from_csv(cls, fh):
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = {a: [] for a in AXES}
        times = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows[parts[1]].append([float(v) for v in parts[2:]])
            if parts[1] == AXES[0]:
                times.append(float(parts[0]))
        t = np.array(times)
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(t, {a: np.array(rows[a]) for a in AXES}, dt)


def reference_arrays(cfg, t):
    """Per-axis ``(theta, omega, domega, jerk)`` sampled at simulation times."""
    sc = cfg.scenario
    if sc.kind == "sun-day":
        prof = reference_profile(date.fromisoformat(sc.date), sc.site, sc.sample_dt,
                                 sc.speed_limit, sc.gear_ratio)
        return prof.sample(sc.start + t)
    return synthetic_reference(sc.kind, t, sc.amplitude, sc.rate, sc.frequency, sc.t0)


def run_simulation(cfg, *, zero_omega_feed=False):
    """
    Simulate both axes for ``cfg.duration`` seconds.

    ``zero_omega_feed`` replaces the plant velocity handed to the controller
    by zero; with ``cfg.sensorless`` set this must not change anything.

    Raises
    ------
    SimulationError
        If any state becomes non-finite; the message names the signal and
        the time.
    """
    if not isinstance(cfg, SimConfig):
        raise TypeError("run_simulation expects a SimConfig")
    n = cfg.n_steps + 1
    t = np.arange(n) * cfg.dt
    theta_r, omega_r, domega_r, jerk_r = reference_arrays(cfg, t)
    dist = np.asarray(disturbance(t, cfg.disturbance), dtype=float) * np.ones(n)
    g = cfg.controller.to_array()
    og = cfg.observer.to_array()
    init = cfg.initial
    data = {}
    for i, axis in enumerate(AXES):
        params = cfg.motors[axis]
        p = np.array(params.as_tuple())
        if init.theta is not None:
            th0 = init.theta[i]
        elif cfg.scenario.kind == "step":
            th0 = 0.0
        else:
            th0 = theta_r[i, 0]
        i_q0 = params.C / params.K if init.i_q is None else init.i_q[i]
        om0 = init.omega[i]
        x0 = np.array([init.i_d[i], i_q0, om0, th0,
                       th0 + init.observer_offset[0], om0 + init.observer_offset[1]])
        out = np.empty((n, len(COLUMNS)))
        k_fail, j_fail = _run_axis(cfg.dt, x0, theta_r[i], omega_r[i], domega_r[i],
                                   jerk_r[i], dist, params.C, g, p, og,
                                   cfg.sensorless, zero_omega_feed, out)
        if k_fail >= 0:
            raise SimulationError(
                f"{axis}: non-finite {_STATE_NAMES[j_fail]} at t={k_fail * cfg.dt:.6g} s")
        data[axis] = out
    return SimLog(t, data, cfg.dt)


@dataclass(frozen=True)
class Metrics:
    settling_time: float
    settled: bool
    steady_state_error: float
    observer_rms_error: float
    control_sign_reversals: int
    max_disturbance_deviation: float
    recovery_time: float
    recovered: bool


def settling_index(t, error, band):
    """Index of the first sample after the last one outside ``band``; ``None`` if unsettled."""
    outside = np.nonzero(np.abs(error) > band)[0]
    if outside.size == 0:
        return 0
    if outside[-1] == len(t) - 1:
        return None
    return int(outside[-1] + 1)


def sign_reversals(x):
    s = np.sign(np.asarray(x))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _axis_metrics(t, arr):
    theta_ref, theta = arr[:, C_THETA_REF], arr[:, C_THETA]
    err = theta - theta_ref
    span = float(np.max(np.abs(theta_ref - theta[0])))
    band = SETTLING_BAND * span if span > 0 else 1e-12
    n = len(t)

    k_set = settling_index(t, err, band)
    settled = k_set is not None
    settling_time = float(t[k_set] - t[0]) if settled else float(t[-1] - t[0])
    tail = max(1, n // 10)
    sse = float(np.mean(np.abs(err[-tail:])))

    k_obs = k_set if settled else n // 2
    eps_omega = arr[k_obs:, C_OMEGA] - arr[k_obs:, C_OMEGA_HAT]
    obs_rms = float(np.sqrt(np.mean(eps_omega ** 2))) if eps_omega.size else 0.0

    reversals = sign_reversals(arr[:, C_V_Q])

    dist = arr[:, C_DIST]
    edges = np.nonzero(np.diff(dist) != 0)[0] + 1
    if dist[0] != 0:
        edges = np.concatenate([[0], edges])
    max_dev, recovery, recovered = 0.0, 0.0, True
    if edges.size:
        max_dev = float(np.max(np.abs(err[edges[0]:])))
        bounds = list(edges) + [n]
        for a, b in zip(bounds[:-1], bounds[1:]):
            k = settling_index(t[a:b], err[a:b], band)
            if k is None:
                recovered = False
                recovery = max(recovery, float(t[b - 1] - t[a]))
            else:
                recovery = max(recovery, float(t[a + k] - t[a]))
    return Metrics(settling_time, settled, sse, obs_rms, reversals, max_dev,
                   recovery, recovered)


def compute_metrics(sim_log):
    """
    Per-axis metrics of a log.

    Settling uses a band of 2 % of the largest reference excursion from the
    initial position and reports the time of the last entry into it. The
    observer error is the RMS of ``omega - omega_hat`` from settling on.
    Disturbance edges are wherever the logged disturbance changes value;
    recovery is the longest time, over edges, to re-enter the band for good
    before the next edge.
    """
    if len(sim_log.t) == 0:
        raise DomainError("empty log")
    return {axis: _axis_metrics(sim_log.t, sim_log.data[axis]) for axis in AXES}


def metrics_to_text(metrics):
    """Flat ``axis.key = value`` lines."""
    lines = []
    for axis, m in metrics.items():
        for key, value in asdict(m).items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{axis}.{key} = {value}")
    return "\n".join(lines) + "\n"


def metrics_from_text(text):
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        axis, name = key.split(".", 1)
        out.setdefault(axis, {})[name] = value
    return out


def grid_points(grid):
    """Cartesian product of a ``{dotted.path: [values]}`` grid, in key order."""
    if not grid:
        raise DomainError("grid must not be empty")
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], (list, tuple)) or not grid[k]:
            raise DomainError(f"grid entry {k!r} needs a non-empty list of values")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _run_point(args):
    index, base, overrides = args
    try:
        cfg = base.with_overrides(overrides)
        return index, overrides, compute_metrics(run_simulation(cfg)), None
    except (DomainError, SimulationError) as exc:
        return index, overrides, None, str(exc)


def sweep(base, grid, workers=1):
    """
    Run one simulation per grid point.

    Runs are launched in an order shuffled by ``base.seed`` (and in parallel
    when ``workers > 1``) but rows come back in grid order. A failing point
    yields a row with ``error`` set instead of aborting the sweep.

    Returns
    -------
    list of dict
        ``{"index", "overrides", "metrics", "error"}`` per grid point.
    """
    points = grid_points(grid)
    jobs = [(i, base, p) for i, p in enumerate(points)]
    order = list(range(len(jobs)))
    random.Random(base.seed).shuffle(order)
    shuffled = [jobs[i] for i in order]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, shuffled))
    else:
        results = [_run_point(j) for j in shuffled]
    rows = [None] * len(jobs)
    for index, overrides, metrics, error in results:
        if error:
            log.warning("grid point %d failed: %s", index, error)
        rows[index] = {"index": index, "overrides": overrides, "metrics": metrics,
                       "error": error}
    return rows


def sweep_table(rows):
    """Flatten sweep rows into a header and list of string rows for CSV."""
    keys = list(rows[0]["overrides"])
    mkeys = [f"{a}.{f}" for a in AXES for f in Metrics.__dataclass_fields__]
    header = ["index", *keys, *mkeys, "error"]
    table = []
    for r in rows:
        vals = [str(r["index"])] + [repr(r["overrides"][k]) for k in keys]
        if r["metrics"] is None:
            vals += [""] * len(mkeys)
        else:
            for a in AXES:
                for v in asdict(r["metrics"][a]).values():
                    vals.append(repr(v))
        vals.append(r["error"] or "")
        table.append(vals)
    return header, table


def default_workers():
    return max(1, min(4, os.cpu_count() or 1))
