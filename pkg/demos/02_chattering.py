# %% [markdown]
# # Hard switching against a boundary layer
#
# Same step, two switching laws. The sign law flips v_q on every sample;
# a saturation of width eps keeps the voltage smooth. Both hold the
# position to well inside the settling band.

# %%
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from heliotrack import compute_metrics, load_config, run_simulation

ROOT = Path(__file__).resolve().parents[1]
OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

runs = {}
for name in ("step", "boundary"):
    cfg = load_config(ROOT / "configs" / f"{name}.yaml")
    runs[name] = run_simulation(cfg)
    m = compute_metrics(runs[name])["azimuth"]
    print(f"{name:8s} reversals {m.control_sign_reversals:7d}  "
          f"steady error {m.steady_state_error:.1e} rad  settles {m.settling_time:.2f} s")

# %%
fig, ax = plt.subplots(figsize=(8, 3.5))
window = slice(100000, 100200)      # 20 ms at t = 10 s
for name, log in runs.items():
    ax.plot(log.t[window], log["azimuth", "v_q"][window], label=name)
ax.set_xlabel("time (s)")
ax.set_ylabel("v_q (V)")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "chattering.png", dpi=120)

# %% [markdown]
# Sweeping the switching amplitude shows how little it matters once the
# equivalent control does the work: settling barely moves between 3 V and 48 V.

# %%
from heliotrack import sweep

rows = sweep(load_config(ROOT / "configs" / "step.yaml"),
             {"controller.U0": [3.0, 12.0, 48.0]}, workers=1)
for r in rows:
    print(r["overrides"], f"{r['metrics']['azimuth'].settling_time:.3f} s")
