"""Standalone matplotlib scripts written next to the data they plot."""

_PREAMBLE = '''import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent


def read(name):
    lines = [ln for ln in (here / name).read_text().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]
'''


def timeseries_script(csv_name: str) -> str:
    return _PREAMBLE + f'''

cols, rows = read({csv_name!r})
col = {{c: [float(r[i]) for r in rows] for i, c in enumerate(cols)}}
t = col["t"]
d = [a + b for a, b in zip(col["w22_u"], col["w22_v"])]

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
axes[0].semilogy(t, d)
axes[0].set_title("W22 distance to steady state")
axes[1].semilogy(t, [max(y, 1e-300) for y in col["y"]])
axes[1].set_title("composite functional y")
axes[2].plot(t, col["mass_u"], label="mass u")
axes[2].plot(t, col["mass_v"], label="mass v")
axes[2].legend()
for ax in axes:
    ax.set_xlabel("t")
fig.tight_layout()
fig.savefig(here / "timeseries.png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''


def sweep_script(csv_name: str) -> str:
    return _PREAMBLE + f'''

cols, rows = read({csv_name!r})
value = [float(r[0]) for r in rows]
k2 = [float(r[3]) for r in rows]
regime = [r[1] for r in rows]

fig, ax = plt.subplots(figsize=(6, 4))
for tag in sorted(set(regime)):
    xs = [v for v, g in zip(value, regime) if g == tag]
    ys = [k for k, g in zip(k2, regime) if g == tag]
    ax.plot(xs, ys, "o", label=tag)
ax.set_xlabel("swept value")
ax.set_ylabel("fitted K2")
ax.legend()
fig.tight_layout()
fig.savefig(here / "sweep.png", dpi=150)
'''


def inequality_script(families) -> str:
    return _PREAMBLE + f'''

families = {list(families)!r}
fig, axes = plt.subplots(1, len(families), figsize=(3.2 * len(families), 3.2))
for ax, name in zip(axes, families):
    cols, rows = read(f"inequality_{{name}}.csv")
    samples = [r for r in rows if r[0] != "max"]
    ax.hist([float(r[1]) for r in samples], bins=20)
    ax.set_title(name)
fig.tight_layout()
fig.savefig(here / "inequalities.png", dpi=150)
'''
