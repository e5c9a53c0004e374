"""The six figure kinds, one builder each.

All greens-family kinds share the (r, G, stderr) schema.  The critical
kind computes its own power-law fit; the fit window runs from the second
bin to r_max/sqrt(2) (the box half-side when the profile reaches out to
the corner distance L/sqrt(2)).  The r^(-1/4) overlay coefficient is
matched at the first fitted bin.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, load_table, require_columns

STYLE_VERSION = 1

_GREENS = ("r", "G", "stderr")
_MOMENTUM = ("p", "rho", "stderr")
_DENSITY = ("bin_center_0", "value", "stderr")


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def _series(ax, x, y, err, label, **kw):
    if np.any(err > 0):
        return ax.errorbar(x, y, yerr=err, fmt="o", ms=3.5, lw=1.0,
                           capsize=2, label=label, **kw)
    return ax.plot(x, y, "o-", ms=3.5, lw=1.0, label=label, **kw)[0]


def fit_window(r):
    """Second bin up to r_max/sqrt(2)."""
    return float(r[1]), float(r[-1] / np.sqrt(2.0))


def fit_powerlaw(r, g, r_lo, r_hi):
    """Least-squares a r^(-eta) over the window; returns (a, eta)."""
    m = (r >= r_lo) & (r <= r_hi) & (g > 0)
    if int(m.sum()) < 2:
        raise SchemaError("fewer than 2 positive bins in the fit window")
    slope, icept = np.polyfit(np.log(r[m]), np.log(g[m]), 1)
    return float(np.exp(icept)), float(-slope)


def _radial_average(tab):
    """Collapse the flattened density grid to an annulus-averaged profile."""
    centers = [tab[k] for k in sorted(tab) if k.startswith("bin_center_")]
    r = np.sqrt(sum(c**2 for c in centers))
    u = np.unique(centers[0])
    dr = float(np.min(np.diff(u))) if u.size > 1 else float(2 * abs(u[0])) or 1.0
    idx = np.floor(r / dr).astype(int)
    nb = int(idx.max()) + 1
    cnt = np.bincount(idx, minlength=nb).astype(float)
    val = np.bincount(idx, weights=tab["value"], minlength=nb)
    var = np.bincount(idx, weights=tab["stderr"] ** 2, minlength=nb)
    mask = cnt > 0
    rr = (np.arange(nb)[mask] + 0.5) * dr
    return rr, val[mask] / cnt[mask], np.sqrt(var[mask]) / cnt[mask]


def _density(tables):
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    handles = []
    for k, (path, tab) in enumerate(tables):
        r, v, e = _radial_average(tab)
        if k == 0:
            handles.append(_series(ax, r, v, e, _stem(path)))
        else:
            handles.append(ax.plot(r, v, "-", lw=1.5, label=_stem(path))[0])
    ax.set_xlabel("r")
    ax.set_ylabel("density")
    ax.legend(handles=handles, frameon=False)
    return fig, {}


def _trap_greens(tables):
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    for path, tab in tables:
        _series(ax, tab["r"], tab["G"], tab["stderr"], _stem(path))
    r0, g0 = tables[0][1]["r"], tables[0][1]["G"]
    rr = np.linspace(0.0, float(r0[-1]), 200)
    scale = float(g0[0] / np.exp(-0.5 * r0[0] ** 2))
    ax.plot(rr, scale * np.exp(-0.5 * rr**2), "--", color="k", lw=1.2,
            label="exp(-r$^2$/2)")
    ax.set_xlabel("r")
    ax.set_ylabel("G(r)")
    ax.legend(frameon=False)
    return fig, {"scale": scale}


def _critical(tables):
    fig, ax = plt.subplots(figsize=(5.4, 4.1))
    for path, tab in tables:
        _series(ax, tab["r"], tab["G"], tab["stderr"], _stem(path))
    r, g = tables[0][1]["r"], tables[0][1]["G"]
    r_lo, r_hi = fit_window(r)
    a, eta = fit_powerlaw(r, g, r_lo, r_hi)
    rr = np.linspace(r_lo, r_hi, 200)
    label = f"{a:.3f} r$^{{-{eta:.2f}}}$"
    ax.plot(rr, a * rr**-eta, "--", color="k", lw=1.2, label=label)
    ax.annotate(f"fitted exponent: {eta:.3f}", xy=(0.97, 0.95),
                xycoords="axes fraction", ha="right", va="top")
    ax.set_xlabel("r")
    ax.set_ylabel("G(r)")
    ax.legend(frameon=False, loc="center right")

    inset = ax.inset_axes([0.5, 0.12, 0.46, 0.42])
    pos = g > 0
    inset.loglog(r[pos], g[pos], "o", ms=2.5)
    inset.loglog(rr, a * rr**-eta, "--", color="k", lw=1.0)
    inset.tick_params(labelsize=7)
    return fig, {"a": a, "eta": eta}


def _quarter_overlay(tables, ylabel):
    """Log-log curves with the a r^(-1/4) guide matched at the first fitted bin."""
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    for path, tab in tables:
        r, g, e = tab["r"], tab["G"], tab["stderr"]
        pos = g > 0
        _series(ax, r[pos], g[pos], e[pos], _stem(path))
    r, g = tables[0][1]["r"], tables[0][1]["G"]
    r_lo, r_hi = fit_window(r)
    a = float(g[1] * r[1] ** 0.25)
    rr = np.linspace(r_lo, r_hi, 200)
    ax.plot(rr, a * rr**-0.25, "--", color="k", lw=1.2, label="a r$^{-1/4}$")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    return fig, {"a": a}


def _above_critical(tables):
    return _quarter_overlay(tables, "G(r)")


def _ideal_gas(tables):
    return _quarter_overlay(tables, "G(r)")


def _momentum(tables):
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    for path, tab in tables:
        _series(ax, tab["p"], tab["rho"], tab["stderr"], _stem(path))
    ax.set_xlabel("p")
    ax.set_ylabel(r"$\rho$(p)")
    ax.legend(frameon=False)
    return fig, {}


KINDS = {
    "density": (_density, _DENSITY),
    "trap-greens": (_trap_greens, _GREENS),
    "critical": (_critical, _GREENS),
    "above-critical": (_above_critical, _GREENS),
    "ideal-gas": (_ideal_gas, _GREENS),
    "momentum": (_momentum, _MOMENTUM),
}


def render_figure(kind, csv_paths):
    """Build the figure without saving; returns (fig, meta)."""
    if kind not in KINDS:
        raise SchemaError(f"unknown kind '{kind}' (have {sorted(KINDS)})")
    if not csv_paths:
        raise SchemaError("at least one CSV is required")
    builder, required = KINDS[kind]
    tables = []
    for path in csv_paths:
        tab = load_table(path)
        require_columns(tab, required, path, kind)
        tables.append((path, tab))
    return builder(tables)


def render(kind, csv_paths, out_image, dpi=150):
    """Render one kind to a PNG; nothing is written if any input fails."""
    fig, meta = render_figure(kind, csv_paths)
    try:
        fig.savefig(out_image, dpi=dpi,
                    metadata={"Software": f"plotkit/{STYLE_VERSION}"})
    finally:
        plt.close(fig)
    return meta
