"""Figure rendering for the report path.

Core modules never import matplotlib; this module turns a result sidecar
(as loaded by output.load_sidecar) into PNG files next to the data.  The
grids stay the authoritative artifact, the figures are a convenience
view of the same numbers.
"""

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _axis_label(axis: dict) -> str:
    unit = axis.get("unit")
    return f"{axis['name']} [{unit}]" if unit else axis["name"]


def _grid_panels(doc: dict):
    """Reshape cell columns back onto the 2-d axis grid."""
    ax0, ax1 = doc["axes"]
    n0, n1 = len(ax0["values"]), len(ax1["values"])
    panels = []
    for j, col in enumerate(doc["columns"]):
        grid = doc["cells"]["values"][:, j].reshape(n0, n1)
        panels.append((col, np.ma.masked_invalid(grid)))
    return ax0, ax1, panels


def _render_map(doc: dict, base: str) -> list:
    ax0, ax1, panels = _grid_panels(doc)
    fig, axes = plt.subplots(1, len(panels),
                             figsize=(5.2 * len(panels), 4.2),
                             squeeze=False)
    x = np.asarray(ax1["values"], dtype=float)
    y = np.asarray(ax0["values"], dtype=float)
    for ax, (col, grid) in zip(axes[0], panels):
        pcm = ax.pcolormesh(x, y, grid, shading="nearest", cmap="viridis")
        fig.colorbar(pcm, ax=ax, label=f"{col['name']} [{col['unit']}]"
                     if col["unit"] != "dimensionless" else col["name"])
        ax.set_xlabel(_axis_label(ax1))
        ax.set_ylabel(_axis_label(ax0))
        ax.set_title(col["name"])
    fig.suptitle(f"{doc['observable']} ({doc['config_digest']})")
    fig.tight_layout()
    path = base + ".png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _render_curve(doc: dict, base: str) -> list:
    axis = doc["axes"][0]
    x = np.asarray(axis["values"], dtype=float)
    values = doc["cells"]["values"]
    errors = doc["cells"]["errors"]
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    styles = [("full calculation", "C0"), ("weak-field reference", "C1")]
    for j, (label, color) in enumerate(styles[: values.shape[1]]):
        ax.errorbar(x, values[:, j], yerr=errors[:, j], color=color,
                    label=label, lw=1.4, capsize=2)
    ax.set_xlabel(_axis_label(axis))
    ax.set_ylabel(f"{doc['columns'][0]['name']} [{doc['columns'][0]['unit']}]")
    positive = values[np.isfinite(values) & (values > 0)]
    if positive.size and positive.max() / max(positive.min(), 1e-300) > 50:
        ax.set_yscale("log")
    ax.legend()
    ax.set_title(f"{doc['observable']} ({doc['config_digest']})")
    fig.tight_layout()
    path = base + ".png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_figures(doc: dict, base: str) -> list:
    """PNG files for a finished scan; totals runs have nothing to draw."""
    observable = doc["observable"]
    if observable in ("rate_map", "concurrence_map"):
        return _render_map(doc, base)
    if observable == "rate_curve":
        return _render_curve(doc, base)
    return []


__all__ = ["render_figures"]
