"""Scan execution: turns a ScanConfig into value grids.

A scan is a flat list of cells (row-major over the configured axes).
Cells are grouped into fixed-size blocks; the block layout never depends
on the worker count, and every cell draws its randomness from a seed
derived only from the configured seed and the cell's global index, so a
scan is bit-identical for any workers setting and across checkpoint
resumes.

Map observables evaluate whole blocks in one batched engine call and
parallelize across blocks.  Integrated observables (rate_curve, totals)
run their cells sequentially and push the worker pool down into the
Monte-Carlo integrator instead, which uses the same fixed-partition
trick.  Checkpoints store completed blocks keyed by the config digest
and are written atomically.
"""

import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import units
from .amplitude import AmplitudeEngine, EngineSettings
from .config import (ScanConfig, config_hash, normalized_for_digest,
                     parse_config, serialize_config)
from .entanglement import concurrence_map
from .kinematics import head_on_electron
from .rates import (
    differential_rate_batch,
    pairs_per_shot,
    perturbative_engine,
    rate_curve_theta_c,
    single_compton_total_rate,
    total_rate,
)
from .units import ev

MASK_OK = "ok"
MASK_CLOSED = "closed"
MASK_RESONANT = "resonant"
MASK_FAILED = "failed"
MASK_PENDING = "pending"

# Cells per checkpoint block for batched map observables.
MAP_BLOCK = 256

# Seed offset separating the weak-field companion stream from the full
# calculation (not a multiple of the per-cell stride used by the curve).
WEAK_SEED_OFFSET = 104729

# Beam assumptions behind the pairs-per-shot estimate: electrons per
# bunch and pulse duration, with perfect transverse overlap.
BUNCH_ELECTRONS = 1.0e9
PULSE_DURATION_S = 100.0e-15

TOTALS_QUANTITIES = ("pair_rate", "pair_rate_weak_field", "one_photon_rate")

_SI_DENSITY = units.rate_density_to_si(1.0)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    unit: str


@dataclass
class ScanResult:
    config: ScanConfig
    config_text: str
    config_digest: str
    observable: str
    axis_names: list
    axis_units: list
    cell_axes: list          # one array per axis, aligned with flat cells
    columns: list
    values: np.ndarray       # (cells, len(columns))
    errors: np.ndarray       # statistical errors, zero where not applicable
    mask: list               # per-cell reason code
    totals: dict
    warnings: list
    complete: bool
    provenance: dict


def _columns_for(observable: str) -> list:
    if observable == "rate_map":
        return [ColumnSpec("rate", "1/(s sr^2 MeV)")]
    if observable == "rate_curve":
        return [ColumnSpec("rate", "1/(s rad)"),
                ColumnSpec("rate_weak_field", "1/(s rad)")]
    if observable == "concurrence_map":
        return [ColumnSpec("concurrence", "dimensionless"),
                ColumnSpec("log10_rate", "log10 of 1/(s sr^2 MeV)")]
    if observable == "totals":
        return [ColumnSpec("rate", "1/s")]
    raise ValueError(f"unknown observable {observable!r}")


def _cell_axes(cfg: ScanConfig):
    """Axis metadata and per-cell coordinate columns (row-major)."""
    axes = cfg.scan.axes
    if cfg.scan.observable == "totals":
        names = ["quantity"]
        units_ = [""]
        cells = [np.asarray(TOTALS_QUANTITIES, dtype=object)]
        return names, units_, cells, len(TOTALS_QUANTITIES)
    grids = [a.grid() for a in axes]
    names = [a.name for a in axes]
    units_ = ["MeV" if a.name == "omega_b" else "rad" for a in axes]
    if grids:
        mesh = np.meshgrid(*grids, indexing="ij")
        cells = [m.reshape(-1) for m in mesh]
        n_cells = cells[0].size
    else:
        cells, n_cells = [], 1
    return names, units_, cells, n_cells


def _point_coords(cfg: ScanConfig, n_cells: int):
    """Full coordinate arrays for map observables, axes substituted in."""
    s = cfg.scan
    coords = {
        "omega_b": np.full(n_cells, s.omega_b),
        "theta_b": np.full(n_cells, s.theta_b),
        "psi_b": np.full(n_cells, s.psi_b),
        "theta_c": np.full(n_cells, s.theta_c),
        "psi_c": np.full(n_cells, s.psi_c),
    }
    names, _, cells, _ = _cell_axes(cfg)
    for name, col in zip(names, cells):
        coords[name] = np.asarray(col, dtype=float)
    return coords


# ---------------------------------------------------------------------------
# per-process context for batched map evaluation
# ---------------------------------------------------------------------------


class _MapContext:
    def __init__(self, cfg: ScanConfig):
        self.cfg = cfg
        p = cfg.physics
        laser = p.laser()
        settings = EngineSettings(resonance_threshold=p.resonance_threshold)
        if cfg.scan.perturbative:
            self.engine, self.rescale = perturbative_engine(
                laser, p.electron_energy, settings=settings)
            self.n_values = np.array([1])
        else:
            electron = head_on_electron(p.electron_energy, laser)
            self.engine = AmplitudeEngine(laser, electron, settings=settings)
            self.rescale = 1.0
            self.n_values = np.arange(1, p.n_max + 1)
        pol = cfg.scan.polarization
        self.pol = None if pol == "summed" else (int(pol[0]) - 1,
                                                 int(pol[1]) - 1)
        _, _, _, n_cells = _cell_axes(cfg)
        self.coords = _point_coords(cfg, n_cells)


_CTX_CACHE: dict = {}


def _context(text: str) -> _MapContext:
    ctx = _CTX_CACHE.get(text)
    if ctx is None:
        ctx = _MapContext(parse_config(text))
        _CTX_CACHE[text] = ctx
    return ctx


def _rate_cells(ctx: _MapContext, idx: np.ndarray):
    c = ctx.coords
    res = differential_rate_batch(
        ctx.engine, ctx.n_values,
        ev(c["omega_b"][idx] * 1e6), c["theta_b"][idx], c["psi_b"][idx],
        c["theta_c"][idx], c["psi_c"][idx], pol=ctx.pol,
    )
    vals = (res["total"] * _SI_DENSITY * ctx.rescale)[:, None]
    mask = np.where(~res["open"], MASK_CLOSED,
                    np.where(res["excluded"], MASK_RESONANT, MASK_OK))
    return vals, np.zeros_like(vals), list(mask)


def _concurrence_cells(ctx: _MapContext, idx: np.ndarray):
    c = ctx.coords
    out = concurrence_map(
        ctx.engine, ctx.n_values,
        ev(c["omega_b"][idx] * 1e6), c["theta_b"][idx], c["psi_b"][idx],
        c["theta_c"][idx], c["psi_c"][idx],
    )
    rate_si = out["rate"] * _SI_DENSITY * ctx.rescale
    log_rate = np.where(rate_si > 0.0,
                        np.log10(np.where(rate_si > 0.0, rate_si, 1.0)),
                        np.nan)
    conc = np.where(out["mask"], np.nan, out["concurrence"])
    vals = np.stack([conc, log_rate], axis=1)
    mask = np.where(~out["mask"], MASK_OK,
                    np.where(rate_si > 0.0, MASK_FAILED, MASK_CLOSED))
    return vals, np.zeros_like(vals), list(mask)


_MAP_EVAL = {
    "rate_map": _rate_cells,
    "concurrence_map": _concurrence_cells,
}


def _map_block_worker(payload):
    """Evaluate one block of map cells; falls back per cell on failure."""
    text, observable, idx = payload
    ctx = _context(text)
    evaluate = _MAP_EVAL[observable]
    idx = np.asarray(idx, dtype=int)
    try:
        vals, errs, mask = evaluate(ctx, idx)
    except Exception:
        n_cols = len(_columns_for(observable))
        vals = np.full((idx.size, n_cols), np.nan)
        errs = np.zeros_like(vals)
        mask = [MASK_FAILED] * idx.size
        for j in range(idx.size):
            try:
                v, e, m = evaluate(ctx, idx[j:j + 1])
            except Exception:
                continue
            vals[j], errs[j], mask[j] = v[0], e[0], m[0]
    return vals, errs, mask, {}


# ---------------------------------------------------------------------------
# integrated observables (one cell at a time, MC pool inside)
# ---------------------------------------------------------------------------


def _curve_cell(cfg: ScanConfig, i: int, theta_c: float):
    p, e = cfg.physics, cfg.execution
    laser = p.laser()
    cuts = cfg.cuts.to_phase_space()
    settings = EngineSettings(resonance_threshold=p.resonance_threshold)
    full = rate_curve_theta_c(
        laser, p.electron_energy, [theta_c], cuts=cuts, n_max=p.n_max,
        samples=e.samples, seed=e.seed + 7919 * i, workers=e.workers,
        settings=settings,
    )
    weak = rate_curve_theta_c(
        laser.with_xi(laser.xi * 1e-3), p.electron_energy, [theta_c],
        cuts=cuts, n_max=1, samples=e.samples,
        seed=e.seed + 7919 * i + WEAK_SEED_OFFSET, workers=e.workers,
        dressed=False, rescale=1e6, settings=settings,
    )
    vals = np.array([[full["value"][0], weak["value"][0]]])
    errs = np.array([[full["stderr"][0], weak["stderr"][0]]])
    return vals, errs, [MASK_OK], {}


def _totals_cell(cfg: ScanConfig, i: int):
    p, e = cfg.physics, cfg.execution
    laser = p.laser()
    cuts = cfg.cuts.to_phase_space()
    settings = EngineSettings(resonance_threshold=p.resonance_threshold)
    quantity = TOTALS_QUANTITIES[i]
    if quantity == "pair_rate":
        res = total_rate(laser, p.electron_energy, cuts=cuts, n_max=p.n_max,
                         samples=e.samples, seed=e.seed, workers=e.workers,
                         settings=settings)
        return (np.array([[res.value]]), np.array([[res.stderr]]), [MASK_OK],
                {"tail_fraction": res.tail_fraction,
                 "excluded_fraction": res.excluded_fraction})
    if quantity == "pair_rate_weak_field":
        res = total_rate(laser.with_xi(laser.xi * 1e-3), p.electron_energy,
                         cuts=cuts, n_max=1, samples=e.samples,
                         seed=e.seed + WEAK_SEED_OFFSET, workers=e.workers,
                         dressed=False, rescale=1e6, settings=settings)
        return np.array([[res.value]]), np.array([[res.stderr]]), [MASK_OK], {}
    value = single_compton_total_rate(laser, p.electron_energy,
                                      settings=settings)
    return np.array([[value]]), np.array([[0.0]]), [MASK_OK], {}


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------


def _atomic_write_json(path: str, obj) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
    os.replace(tmp, path)


def _save_checkpoint(path, digest, blocks_done):
    _atomic_write_json(path, {
        "digest": digest,
        "blocks": {
            str(b): {"values": v.tolist(), "errors": e.tolist(),
                     "mask": [str(code) for code in m], "extra": extra}
            for b, (v, e, m, extra) in blocks_done.items()
        },
    })


def _load_checkpoint(path, digest, warnings):
    if not path or not os.path.exists(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        warnings.append(f"checkpoint {path!r} unreadable; starting fresh")
        return {}
    if data.get("digest") != digest:
        warnings.append(f"checkpoint {path!r} belongs to a different config; "
                        "starting fresh")
        return {}
    out = {}
    for key, blk in data.get("blocks", {}).items():
        out[int(key)] = (np.asarray(blk["values"], dtype=float),
                         np.asarray(blk["errors"], dtype=float),
                         list(blk["mask"]), blk.get("extra", {}))
    return out


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _curve_totals(cfg, grid, values, errors):
    """Trapezoid totals over the theta_c curve, both calculations."""
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    vals = np.nan_to_num(values)
    errs = np.nan_to_num(errors)
    full = float(w @ vals[:, 0])
    weak = float(w @ vals[:, 1])
    full_err = float(np.sqrt((w**2 @ errs[:, 0]**2)))
    weak_err = float(np.sqrt((w**2 @ errs[:, 1]**2)))
    out = {
        "pair_rate": full,
        "pair_rate_stderr": full_err,
        "pair_rate_weak_field": weak,
        "pair_rate_weak_field_stderr": weak_err,
        "pairs_per_shot": pairs_per_shot(full, BUNCH_ELECTRONS,
                                         PULSE_DURATION_S),
    }
    if weak > 0:
        out["rate_ratio"] = full / weak
    return out


def run_scan(cfg: ScanConfig, *, stop_after: int | None = None,
             log=None) -> ScanResult:
    """Execute a scan; returns the (possibly partial) result.

    stop_after limits how many additional blocks this call computes,
    leaving the rest pending in the checkpoint; it exists so operational
    interruptions (and tests of them) do not need signal games.  log is
    an optional callable for progress lines.
    """
    # everything derived from the config text (worker payloads, digest,
    # embedded provenance) uses the digest-normalized form so that byte
    # identity holds across worker counts and output locations
    text = serialize_config(normalized_for_digest(cfg))
    digest = config_hash(cfg)
    observable = cfg.scan.observable
    columns = _columns_for(observable)
    axis_names, axis_units, cell_axes, n_cells = _cell_axes(cfg)

    if observable in _MAP_EVAL:
        n_blocks = max(1, math.ceil(n_cells / MAP_BLOCK))
        blocks = np.array_split(np.arange(n_cells), n_blocks)
    else:
        blocks = [np.array([i]) for i in range(n_cells)]

    warnings = []
    ckpt_path = cfg.execution.checkpoint
    blocks_done = _load_checkpoint(ckpt_path, digest, warnings)

    pending = [b for b in range(len(blocks)) if b not in blocks_done]
    if stop_after is not None:
        pending = pending[:max(stop_after, 0)]

    def note(msg):
        if log is not None:
            log(msg)

    if observable in _MAP_EVAL and cfg.execution.workers > 1 and len(pending) > 1:
        payloads = [(text, observable, blocks[b].tolist()) for b in pending]
        with ProcessPoolExecutor(max_workers=cfg.execution.workers) as pool:
            for b, result in zip(pending, pool.map(_map_block_worker, payloads)):
                blocks_done[b] = result
                if ckpt_path:
                    _save_checkpoint(ckpt_path, digest, blocks_done)
                note(f"block {b + 1}/{len(blocks)} done")
    else:
        for b in pending:
            if observable in _MAP_EVAL:
                result = _map_block_worker((text, observable,
                                            blocks[b].tolist()))
            elif observable == "rate_curve":
                theta = float(cell_axes[0][blocks[b][0]])
                result = _curve_cell(cfg, int(blocks[b][0]), theta)
            else:
                result = _totals_cell(cfg, int(blocks[b][0]))
            blocks_done[b] = result
            if ckpt_path:
                _save_checkpoint(ckpt_path, digest, blocks_done)
            note(f"block {b + 1}/{len(blocks)} done")

    values = np.full((n_cells, len(columns)), np.nan)
    errors = np.zeros((n_cells, len(columns)))
    mask = [MASK_PENDING] * n_cells
    totals_extra = {}
    for b, (vals, errs, mcodes, extra) in blocks_done.items():
        idx = blocks[b]
        values[idx] = vals
        errors[idx] = errs
        totals_extra.update(extra)
        for j, cell in enumerate(idx):
            mask[cell] = mcodes[j]

    complete = len(blocks_done) == len(blocks)
    totals = {}
    if complete:
        if observable == "rate_curve":
            totals = _curve_totals(cfg, np.asarray(cell_axes[0], dtype=float),
                                   values, errors)
        elif observable == "totals":
            full, weak, single = values[:, 0]
            totals = {
                "pair_rate": float(full),
                "pair_rate_stderr": float(errors[0, 0]),
                "pair_rate_weak_field": float(weak),
                "pair_rate_weak_field_stderr": float(errors[1, 0]),
                "one_photon_rate": float(single),
                "pairs_per_shot": pairs_per_shot(float(full), BUNCH_ELECTRONS,
                                                 PULSE_DURATION_S),
            }
            if weak > 0:
                totals["rate_ratio"] = float(full / weak)
            totals.update(totals_extra)
        if ckpt_path and os.path.exists(ckpt_path):
            os.remove(ckpt_path)

    # statistical-quality advisory for integrated observables
    if complete and observable in ("rate_curve", "totals"):
        rel = np.nan_to_num(
            np.abs(errors) / np.where(np.abs(values) > 0, np.abs(values), 1.0))
        bad = np.argwhere(rel > cfg.execution.tolerance)
        if bad.size:
            worst = np.unravel_index(np.argmax(rel), rel.shape)
            warnings.append(
                f"{len(np.unique(bad[:, 0]))} cell(s) above the relative "
                f"error tolerance {cfg.execution.tolerance}; worst is cell "
                f"{worst[0]} ({columns[worst[1]].name})")

    provenance = {
        "package": "dcompton",
        "version": _package_version(),
        "config_digest": digest,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    return ScanResult(
        config=cfg,
        config_text=text,
        config_digest=digest,
        observable=observable,
        axis_names=axis_names,
        axis_units=axis_units,
        cell_axes=cell_axes,
        columns=columns,
        values=values,
        errors=errors,
        mask=mask,
        totals=totals,
        warnings=warnings,
        complete=complete,
        provenance=provenance,
    )


def _package_version() -> str:
    from . import __version__

    return __version__


__all__ = [
    "BUNCH_ELECTRONS",
    "ColumnSpec",
    "MASK_CLOSED",
    "MASK_FAILED",
    "MASK_OK",
    "MASK_PENDING",
    "MASK_RESONANT",
    "PULSE_DURATION_S",
    "ScanResult",
    "TOTALS_QUANTITIES",
    "run_scan",
]
