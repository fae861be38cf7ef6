"""Config grammar, scan runner, output files and the command-line driver."""

import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcompton import cli, units
from dcompton.config import (
    AXIS_NAMES,
    AxisSpec,
    ConfigError,
    CutsBlock,
    ExecutionBlock,
    OutputBlock,
    PhysicsBlock,
    ScanBlock,
    ScanConfig,
    config_hash,
    normalized_for_digest,
    parse_config,
    serialize_config,
    with_overrides,
)
from dcompton.output import load_sidecar, render_csv, render_sidecar, write_result
from dcompton.presets import PRESETS, preset_config, preset_text
from dcompton.runner import (
    MASK_CLOSED,
    MASK_OK,
    MASK_PENDING,
    run_scan,
)

TINY_MAP = """\
physics {
  electron_energy = 1000.0 m_e
  laser_omega = 2.5 eV
  xi = 1.0
  n_max = 2
}
scan {
  observable = rate_map
  omega_b = 1.0 MeV
  theta_b = 1.0 mrad
  theta_c = 1.0 mrad
  axis {
    name = psi_b
    range = 0.0 .. 6.0 rad
    points = 3
  }
  axis {
    name = psi_c
    range = 0.0 .. 6.0 rad
    points = 3
  }
}
"""

TINY_CURVE = """\
physics {
  electron_energy = 1000.0 m_e
  laser_omega = 2.5 eV
  xi = 1.0
  n_max = 1
}
cuts {
  omega_b = 0.1 .. 0.5 MeV
  theta_b = 0.0002 .. 0.0008 rad
  theta_c = 0.0 .. 0.0015 rad
}
scan {
  observable = rate_curve
  axis {
    name = theta_c
    range = 0.0004 .. 0.0012 rad
    points = 3
  }
}
execution {
  samples = 64
  seed = 11
  checkpoint = curve.ckpt
}
output {
  path = curve
}
"""


# ---------------------------------------------------------------------------
# grammar and units
# ---------------------------------------------------------------------------


def test_parse_defaults_from_empty_text():
    cfg = parse_config("")
    assert cfg == ScanConfig()
    assert cfg.scan.observable == "totals"


def test_unit_conversions():
    cfg = parse_config("""\
physics {
  electron_energy = 0.511 GeV
  laser_omega = 0.0000025 MeV
}
cuts {
  omega_b = 1.0 keV .. 1.0 MeV
  theta_b = 0.0 .. 1.5 mrad
}
scan {
  observable = totals
  omega_b = 1000 keV
  theta_b = 0.5 mrad
}
""")
    assert cfg.physics.electron_energy == pytest.approx(
        0.511e9 / units.ELECTRON_MASS_EV
    )
    assert cfg.physics.laser_omega == pytest.approx(2.5)
    assert cfg.cuts.omega_b == pytest.approx((1e-3, 1.0))
    # one trailing unit distributes over both range endpoints
    assert cfg.cuts.theta_b == pytest.approx((0.0, 1.5e-3))
    assert cfg.scan.omega_b == pytest.approx(1.0)
    assert cfg.scan.theta_b == pytest.approx(5e-4)


def test_cuts_block_to_phase_space():
    ps = CutsBlock(omega_b=(0.01, 0.7), theta_b=(1e-4, 1e-3)).to_phase_space()
    assert ps.omega_b_lo == pytest.approx(units.ev(0.01e6))
    assert ps.omega_b_hi == pytest.approx(units.ev(0.7e6))
    assert ps.theta_b_lo == 1e-4 and ps.theta_b_hi == 1e-3


def test_missing_and_unknown_units_are_line_anchored():
    text = "physics {\n  laser_omega = 2.5\n  electron_energy = 5.0 sec\n}\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    lines = {line for line, _ in err.value.errors}
    assert 2 in lines and 3 in lines
    rendered = err.value.format_errors()
    assert any(msg.startswith("line 2: ") and "unit required" in msg
               for msg in rendered)
    assert any(msg.startswith("line 3: ") and "unknown unit" in msg
               for msg in rendered)


def test_all_problems_reported_together():
    text = """\
physics {
  xi = -1.0
  mystery = 3
}
orbit {
}
scan {
  observable = rate_map
}
"""
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    messages = "\n".join(err.value.format_errors())
    assert "unknown key 'mystery'" in messages
    assert "unknown block 'orbit'" in messages
    assert "xi must be positive" in messages
    assert "takes exactly 2 axis block(s), got 0" in messages
    # line-anchored entries come first, sorted by line
    anchored = [line for line, _ in err.value.errors if line]
    assert anchored == sorted(anchored)


def test_structural_errors():
    with pytest.raises(ConfigError, match="never closed"):
        parse_config("physics {\n")
    with pytest.raises(ConfigError, match="unmatched"):
        parse_config("}\n")
    with pytest.raises(ConfigError, match="outside any block"):
        parse_config("xi = 1.0\n")
    with pytest.raises(ConfigError, match="appears twice"):
        parse_config("physics {\n}\nphysics {\n}\n")
    with pytest.raises(ConfigError, match="repeated"):
        parse_config("physics {\n  xi = 1.0\n  xi = 2.0\n}\n")
    with pytest.raises(ConfigError, match="cannot parse line"):
        parse_config("physics {\n  what even is this\n}\n")
    with pytest.raises(ConfigError, match="not allowed here"):
        parse_config("physics {\n  axis {\n  }\n}\n")


def test_axis_validation():
    base = "scan {{\n  observable = rate_map\n{axes}}}\n"
    ax = ("  axis {{\n    name = {name}\n    range = {rng}\n"
          "    points = {pts}\n  }}\n")

    def cfg_text(*axes):
        return base.format(axes="".join(axes))

    good_b = ax.format(name="psi_b", rng="0.0 .. 6.2 rad", pts=4)
    good_c = ax.format(name="psi_c", rng="0.0 .. 6.2 rad", pts=4)
    parse_config(cfg_text(good_b, good_c))  # sanity: this one is fine

    with pytest.raises(ConfigError, match="points must be >= 2"):
        parse_config(cfg_text(
            good_b, ax.format(name="psi_c", rng="0.0 .. 6.2 rad", pts=1)))
    with pytest.raises(ConfigError, match="must be ordered"):
        parse_config(cfg_text(
            good_b, ax.format(name="psi_c", rng="6.0 .. 1.0 rad", pts=4)))
    with pytest.raises(ConfigError, match="must be one of"):
        parse_config(cfg_text(
            good_b, ax.format(name="frequency", rng="0.0 .. 1.0 rad", pts=4)))
    with pytest.raises(ConfigError, match="axis names must be distinct"):
        parse_config(cfg_text(good_b, good_b))
    with pytest.raises(ConfigError, match=r"within \[0, 2pi\]"):
        parse_config(cfg_text(
            good_b, ax.format(name="psi_c", rng="0.0 .. 9.0 rad", pts=4)))
    with pytest.raises(ConfigError, match="needs a range"):
        parse_config(
            "scan {\n  observable = rate_curve\n  axis {\n"
            "    name = theta_c\n    points = 4\n  }\n}\n")
    with pytest.raises(ConfigError, match="rate_curve scans theta_c"):
        parse_config(
            "scan {\n  observable = rate_curve\n  axis {\n"
            "    name = theta_b\n    range = 0.0 .. 1.0 mrad\n"
            "    points = 4\n  }\n}\n")


def test_semantic_validation():
    checks = [
        ("physics {\n  electron_energy = 0.5 m_e\n}\n", "exceed the electron"),
        ("physics {\n  n_max = 0\n}\n", "n_max"),
        ("cuts {\n  omega_b = 0.0 .. 1.0 MeV\n}\n", "lower edge"),
        ("execution {\n  workers = 0\n}\n", "workers"),
        ("execution {\n  samples = 8\n}\n", "samples"),
        ("execution {\n  seed = -4\n}\n", "seed"),
        ("output {\n  precision = 20\n}\n", "precision"),
        ("output {\n  format = yaml\n}\n", "must be one of"),
    ]
    for text, needle in checks:
        with pytest.raises(ConfigError, match=needle):
            parse_config(text)


def test_comments_and_blank_lines_ignored():
    cfg = parse_config(
        "# leading comment\n\nphysics {\n  xi = 2.0  # inline\n\n}\n")
    assert cfg.physics.xi == 2.0


# ---------------------------------------------------------------------------
# serialization round trip
# ---------------------------------------------------------------------------


_FLOAT = dict(allow_nan=False, allow_infinity=False)


@st.composite
def scan_configs(draw):
    physics = PhysicsBlock(
        electron_energy=draw(st.floats(min_value=2.0, max_value=1e5, **_FLOAT)),
        laser_omega=draw(st.floats(min_value=0.1, max_value=100.0, **_FLOAT)),
        xi=draw(st.floats(min_value=1e-3, max_value=20.0, **_FLOAT)),
        n_max=draw(st.integers(1, 60)),
        resonance_threshold=draw(st.floats(min_value=1e-6, max_value=1.0, **_FLOAT)),
    )
    lo = draw(st.floats(min_value=1e-4, max_value=0.5, **_FLOAT))
    cuts = CutsBlock(
        omega_b=(lo, lo + draw(st.floats(min_value=1e-3, max_value=2.0, **_FLOAT))),
        theta_b=(0.0, draw(st.floats(min_value=1e-4, max_value=3e-3, **_FLOAT))),
        theta_c=(0.0, draw(st.floats(min_value=1e-4, max_value=3e-3, **_FLOAT))),
    )
    observable = draw(st.sampled_from(
        ("rate_map", "concurrence_map", "rate_curve", "totals")))

    def axis(name):
        if name == "omega_b":
            a = draw(st.floats(min_value=1e-3, max_value=1.0, **_FLOAT))
            b = a + draw(st.floats(min_value=1e-3, max_value=3.0, **_FLOAT))
        elif name.startswith("theta"):
            a = draw(st.floats(min_value=0.0, max_value=1e-3, **_FLOAT))
            b = a + draw(st.floats(min_value=1e-5, max_value=2e-3, **_FLOAT))
        else:
            a = draw(st.floats(min_value=0.0, max_value=1.0, **_FLOAT))
            b = a + draw(st.floats(min_value=1e-3, max_value=5.0, **_FLOAT))
        return AxisSpec(name=name, lo=a, hi=b, points=draw(st.integers(2, 64)))

    if observable in ("rate_map", "concurrence_map"):
        names = draw(st.permutations(AXIS_NAMES))[:2]
        axes = tuple(axis(n) for n in names)
    elif observable == "rate_curve":
        axes = (axis("theta_c"),)
    else:
        axes = ()
    scan = ScanBlock(
        observable=observable,
        polarization=draw(st.sampled_from(("summed", "11", "12", "21", "22"))),
        perturbative=draw(st.booleans()),
        omega_b=draw(st.floats(min_value=1e-3, max_value=4.0, **_FLOAT)),
        theta_b=draw(st.floats(min_value=0.0, max_value=3e-3, **_FLOAT)),
        theta_c=draw(st.floats(min_value=0.0, max_value=3e-3, **_FLOAT)),
        psi_b=draw(st.floats(min_value=0.0, max_value=6.28, **_FLOAT)),
        psi_c=draw(st.floats(min_value=0.0, max_value=6.28, **_FLOAT)),
        axes=axes,
    )
    execution = ExecutionBlock(
        workers=draw(st.integers(1, 16)),
        seed=draw(st.integers(0, 2**31)),
        samples=draw(st.integers(16, 1 << 20)),
        tolerance=draw(st.floats(min_value=1e-4, max_value=1.0, **_FLOAT)),
        checkpoint=draw(st.sampled_from(("", "state.ckpt", "runs/a.ckpt"))),
    )
    output = OutputBlock(
        format="csv",
        path=draw(st.sampled_from(("scan", "out/result", "x_1"))),
        precision=draw(st.integers(3, 17)),
    )
    return ScanConfig(physics=physics, cuts=cuts, scan=scan,
                      execution=execution, output=output)


@settings(max_examples=60, deadline=None)
@given(scan_configs())
def test_serialize_parse_fixed_point(cfg):
    text = serialize_config(cfg)
    parsed = parse_config(text)
    assert parsed == cfg
    assert serialize_config(parsed) == text


def test_presets_parse_and_round_trip():
    for name in PRESETS:
        cfg = preset_config(name)
        assert parse_config(serialize_config(cfg)) == cfg


def test_digest_ignores_execution_only_knobs():
    cfg = preset_config("fig2")
    same = [
        with_overrides(cfg, workers=7),
        with_overrides(cfg, out="elsewhere/result"),
    ]
    for variant in same:
        assert config_hash(variant) == config_hash(cfg)
        assert normalized_for_digest(variant) == normalized_for_digest(cfg)
    assert config_hash(with_overrides(cfg, seed=999)) != config_hash(cfg)
    assert config_hash(with_overrides(cfg, resolution=5)) != config_hash(cfg)


def test_with_overrides():
    cfg = preset_config("fig2")
    out = with_overrides(cfg, workers=3, seed=42, resolution=8,
                         perturbative=True, out="here")
    assert out.execution.workers == 3
    assert out.execution.seed == 42
    assert all(a.points == 8 for a in out.scan.axes)
    assert out.scan.perturbative
    assert out.output.path == "here"
    with pytest.raises(ConfigError, match="resolution"):
        with_overrides(cfg, resolution=1)


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------


def test_rate_map_scan_and_worker_byte_identity():
    cfg = parse_config(TINY_MAP)
    res1 = run_scan(cfg)
    assert res1.complete
    assert res1.values.shape == (9, 1)
    assert all(code == MASK_OK for code in res1.mask)
    assert np.all(res1.values >= 0.0)

    res2 = run_scan(with_overrides(cfg, workers=2))
    assert render_csv(res2) == render_csv(res1)
    assert render_sidecar(res2) == render_sidecar(res1)


def test_rate_map_marks_closed_cells():
    text = TINY_MAP.replace("n_max = 2", "n_max = 1").replace(
        """\
  axis {
    name = psi_b
    range = 0.0 .. 6.0 rad
    points = 3
  }
""",
        """\
  axis {
    name = omega_b
    range = 2.0 .. 6.0 MeV
    points = 3
  }
""")
    res = run_scan(parse_config(text))
    assert res.complete
    codes = set(res.mask)
    assert MASK_OK in codes and MASK_CLOSED in codes
    closed = [i for i, code in enumerate(res.mask) if code == MASK_CLOSED]
    assert np.all(res.values[closed] == 0.0)


def test_concurrence_map_scan():
    text = TINY_MAP.replace("observable = rate_map",
                            "observable = concurrence_map")
    res = run_scan(parse_config(text))
    assert res.complete
    assert [c.name for c in res.columns] == ["concurrence", "log10_rate"]
    conc = res.values[:, 0]
    assert np.all((conc >= 0.0) & (conc <= 1.0))
    assert np.all(np.isfinite(res.values[:, 1]))


def test_curve_checkpoint_interrupt_and_resume(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = parse_config(TINY_CURVE)

    partial = run_scan(cfg, stop_after=1)
    assert not partial.complete
    assert partial.mask.count(MASK_PENDING) == 2
    assert partial.totals == {}
    assert os.path.exists("curve.ckpt")

    resumed = run_scan(cfg)
    assert resumed.complete
    assert not os.path.exists("curve.ckpt")  # consumed on completion
    assert "pair_rate" in resumed.totals
    assert "rate_ratio" in resumed.totals
    assert "pairs_per_shot" in resumed.totals

    fresh = run_scan(cfg)
    assert np.array_equal(resumed.values, fresh.values)
    assert np.array_equal(resumed.errors, fresh.errors)
    # trapezoid consistency of the reported total
    grid = np.asarray(resumed.cell_axes[0], dtype=float)
    assert resumed.totals["pair_rate"] == pytest.approx(
        float(np.trapezoid(resumed.values[:, 0], grid)), rel=1e-12)


def test_checkpoint_digest_mismatch_starts_fresh(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = parse_config(TINY_CURVE)
    run_scan(cfg, stop_after=1)
    assert os.path.exists("curve.ckpt")

    changed = with_overrides(cfg, seed=12345)
    res = run_scan(changed, stop_after=0)
    assert any("different config" in w for w in res.warnings)
    assert res.mask.count(MASK_PENDING) == 3


def test_checkpoint_unreadable_starts_fresh(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with open("curve.ckpt", "w") as fh:
        fh.write("not json at all {")
    res = run_scan(parse_config(TINY_CURVE), stop_after=0)
    assert any("unreadable" in w for w in res.warnings)


def test_totals_scan_partial_structure(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    text = """\
physics {
  n_max = 2
}
execution {
  samples = 64
  checkpoint = totals.ckpt
}
"""
    res = run_scan(parse_config(text), stop_after=1)
    assert not res.complete
    assert res.mask[0] == MASK_OK
    assert res.mask[1] == MASK_PENDING and res.mask[2] == MASK_PENDING
    assert np.isfinite(res.values[0, 0]) and res.values[0, 0] > 0
    assert list(res.cell_axes[0]) == ["pair_rate", "pair_rate_weak_field",
                                      "one_photon_rate"]


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_result():
    return run_scan(parse_config(TINY_MAP))


def test_csv_shape_and_precision(tiny_result):
    text = render_csv(tiny_result)
    lines = text.strip().splitlines()
    assert lines[0] == "# dcompton scan result"
    header_idx = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
    header = lines[header_idx].split(",")
    assert header == ["psi_b", "psi_c", "rate", "rate_error", "mask"]
    rows = lines[header_idx + 1:]
    data_rows = [r for r in rows if not r.startswith("#")]
    assert len(data_rows) == 9
    first = data_rows[0].split(",")
    # 12 significant-digit scientific notation by default
    assert "e" in first[2] and len(first[2].split("e")[0].split(".")[1]) == 12
    value = float(first[2])
    assert value == pytest.approx(tiny_result.values[0, 0], rel=1e-11)
    assert first[-1] == MASK_OK


def test_sidecar_round_trip(tmp_path, tiny_result):
    base = str(tmp_path / "nested" / "run")
    paths = write_result(tiny_result, base)
    assert sorted(paths) == ["csv", "json"]
    doc = load_sidecar(base)  # base path without .json also accepted
    assert doc["observable"] == "rate_map"
    assert doc["config_digest"] == tiny_result.config_digest
    assert np.allclose(doc["cells"]["values"], tiny_result.values)
    assert doc["cells"]["mask"] == list(tiny_result.mask)
    grids = doc["axes"]
    assert [a["name"] for a in grids] == ["psi_b", "psi_c"]
    assert len(grids[0]["values"]) == 3
    # embedded config text reproduces the digest-normalized config
    assert parse_config(doc["config"]) == normalized_for_digest(
        tiny_result.config)


def test_sidecar_rejects_foreign_json(tmp_path):
    path = tmp_path / "alien.json"
    path.write_text(json.dumps({"format": "someone-else/9"}))
    with pytest.raises(ValueError, match="not a scan result"):
        load_sidecar(str(path))


def test_write_result_rejects_unknown_format(tiny_result):
    from dataclasses import replace

    bad = replace(tiny_result,
                  config=replace(tiny_result.config,
                                 output=OutputBlock(format="parquet")))
    with pytest.raises(ValueError, match="unsupported output format"):
        write_result(bad, "nowhere")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def test_cli_preset_list(capsys):
    assert cli.main(["preset", "list"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for name in ("fig2", "fig3", "fig4", "totals"):
        assert name in out


def test_cli_validate_preset(capsys):
    assert cli.main(["validate", "--preset", "fig2"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert parse_config(out) == preset_config("fig2")


def test_cli_validate_bad_config(tmp_path, capsys):
    path = tmp_path / "broken.cfg"
    path.write_text("physics {\n  laser_omega = fast\n}\n")
    assert cli.main(["validate", "--config", str(path)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error: line 2:" in err


def test_cli_requires_exactly_one_source(tmp_path, capsys):
    assert cli.main(["validate"]) == cli.EXIT_CONFIG
    assert cli.main(["validate", "--preset", "fig2", "--config",
                     str(tmp_path / "x.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["validate", "--preset", "nonsense"]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "available" in err


def test_cli_missing_config_file(capsys):
    assert cli.main(["validate", "--config", "/does/not/exist.cfg"]) \
        == cli.EXIT_CONFIG
    assert "cannot read" in capsys.readouterr().err


def test_cli_scan_then_report(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_MAP)
    base = str(tmp_path / "run")
    assert cli.main(["scan", "--config", str(cfg_path), "--out", base]) \
        == cli.EXIT_OK
    out = capsys.readouterr().out
    assert f"wrote {base}.csv" in out
    assert f"wrote {base}.json" in out
    assert os.path.exists(base + ".csv") and os.path.exists(base + ".json")

    assert cli.main(["report", base + ".json"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "observable: rate_map" in out
    assert "dressed mass m_*" in out
    assert "chi" in out
    assert f"wrote {base}.png" in out
    assert os.path.exists(base + ".png")


def test_cli_scan_override_errors(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_MAP)
    assert cli.main(["scan", "--config", str(cfg_path), "--resolution", "1",
                     "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG
    assert "--resolution" in capsys.readouterr().err


def test_cli_report_missing_result(capsys):
    assert cli.main(["report", "/no/such/result"]) == cli.EXIT_RUNTIME
    assert "error:" in capsys.readouterr().err


def test_cli_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == cli.EXIT_CONFIG
    capsys.readouterr()
