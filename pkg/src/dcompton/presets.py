"""Built-in scan presets for the standard backscattering setup.

Every preset uses the reference beam: a 511 MeV electron (E_i = 1000 m)
colliding head-on with a linearly polarized 2.5 eV laser at xi = 1.  The
presets differ in which observable they map and over which coordinates.
"""

from dataclasses import dataclass

from .config import ScanConfig, parse_config


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    text: str


_PHYSICS = """\
physics {
  electron_energy = 1000.0 m_e
  laser_omega = 2.5 eV
  xi = 1.0
  n_max = 25
  resonance_threshold = 0.001
}
"""

_CUTS = """\
cuts {
  omega_b = 0.001 .. 1.0 MeV
  theta_b = 0.0 .. 0.0015 rad
  theta_c = 0.0 .. 0.0015 rad
}
"""

_FIG2 = _PHYSICS + _CUTS + """\
scan {
  observable = rate_map
  polarization = 11
  omega_b = 1.0 MeV
  theta_b = 0.001 rad
  theta_c = 0.001 rad
  axis {
    name = psi_b
    range = 0.0 .. 6.283185307179586 rad
    points = 32
  }
  axis {
    name = psi_c
    range = 0.0 .. 6.283185307179586 rad
    points = 32
  }
}
execution {
  seed = 20260814
}
output {
  path = fig2
}
"""

_FIG3 = _PHYSICS + _CUTS + """\
scan {
  observable = rate_curve
  axis {
    name = theta_c
    range = 0.0 .. 0.0015 rad
    points = 16
  }
}
execution {
  seed = 20260814
  samples = 4096
  checkpoint = fig3.ckpt
}
output {
  path = fig3
}
"""

_FIG4 = _PHYSICS + _CUTS + """\
scan {
  observable = concurrence_map
  omega_b = 1.0 MeV
  psi_b = 0.0 rad
  psi_c = 0.0 rad
  axis {
    name = theta_b
    range = 0.0001 .. 0.0015 rad
    points = 32
  }
  axis {
    name = theta_c
    range = 0.0001 .. 0.0015 rad
    points = 32
  }
}
execution {
  seed = 20260814
}
output {
  path = fig4
}
"""

_TOTALS = _PHYSICS + _CUTS + """\
scan {
  observable = totals
}
execution {
  seed = 20260814
  samples = 16384
  checkpoint = totals.ckpt
}
output {
  path = totals
}
"""

PRESETS = {
    "fig2": Preset(
        name="fig2",
        description="fixed-polarization rate map over the two emission "
                    "azimuths at omega_b = 1 MeV, theta_b = theta_c = 1 mrad",
        text=_FIG2,
    ),
    "fig3": Preset(
        name="fig3",
        description="rate differential in theta_c (integrated over the "
                    "other photon's window), full and weak-field curves "
                    "plus integrated totals",
        text=_FIG3,
    ),
    "fig4": Preset(
        name="fig4",
        description="concurrence and log10 rate-density maps over the two "
                    "polar angles at omega_b = 1 MeV, psi_b = psi_c = 0",
        text=_FIG4,
    ),
    "totals": Preset(
        name="totals",
        description="integrated pair rate with weak-field reference, "
                    "one-photon benchmark and pairs-per-shot estimate",
        text=_TOTALS,
    ),
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_text(name: str) -> str:
    try:
        return PRESETS[name].text
    except KeyError:
        known = ", ".join(PRESETS)
        raise KeyError(f"unknown preset {name!r} (available: {known})") from None


def preset_config(name: str) -> ScanConfig:
    return parse_config(preset_text(name))


__all__ = ["PRESETS", "Preset", "preset_config", "preset_names", "preset_text"]
