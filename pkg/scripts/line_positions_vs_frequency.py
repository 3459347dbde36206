"""Eight-line pattern along y_c as a function of the microwave frequency.

Useful for comparing pulsed-EPR line positions, which are often recorded at a
slightly different X-band frequency than the CW spectra.
"""

import argparse
import os
from dataclasses import dataclass

import numpy as np

from vanadyl_qudit import FrameGeometry, SpinSystemParams
from vanadyl_qudit.dataio import ensure_dir, write_csv
from vanadyl_qudit.hamiltonian import lab_axis_direction
from vanadyl_qudit.spectroscopy import resonance_fields, strongest_lines


@dataclass(frozen=True)
class Config:
    axis: str = "yc"
    nu_min: float = 9600.0  # MHz
    nu_max: float = 9900.0
    num: int = 31
    out: str = "out/scripts"


def main(cfg):
    u = lab_axis_direction(FrameGeometry(), cfg.axis)
    p = SpinSystemParams()
    rows = []
    for nu in np.linspace(cfg.nu_min, cfg.nu_max, cfg.num):
        lines = strongest_lines(resonance_fields(p, u, nu, (0.2, 0.5)), 8)
        fields = [ln.field * 1e3 for ln in lines]
        rows.append([nu] + fields)
        print(f"{nu:8.1f} MHz  " + " ".join(f"{f:7.2f}" for f in fields))
    path = os.path.join(ensure_dir(cfg.out), f"lines_vs_frequency_{cfg.axis}.csv")
    write_csv(path, ["nu_mhz"] + [f"line{k}_mt" for k in range(1, 9)], rows)
    print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--axis", default=Config.axis)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args()
    main(Config(axis=a.axis, out=a.out))
