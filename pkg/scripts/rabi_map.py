"""Rabi frequencies of every transition versus field, split into electron and nuclear types."""

import argparse
import os
from dataclasses import dataclass

import numpy as np

from vanadyl_qudit import SpinSystemParams, rabi_matrix
from vanadyl_qudit.dataio import ensure_dir, write_csv
from vanadyl_qudit.hamiltonian import FrameGeometry, lab_axis_direction


@dataclass(frozen=True)
class Config:
    field_axis: str = "X"
    drive_axis: str = "moly"
    b_min: float = 0.005  # T
    b_max: float = 0.4
    num: int = 40
    b_mw: float = 1e-3  # T
    out: str = "out/scripts"


def main(cfg):
    p = SpinSystemParams()
    u = lab_axis_direction(FrameGeometry(), cfg.field_axis)
    rows = []
    for b in np.linspace(cfg.b_min, cfg.b_max, cfg.num):
        r = rabi_matrix(p, b * u, cfg.drive_axis, cfg.b_mw)
        for i in range(16):
            for j in range(i + 1, 16):
                kind = "electron" if i < 8 <= j else "nuclear"
                rows.append((b, i + 1, j + 1, kind, r.frequency[i, j], r.omega[i, j]))
        el = r.omega[:8, 8:].max()
        nuc = max(r.omega[:8, :8].max(), r.omega[8:, 8:].max())
        print(f"B = {b:.3f} T  max electron {el:6.2f} MHz  max nuclear {nuc:6.3f} MHz")
    path = os.path.join(ensure_dir(cfg.out), "rabi_map.csv")
    write_csv(path, ["field_t", "lower", "upper", "kind", "frequency_mhz", "omega_mhz"], rows)
    print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--drive-axis", default=Config.drive_axis)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args()
    main(Config(drive_axis=a.drive_axis, out=a.out))
