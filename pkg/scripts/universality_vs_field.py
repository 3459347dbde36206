"""Minimum W*T2 versus field for the default, isotropic and uniaxial hyperfine variants."""

import argparse
import os
from dataclasses import dataclass

import numpy as np

from vanadyl_qudit import SpinSystemParams, QuditSettings, universality_scan
from vanadyl_qudit.dataio import ensure_dir, write_csv


@dataclass(frozen=True)
class Config:
    field_axis: str = "X"
    b_min: float = 0.005  # T
    b_max: float = 0.4
    num: int = 80
    drive_axis: str = "X"
    b_mw: float = 1e-3  # T
    t2: float = 5.0  # us
    out: str = "out/scripts"


def main(cfg):
    b = np.linspace(cfg.b_min, cfg.b_max, cfg.num)
    s = QuditSettings(b_mw=cfg.b_mw, t2=cfg.t2, drive_axis=cfg.drive_axis)
    variants = {
        "default": SpinSystemParams(),
        "isotropic": SpinSystemParams.isotropic_hyperfine(),
        "uniaxial": SpinSystemParams.uniaxial_hyperfine(),
    }
    rows = []
    for name, p in variants.items():
        scan = universality_scan(p, cfg.field_axis, b, s)
        print(f"{name:10s} crossover at {scan.crossover} T")
        rows += [(name, *r) for r in zip(scan.fields, scan.min_wt2, scan.n_disconnected, scan.universal)]
    path = os.path.join(ensure_dir(cfg.out), "universality_vs_field.csv")
    write_csv(path, ["variant", "field_t", "min_wt2", "n_disconnected", "universal"], rows)
    print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--field-axis", default=Config.field_axis)
    ap.add_argument("--drive-axis", default=Config.drive_axis)
    ap.add_argument("--num", type=int, default=Config.num)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args()
    main(Config(field_axis=a.field_axis, drive_axis=a.drive_axis, num=a.num, out=a.out))
