"""Powder chi*T, heat capacity and entropy versus temperature at a few fields."""

import argparse
import os
from dataclasses import dataclass

import numpy as np

from vanadyl_qudit import SpinSystemParams
from vanadyl_qudit.dataio import ensure_dir, write_csv
from vanadyl_qudit.thermo import entropy, heat_capacity, susceptibility


@dataclass(frozen=True)
class Config:
    fields: tuple = (0.0, 0.5, 2.0, 5.0)  # T
    t_min: float = 0.001  # K
    t_max: float = 300.0
    num: int = 120
    n_orientations: int = 200
    out: str = "out/scripts"


def main(cfg):
    t = np.geomspace(cfg.t_min, cfg.t_max, cfg.num)
    p = SpinSystemParams()
    _, chit = susceptibility(p, t, n_orientations=cfg.n_orientations)
    rows = []
    for b in cfg.fields:
        c = heat_capacity(p, b, t, n_orientations=cfg.n_orientations)
        s = entropy(p, b, t, n_orientations=cfg.n_orientations)
        rows += list(zip([b] * t.size, t, c, s, chit))
        # hyperfine sublevels dominate below ~0.1 K, the electron Zeeman gap above
        hi = t > 0.1
        k = int(np.argmax(np.where(hi, c, -1.0)))
        print(f"B = {b:4.1f} T: c/R at {t[0]:.3g} K = {c[0]:.3f}, electronic maximum {c[k]:.3f} at {t[k]:.2f} K")
    path = os.path.join(ensure_dir(cfg.out), "thermo_curves.csv")
    write_csv(path, ["field_t", "temperature_k", "cm_over_r", "entropy_over_r", "chit_zero_field"], rows)
    print(f"chi*T at {t[-1]:.0f} K: {chit[-1]:.4f} cm3 K/mol")
    print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    main(Config(out=ap.parse_args().out))
