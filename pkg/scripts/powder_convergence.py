"""Relative RMS change of the powder spectrum as the orientation count doubles."""

import argparse
import os
from dataclasses import dataclass

import numpy as np

from vanadyl_qudit import SpinSystemParams
from vanadyl_qudit.dataio import ensure_dir, write_csv
from vanadyl_qudit.spectroscopy import most_intense_feature, powder_spectrum


@dataclass(frozen=True)
class Config:
    nu: float = 9849.0  # MHz
    counts: tuple = (250, 500, 1000, 2000, 4000)
    b_points: int = 1001
    out: str = "out/scripts"


def main(cfg):
    b = np.linspace(0.25, 0.45, cfg.b_points)
    p = SpinSystemParams()
    prev, rows = None, []
    for n in cfg.counts:
        spec = powder_spectrum(p, cfg.nu, b, n_orientations=n)
        change = np.nan if prev is None else np.sqrt(np.mean((spec.signal - prev) ** 2) / np.mean(spec.signal**2))
        feat = most_intense_feature(spec) * 1e3
        rows.append((n, change, feat))
        print(f"n={n:5d}  rms change {change:.4f}  strongest feature {feat:.2f} mT")
        prev = spec.signal
    path = os.path.join(ensure_dir(cfg.out), "powder_convergence.csv")
    write_csv(path, ["n_orientations", "rms_change", "feature_mt"], rows)
    print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    main(Config(out=ap.parse_args().out))
