"""Command-line front end.

Every subcommand computes its datasets in memory first and only then writes
CSV files plus a JSON sidecar into the output directory, so a failing run
leaves nothing behind.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np

from . import hamiltonian as ham
from . import qudit, relaxometry, spectroscopy, thermo
from .config import ConfigError, load_config
from .dataio import ensure_dir, write_csv, write_json

SUBCOMMANDS = ("levels", "rotation", "spectrum", "powder", "transmission", "normalize",
               "thermo", "fit", "rabi", "universality")


class IoError(OSError):
    pass


def _csv(header, rows):
    return ("csv", header, rows)


def _direction(cfg, axis=None):
    return ham.lab_axis_direction(cfg.geometry, axis or cfg.field_axis)


def _qudit_settings(cfg):
    q = cfg.qudit
    return qudit.QuditSettings(b_mw=q.bmw_mt * 1e-3, t2=q.t2_us, drive_axis=q.drive_axis,
                               width=q.filter_width, aggregation=q.rate_agg,
                               pulse_factor=q.pulse_factor)


def run_levels(cfg):
    b = cfg.levels.field_grid.values()
    u = _direction(cfg)
    w = np.linalg.eigvalsh(ham.build_hamiltonian(cfg.spin, b[:, None] * u[None, :]))
    header = ["field_t"] + [f"e{k + 1:02d}_mhz" for k in range(w.shape[1])]
    files = {"levels.csv": _csv(header, ([b[n]] + list(w[n]) for n in range(b.size)))}
    if cfg.levels.tracked and b.size > 1:
        try:
            sweep = ham.field_sweep(cfg.spin, u, b, method="lapack")
        except ham.GridTooCoarse as exc:
            raise ConfigError(f"levels.field_grid: {exc}") from None
        t = sweep.tracked()
        files["levels_tracked.csv"] = _csv(header, ([b[n]] + list(t[n]) for n in range(b.size)))
    n_distinct = [int(np.unique(np.round(row, 6)).size) for row in w]
    return files, {"field_direction_mol": u, "distinct_levels": n_distinct}


def _spectra_settings(cfg, step_mt=None):
    sp = cfg.spectra
    return spectroscopy.ResonanceSettings(step=(step_mt or sp.scan_step_mt) * 1e-3,
                                          temperature=sp.temperature_k,
                                          intensity_model=sp.intensity_model)


def run_rotation(cfg):
    sp = cfg.spectra
    diag = spectroscopy.rotational_diagram(cfg.spin, cfg.geometry, sp.nu_mhz, sp.rotation_axis,
                                           sp.angle_grid.values(), (sp.b_min, sp.b_max),
                                           settings=_spectra_settings(cfg))
    rows = (
        (int(diag.site[k]), diag.angle[k], diag.field[k] * 1e3, int(diag.lower[k]) + 1,
         int(diag.upper[k]) + 1, diag.intensity[k])
        for k in range(diag.field.size)
    )
    header = ["site", "angle_deg", "field_mt", "lower", "upper", "intensity"]
    return {"rotation.csv": _csv(header, rows)}, {"rotation_axis": sp.rotation_axis, "n_lines": int(diag.field.size)}


def run_spectrum(cfg):
    sp = cfg.spectra
    u = _direction(cfg)
    lines = spectroscopy.resonance_fields(cfg.spin, u, sp.nu_mhz, (sp.b_min, sp.b_max), _spectra_settings(cfg))
    b = np.linspace(sp.b_min, sp.b_max, sp.b_points)
    spec = spectroscopy.cw_spectrum([ln.field for ln in lines], [ln.record.intensity for ln in lines], b,
                                    sp.linewidth_mt)
    files = {
        "spectrum.csv": _csv(["field_mt", "signal"], zip(b * 1e3, spec.signal)),
        "lines.csv": _csv(
            ["field_mt", "lower", "upper", "frequency_mhz", "rabi_mhz", "intensity"],
            ((ln.field * 1e3, ln.record.lower_index, ln.record.upper_index, ln.record.frequency,
              ln.record.rabi, ln.record.intensity) for ln in lines),
        ),
    }
    return files, {"field_axis": cfg.field_axis, "nu_mhz": sp.nu_mhz, "linewidth_fwhm_mt": sp.linewidth_mt,
                   "temperature_k": sp.temperature_k, "n_lines": len(lines)}


def run_powder(cfg):
    sp = cfg.spectra
    b = np.linspace(sp.b_min, sp.b_max, sp.b_points)
    s = spectroscopy.POWDER_SETTINGS
    s = spectroscopy.ResonanceSettings(step=s.step, freq_tol=s.freq_tol,
                                       min_relative_intensity=s.min_relative_intensity,
                                       temperature=sp.temperature_k, intensity_model=sp.intensity_model)
    spec = spectroscopy.powder_spectrum(cfg.spin, sp.nu_mhz, b, cfg.orientations, sp.linewidth_mt, s)
    feature = spectroscopy.most_intense_feature(spec)
    return ({"powder.csv": _csv(["field_mt", "signal"], zip(b * 1e3, spec.signal))},
            dict(spec.metadata, most_intense_feature_mt=feature * 1e3))


def run_transmission(cfg):
    tr = cfg.transmission
    f = tr.freq_grid.values()
    b = tr.field_grid.values()
    db = None if tr.delta_b_mt is None else tr.delta_b_mt * 1e-3
    m = spectroscopy.transmission_map(cfg.spin, _direction(cfg), f, b, tr.temperature_k, tr.linewidth_mhz, db)
    rows = ((f[i], b[j], m.t[i, j], m.absorption[i, j]) for j in range(b.size) for i in range(f.size))
    return ({"transmission.csv": _csv(["freq_mhz", "field_t", "t", "absorption"], rows)},
            dict(m.metadata, field_axis=cfg.field_axis))


def run_normalize(cfg):
    nc = cfg.normalize
    if not nc.s21_csv or not nc.reference_csv:
        raise ConfigError("normalize.s21_csv: both s21_csv and reference_csv are required")
    try:
        f, b, s21 = spectroscopy.read_s21_csv(nc.s21_csv)
        fr, ref = spectroscopy.read_reference_csv(nc.reference_csv)
    except OSError as exc:
        raise IoError(f"cannot read input: {exc}") from None
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"normalize: malformed input CSV ({exc})") from None
    if fr.shape != f.shape or not np.allclose(fr, f):
        raise ConfigError("normalize.reference_csv: frequencies do not match the S21 map")
    m = spectroscopy.normalize_transmission(s21, b, ref, nc.b_offset_mt * 1e-3, f)
    rows = ((m.frequency[i], m.field[j] * 1e3, m.t[i, j].real, m.t[i, j].imag)
            for j in range(m.field.size) for i in range(m.frequency.size))
    return ({"normalized.csv": _csv(["freq_mhz", "field_mt", "t_re", "t_im"], rows)},
            {"b_offset_mt": nc.b_offset_mt, "inputs": [nc.s21_csv, nc.reference_csv]})


def run_thermo(cfg):
    th = cfg.thermo
    direction = None if th.direction == "powder" else _direction(cfg, th.direction)
    t = th.temperature_grid.values()
    pts = thermo.thermo_table(cfg.spin, th.field_t, t, direction, th.n_orientations, th.b_probe_t)
    header = ["temperature_k", "field_t", "cm_over_r", "entropy_over_r", "magnetization_mub", "chi_cm3_mol"]
    rows = ((q.temperature, q.field, q.heat_capacity, q.entropy, q.magnetization, q.susceptibility) for q in pts)
    return {"thermo.csv": _csv(header, rows)}, {"direction": th.direction, "field_t": th.field_t}


def run_fit(cfg):
    fc = cfg.fit
    model = relaxometry.FitModel(fc.model, fc.fixed)
    truth = None
    if fc.input_csv:
        try:
            trace = relaxometry.read_trace_csv(fc.input_csv, model.is_complex)
        except OSError as exc:
            raise IoError(f"cannot read {fc.input_csv}: {exc}") from None
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"fit.input_csv: malformed trace ({exc})") from None
        if not fc.initial:
            raise ConfigError("fit.initial: initial parameters are required for external data")
        initial = fc.initial
    else:
        trace, truth = relaxometry.synthetic_trace(fc.model)
        # built-in trace: start 10% away from the generating values on free parameters
        initial = {k: v * (1.1 if k not in model.fixed else 1.0) for k, v in truth.items()}
        initial.update(fc.initial)
    try:
        res = relaxometry.fit(model, trace, initial, relaxometry.LMSettings(max_iter=fc.max_iter))
    except (relaxometry.DomainError, ValueError) as exc:
        raise ConfigError(f"fit.initial: {exc}") from None
    y = relaxometry.model_eval(model, [res.params[n] for n in model.names], trace.x)
    if model.is_complex:
        rows = zip(trace.x, trace.y.real, -trace.y.imag, y.real, -y.imag)
        header = ["x", "y", "y_im", "model", "model_im"]
    else:
        rows = zip(trace.x, trace.y, y)
        header = ["x", "y", "model"]
    report = {"model": fc.model, "parameters": res.params, "stderr": res.stderr, "rss": res.rss,
              "converged": res.converged, "iterations": res.iterations, "fixed": list(model.fixed),
              "source": fc.input_csv or "built-in synthetic trace"}
    if truth is not None:
        report["generating_parameters"] = truth
    if fc.model == "InversionRecoveryStretched":
        report["mean_t1"] = relaxometry.mean_t1_from_stretched(res.params["t1"], res.params["beta"])
        report["mean_t1_convention"] = relaxometry.MEAN_T1_CONVENTION
    return {"fit_curve.csv": _csv(header, rows), "fit.json": ("json", report)}, {"model": fc.model}


def run_rabi(cfg):
    s = _qudit_settings(cfg)
    u = _direction(cfg)
    rows = []
    for b in cfg.qudit.fields_t:
        r = qudit.rabi_matrix(cfg.spin, b * u, s.drive_axis, s.b_mw, cfg.geometry)
        for i in range(r.dim):
            for j in range(i + 1, r.dim):
                rows.append((b, i + 1, j + 1, r.frequency[i, j], r.omega[i, j]))
    header = ["field_t", "lower", "upper", "frequency_mhz", "omega_mhz"]
    return {"rabi.csv": _csv(header, rows)}, {"drive_axis": cfg.qudit.drive_axis, "bmw_mt": cfg.qudit.bmw_mt}


def run_universality(cfg):
    s = _qudit_settings(cfg)
    u = _direction(cfg)
    reports, wt2_rows, edge_rows = [], [], []
    for b in cfg.qudit.fields_t:
        rabi = qudit.rabi_matrix(cfg.spin, b * u, s.drive_axis, s.b_mw, cfg.geometry)
        graph = qudit.addressable_transitions(rabi, s.floor, s.width, s.pulse_factor)
        rep = qudit.operation_rates(graph, s.t2, s.aggregation)
        n = rabi.dim
        for i in range(n):
            for j in range(n):
                if i != j:
                    wt2_rows.append((b, i + 1, j + 1, rep.wt2[i, j]))
        for e in rep.edges:
            edge_rows.append((b, e.i + 1, e.j + 1, e.frequency, e.omega, e.dt))
        reasons = list(graph.excluded.values())
        reports.append({
            "field_t": b, "universal": rep.universal, "min_wt2": rep.min_wt2,
            "disconnected": [[a + 1, c + 1] for a, c in rep.disconnected],
            "n_edges": len(rep.edges), "wt2": rep.wt2,
            "excluded": {"crowded": reasons.count("crowded"), "too-weak": reasons.count("too-weak")},
        })
    scan = qudit.universality_scan(cfg.spin, u, cfg.qudit.scan_grid.values(), s, cfg.geometry)
    files = {
        "universality_wt2.csv": _csv(["field_t", "n", "m", "wt2"], wt2_rows),
        "universality_edges.csv": _csv(["field_t", "lower", "upper", "frequency_mhz", "omega_mhz", "dt_us"], edge_rows),
        "universality_scan.csv": _csv(
            ["field_t", "min_wt2", "n_disconnected", "n_edges", "universal"],
            zip(scan.fields, scan.min_wt2, scan.n_disconnected, scan.n_edges, scan.universal),
        ),
    }
    return files, {"reports": reports, "crossover_field_t": scan.crossover,
                   "omega_floor_mhz": s.floor, "state_indexing": "energy-sorted ascending, 1-based"}


RUNNERS = {name: globals()[f"run_{name}"] for name in SUBCOMMANDS}


def build_parser():
    ap = argparse.ArgumentParser(prog="vanadyl-qudit", description="Vanadyl spin-qudit simulations.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--field-axis", choices=ham.FIELD_AXES)
    ap.add_argument("--bmw-mt", type=float, help="microwave amplitude (mT)")
    ap.add_argument("--t2-us", type=float, help="coherence time (us)")
    ap.add_argument("--filter-width", choices=qudit.FILTER_WIDTHS)
    ap.add_argument("--rate-agg", choices=qudit.AGGREGATIONS)
    ap.add_argument("--orientations", type=int, help="powder orientations")
    ap.add_argument("--drive-axis", choices=ham.FIELD_AXES, help="microwave field axis")
    ap.add_argument("--timestamp", action="store_true", help="record wall-clock time in the metadata")
    return ap


def _overrides(args):
    top, q = {}, {}
    if args.out is not None:
        top["out"] = args.out
    if args.field_axis is not None:
        top["field_axis"] = args.field_axis
    if args.orientations is not None:
        top["orientations"] = args.orientations
    if args.timestamp:
        top["timestamp"] = True
    for flag, key in (("bmw_mt", "bmw_mt"), ("t2_us", "t2_us"), ("filter_width", "filter_width"),
                      ("rate_agg", "rate_agg"), ("drive_axis", "drive_axis")):
        if getattr(args, flag) is not None:
            q[key] = getattr(args, flag)
    if q:
        top["qudit"] = q
    return top


def run(subcommand, cfg):
    """Compute a subcommand's datasets and write them; returns the written paths."""
    files, meta = RUNNERS[subcommand](cfg)
    # materialise generators before touching the file system
    files = {k: (v[0], v[1], list(v[2])) if v[0] == "csv" else v for k, v in files.items()}
    try:
        ensure_dir(cfg.out)
        written = []
        for name, spec in sorted(files.items()):
            path = os.path.join(cfg.out, name)
            if spec[0] == "csv":
                write_csv(path, spec[1], spec[2])
            else:
                write_json(path, spec[1])
            written.append(path)
        sidecar = {"subcommand": subcommand, "config": cfg.to_dict(), "results": meta,
                   "outputs": [os.path.basename(p) for p in written]}
        if cfg.timestamp:
            sidecar["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        path = os.path.join(cfg.out, f"{subcommand}.meta.json")
        write_json(path, sidecar)
        written.append(path)
    except OSError as exc:
        raise IoError(f"cannot write outputs to {cfg.out}: {exc}") from None
    return written


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        paths = run(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IoError, spectroscopy.ZeroReference) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
