"""Command-line entry point.

Subcommands: ``squeeze-report``, ``simulate``, ``fit``, ``speedup``,
``uar-sweep``.  Every command is deterministic given (config, seed) and
writes CSV/JSON results plus rendered figures into the output directory.

Exit codes: 0 ok, 2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .absorption import GasCell, fit_cell_params, ingest_line_list, transmittance
from .config import RunConfig, config_hash, load_config
from .detection import BeatnoteRecord, records_to_csv
from .dsp import (
    PhaseNoiseModel,
    averaged_periodogram,
    coherent_beatnote_amplitudes,
    extract_beatnotes,
    synthesize,
    write_interferogram,
)
from .errors import ConfigError, NumericError
from .gaussian import mixed_tmsv_from_measured
from .ioutil import fnum, write_csv, write_json
from .metrics import precision_vs_averages, uar_sweep
from .pipeline import build_scenario, load_sample_lines, make_detection
from . import plots

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.base_dir) / cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> tuple[RunConfig, Path, int]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
    return cfg, _out_dir(cfg, args.output_dir), cfg.seed


def cmd_squeeze_report(args) -> int:
    """Per-pair squeezing/anti-squeezing table from the configured comb."""
    cfg, out, _ = _load(args)
    sq = cfg.comb.squeezing
    imp = make_detection(cfg)
    el = imp.electrical_variance
    rows = []
    table = [(0, sq.central_squeeze_db, sq.central_antisqueeze_db)]
    table += [
        (n, sq.squeeze_db[n - 1], sq.antisqueeze_db[n - 1])
        for n in range(1, cfg.comb.n_pairs + 1)
    ]
    for n, s_db, a_db in table:
        try:
            r, eta = mixed_tmsv_from_measured(s_db, a_db)
        except ValueError as exc:
            raise ConfigError(f"comb.squeezing pair {n}: {exc}") from exc
        v_sq = eta * np.exp(-2 * r) + (1 - eta)
        v_anti = eta * np.exp(2 * r) + (1 - eta)
        rows.append(
            {
                "pair": n,
                "squeeze_in_db": s_db,
                "antisqueeze_in_db": a_db,
                "r": r,
                "purity_eta": eta,
                # electrical-floor-corrected levels echo the inputs; raw levels
                # are referenced to the measured (vacuum + electrical) trace
                "squeeze_out_db": -10 * np.log10(v_sq),
                "antisqueeze_out_db": 10 * np.log10(v_anti),
                "squeeze_raw_db": -10 * np.log10((v_sq + el) / (1 + el)),
                "antisqueeze_raw_db": 10 * np.log10((v_anti + el) / (1 + el)),
            }
        )
    header = list(rows[0].keys())
    write_csv(
        out / "squeeze_report.csv",
        header,
        [[row["pair"]] + [fnum(row[k]) for k in header[1:]] for row in rows],
        comment=f"config_sha256={config_hash(cfg)}",
    )
    plots.save_squeeze_report_figure(rows, out / "squeeze_report.png")
    print(f"wrote {out / 'squeeze_report.csv'}")
    return EXIT_OK


def _two_shot_line_amplitudes(records_plus, records_minus):
    """Per-line complex amplitudes from a plus/minus shot pair of records."""
    from .detection import resolve_aliasing_two_shot

    out = {}
    minus_by_index = {r.index: r for r in records_minus}
    for rp in records_plus:
        c_pos, c_neg_conj = resolve_aliasing_two_shot(rp, minus_by_index[rp.index])
        # the negative line enters the beatnote conjugated; undo it
        out[rp.index] = c_pos
        out[-rp.index] = np.conj(c_neg_conj)
    return out


def cmd_simulate(args) -> int:
    """Synthesize interferograms, process them and emit spectra + beatnotes.

    With a gas sample enabled the run performs the two-shot aliasing
    protocol (positive-line displacements flipped between shots) so the
    transmittance of every individual comb line is recovered.
    """
    cfg, out, seed = _load(args)
    dsp = cfg.dsp
    lines = load_sample_lines(cfg) if cfg.sample.enabled else None
    if lines is not None and cfg.sample.calibrate_peak_depth_db is not None:
        # the fit step must see the same calibrated strengths
        from .absorption import save_line_list

        save_line_list(lines, out / "line_list_calibrated.csv")
    chash = config_hash(cfg)
    phase_noise = (
        PhaseNoiseModel(
            dsp.phase_noise.level_dbc_hz,
            dsp.phase_noise.bandwidth_hz,
            dsp.phase_noise.segment_s,
        )
        if dsp.phase_noise
        else None
    )
    trans_rows = []
    all_records = []
    first_spectrum = None
    first_beatnotes = None
    for sweep in range(cfg.comb.n_sweeps):
        scen = build_scenario(cfg, lines=lines, sweep_index=sweep)
        records = scen.records()
        all_records.extend(records)
        ifg = synthesize(
            records,
            dsp.sample_rate_hz,
            dsp.duration_s,
            scen.imp,
            phase_noise=phase_noise,
            seed=seed + sweep,
            noise_kernel_hz=dsp.noise_kernel_hz,
            config_hash=chash,
        )
        if dsp.save_interferogram:
            write_interferogram(out / f"interferogram_{sweep:03d}.bin", ifg)
        spectrum = averaged_periodogram(ifg, dsp.rbw_hz, dsp.window)
        beatnotes = extract_beatnotes(spectrum, scen.delta_f, cfg.comb.n_pairs)
        if sweep == 0:
            first_spectrum, first_beatnotes = spectrum, beatnotes
            write_csv(
                out / "spectrum.csv",
                ["freq_hz", "power_sql"],
                [(fnum(f), fnum(p)) for f, p in zip(spectrum.freqs, spectrum.power)],
                comment=f"config_sha256={chash}",
            )
        if cfg.sample.enabled:
            scen_minus = build_scenario(
                cfg, lines=lines, sweep_index=sweep, flip_positive=True
            )
            ifg_minus = synthesize(
                scen_minus.records(),
                dsp.sample_rate_hz,
                dsp.duration_s,
                scen.imp,
                phase_noise=phase_noise,
                seed=seed + cfg.comb.n_sweeps + sweep,
                noise_kernel_hz=dsp.noise_kernel_hz,
                config_hash=chash,
            )
            shots = []
            amp_var = {}
            for record in (ifg, ifg_minus):
                cb = coherent_beatnote_amplitudes(
                    record, dsp.rbw_hz, scen.delta_f, cfg.comb.n_pairs, dsp.window
                )
                if not amp_var:
                    amp_var = {c.index: c.amplitude_var for c in cb}
                shots.append(
                    [
                        BeatnoteRecord(c.index, c.rf_freq, c.mean_amp,
                                       max(c.noise_floor, 1e-12), 1.0, 1.0)
                        for c in cb
                    ]
                )
            measured = _two_shot_line_amplitudes(shots[0], shots[1])
            ref_plus = build_scenario(
                cfg, scenario=cfg.scenario, sweep_index=sweep, with_sample=False
            ).records()
            ref_minus = build_scenario(
                cfg, scenario=cfg.scenario, sweep_index=sweep, with_sample=False,
                flip_positive=True,
            ).records()
            reference = _two_shot_line_amplitudes(ref_plus, ref_minus)
            for line_index in sorted(measured, key=lambda k: (abs(k), k)):
                ref_amp = abs(reference[line_index])
                eta = float(abs(measured[line_index]) ** 2 / ref_amp**2)
                # each recovered amplitude averages two shots
                var_line = amp_var[abs(line_index)] / 2.0
                sigma = float(2.0 * np.sqrt(eta) * np.sqrt(var_line) / ref_amp)
                trans_rows.append(
                    {
                        "sweep": sweep,
                        "line_index": line_index,
                        "optical_freq_hz": scen.classical.line_frequency(line_index),
                        "eta": eta,
                        "sigma": sigma,
                    }
                )
    records_to_csv(all_records, out / "beatnote_records.csv", f"config_sha256={chash}")
    write_csv(
        out / "beatnotes.csv",
        ["index", "rf_freq_hz", "amplitude", "noise_floor", "amplitude_var"],
        [
            (b.index, fnum(b.rf_freq), fnum(b.amplitude), fnum(b.noise_floor), fnum(b.amplitude_var))
            for b in (first_beatnotes or [])
        ],
        comment=f"config_sha256={chash}",
    )
    plots.save_rf_spectrum_figure(first_spectrum, first_beatnotes, out / "rf_spectrum.png")
    if trans_rows:
        trans_rows.sort(key=lambda r: r["optical_freq_hz"])
        write_csv(
            out / "transmittance.csv",
            ["sweep", "line_index", "optical_freq_hz", "eta", "sigma"],
            [
                (
                    r["sweep"],
                    r["line_index"],
                    fnum(r["optical_freq_hz"]),
                    fnum(r["eta"]),
                    fnum(r["sigma"]),
                )
                for r in trans_rows
            ],
            comment=f"config_sha256={chash}",
        )
        plots.save_transmittance_figure(trans_rows, out / "transmittance.png")
    print(f"wrote {out / 'beatnotes.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    """Fit gas-cell parameters to a measured transmittance CSV."""
    from .ioutil import read_csv_rows

    _, rows = read_csv_rows(args.measured)
    if not rows:
        raise ConfigError(f"{args.measured}: no data rows")
    try:
        freqs = np.array([float(r["optical_freq_hz"]) for r in rows])
        etas = np.array([float(r["eta"]) for r in rows])
        sigmas = np.array([float(r["sigma"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ConfigError(
            f"{args.measured}: need columns optical_freq_hz, eta, sigma ({exc})"
        ) from exc
    sigmas = np.maximum(sigmas, 1e-6)
    lines = ingest_line_list(args.lines)
    cell0 = GasCell(
        args.path_length_cm, args.pressure_torr, args.temperature_k, args.init_mole_fraction
    )
    free = tuple(args.free)
    result = fit_cell_params(
        freqs, etas, sigmas, lines, cell0, free=free, max_nfev=args.max_nfev
    )
    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "free_parameters": list(result.free_names),
        "values": {n: float(v) for n, v in zip(result.free_names, result.values)},
        "stderr": {n: float(v) for n, v in zip(result.free_names, result.stderr)},
        "covariance": [[float(v) for v in row] for row in result.covariance],
        "fixed": {
            "path_length_cm": cell0.path_length_cm,
            "temperature_k": cell0.temperature_k,
        },
        "reduced_chi2": result.reduced_chi2,
        "n_points": int(len(freqs)),
        "nfev": result.nfev,
        "residuals": [float(v) for v in result.residuals],
    }
    write_json(out / "fit.json", payload)
    model = transmittance(freqs, result.cell, lines)
    plots.save_fit_figure(freqs, etas, model, result.residuals, out / "fit.png")
    print(f"wrote {out / 'fit.json'}")
    return EXIT_OK


def cmd_speedup(args) -> int:
    """Precision-vs-averages speedup of the entangled arm over the classical one."""
    cfg, out, seed = _load(args)
    records_e = build_scenario(cfg, scenario="edcs").records()
    records_d = build_scenario(cfg, scenario="classical-dcs").records()
    sp = cfg.speedup
    result = precision_vs_averages(
        records_e,
        records_d,
        fs=cfg.dsp.sample_rate_hz,
        rbw=cfg.dsp.rbw_hz,
        delta_f=cfg.comb.offset_spacing_hz,
        m_list=list(sp.m_list),
        seeds=[seed + k for k in range(sp.n_seeds)],
        imp=make_detection(cfg),
        target_precision=sp.target_precision,
        n_workers=args.threads,
    )
    chash = config_hash(cfg)
    payload = result.to_dict()
    payload["config_sha256"] = chash
    # both labelled advantage conventions alongside the speedup
    from .metrics import snr_advantage

    adv = snr_advantage(records_e, records_d)
    payload["advantage_aggregate_power_db"] = adv["aggregate_power_db"]
    payload["advantage_aggregate_amplitude_db"] = adv["aggregate_amplitude_db"]
    write_json(out / "speedup.json", payload)
    write_csv(
        out / "precision_curves.csv",
        ["m", "precision_edcs", "precision_dcs"],
        [
            (m, fnum(pe), fnum(pd))
            for m, pe, pd in zip(result.m_list, result.precision_edcs, result.precision_dcs)
        ],
        comment=f"config_sha256={chash}",
    )
    plots.save_precision_figure(result, out / "precision.png")
    print(
        f"speedup {result.speedup:.3f} (analytic {result.speedup_analytic:.3f}); "
        f"wrote {out / 'speedup.json'}"
    )
    return EXIT_OK


def cmd_uar_sweep(args) -> int:
    """Advantage grid of a flat-top comb over attenuation ratio and depth."""
    cfg, out, _ = _load(args)
    u = cfg.uar
    imp = None if u.ideal_detection else make_detection(cfg)
    result = uar_sweep(
        squeeze_db=u.squeeze_db,
        antisqueeze_db=u.antisqueeze_db,
        uar_values=list(u.uar_values),
        depth_values_db=list(u.depth_values_db),
        n_pairs=u.n_pairs,
        imp=imp,
        displacement=u.displacement,
    )
    chash = config_hash(cfg)
    write_csv(
        out / "uar_sweep.csv",
        [
            "uar",
            "depth_db",
            "snr_edcs_balanced",
            "snr_edcs_adaptive",
            "snr_dcs",
            "advantage_balanced_db",
            "advantage_adaptive_db",
        ],
        [tuple(fnum(v) for v in row) for row in result.rows()],
        comment=f"config_sha256={chash}",
    )
    write_json(
        out / "uar_sweep.json",
        {
            "config_sha256": chash,
            "uar_values": list(result.uar_values),
            "depth_values_db": list(result.depth_values_db),
            "n_pairs": result.n_pairs,
            "advantage_balanced_db": result.advantage_balanced_db.tolist(),
            "advantage_adaptive_db": result.advantage_adaptive_db.tolist(),
        },
    )
    plots.save_uar_figure(result, out / "uar_sweep.png")
    print(f"wrote {out / 'uar_sweep.csv'}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        parser.add_argument("-c", "--config", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("-o", "--output-dir", default=None, help="override the output directory")
    parser.add_argument("--threads", type=int, default=1, help="parallel workers for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edcs",
        description="Entangled dual-comb spectroscopy simulator and analysis toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("squeeze-report", help="per-pair squeezing table from a config")
    _add_common(p)
    p.set_defaults(func=cmd_squeeze_report)

    p = sub.add_parser("simulate", help="synthesize and process interferograms")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit gas-cell parameters to a transmittance CSV")
    p.add_argument("--measured", required=True, help="CSV with optical_freq_hz, eta, sigma")
    p.add_argument("--lines", required=True, help="line-list CSV")
    p.add_argument("--path-length-cm", type=float, default=17.5)
    p.add_argument("--pressure-torr", type=float, default=25.0)
    p.add_argument("--temperature-k", type=float, default=296.0)
    p.add_argument("--init-mole-fraction", type=float, default=0.5)
    p.add_argument(
        "--free",
        nargs="+",
        default=["mole_fraction"],
        choices=["mole_fraction", "pressure_torr"],
        help="parameters to fit (default: mole fraction only)",
    )
    p.add_argument("--max-nfev", type=int, default=200)
    p.add_argument("-o", "--output-dir", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("speedup", help="precision vs averages and the quantum speedup")
    _add_common(p)
    p.set_defaults(func=cmd_speedup)

    p = sub.add_parser("uar-sweep", help="flat-top advantage vs attenuation ratio")
    _add_common(p)
    p.set_defaults(func=cmd_uar_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
