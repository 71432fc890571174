"""CLI and configuration tests."""

import json

import numpy as np
import pytest
import yaml

from edcs.absorption import bundled_line_list_path
from edcs.cli import main
from edcs.config import (
    config_hash,
    config_to_dict,
    load_config,
    parse_config,
    save_config,
)
from edcs.errors import ConfigError

SMALL_COMB = {
    "n_pairs": 3,
    "offset_spacing_hz": 4.0e6,
    "squeezing": {
        "profile": "measured",
        "squeeze_db": [2.1, 2.45, 2.8],
        "antisqueeze_db": [9.3, 11.3, 13.3],
    },
}


def write_config(tmp_path, name="run.yaml", **overrides):
    data = {
        "version": 1,
        "scenario": "edcs",
        "seed": 7,
        "output_dir": "out",
        "comb": dict(SMALL_COMB),
        "detection": {
            "quantum_efficiency": 0.88,
            "fringe_visibility": 0.97,
            "electrical_noise_db_below_vacuum": 18.0,
        },
        "dsp": {"sample_rate_hz": 100.0e6, "duration_s": 1.0e-3, "rbw_hz": 1.0e5},
    }
    data.update(overrides)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


# -- configuration ------------------------------------------------------------


def test_config_round_trip_is_identity(tmp_path):
    path = write_config(tmp_path)
    cfg = load_config(path)
    out = tmp_path / "round.yaml"
    save_config(cfg, out)
    again = load_config(out)
    assert config_to_dict(cfg) == config_to_dict(again)
    assert config_hash(cfg) == config_hash(again)


def test_config_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError, match="comb.squeezing.profil"):
        parse_config(
            {
                "version": 1,
                "comb": {"squeezing": {"profil": "measured"}},
            }
        )


def test_config_version_required():
    with pytest.raises(ConfigError, match="version"):
        parse_config({"scenario": "edcs"})
    with pytest.raises(ConfigError, match="version"):
        parse_config({"version": 99})


def test_config_scenario_validated():
    with pytest.raises(ConfigError, match="scenario"):
        parse_config({"version": 1, "scenario": "quantum"})


def test_config_flat_top_profile_broadcasts():
    cfg = parse_config(
        {
            "version": 1,
            "comb": {
                "n_pairs": 4,
                "squeezing": {
                    "profile": "flat_top",
                    "squeeze_db": 10.0,
                    "antisqueeze_db": 15.0,
                },
            },
        }
    )
    assert cfg.comb.squeezing.squeeze_db == (10.0,) * 4
    assert cfg.comb.squeezing.antisqueeze_db == (15.0,) * 4


def test_config_phase_noise_section_round_trips(tmp_path):
    path = write_config(
        tmp_path,
        dsp={
            "sample_rate_hz": 100.0e6,
            "duration_s": 1.0e-3,
            "rbw_hz": 1.0e5,
            "phase_noise": {"level_dbc_hz": -75.0, "bandwidth_hz": 1.0e4,
                            "segment_s": 1.0e-5},
        },
    )
    cfg = load_config(path)
    assert cfg.dsp.phase_noise is not None
    assert cfg.dsp.phase_noise.level_dbc_hz == -75.0
    out = tmp_path / "round.yaml"
    save_config(cfg, out)
    assert config_to_dict(load_config(out)) == config_to_dict(cfg)
    with pytest.raises(ConfigError, match="dsp.phase_noise.bandwidth"):
        parse_config(
            {"version": 1, "dsp": {"phase_noise": {"bandwidth_hz": "fast"}}}
        )
    # the jitter path runs end to end through the simulate command
    assert main(["simulate", "-c", str(path)]) == 0
    assert (tmp_path / "out" / "beatnotes.csv").exists()


def test_config_infeasible_squeezing_rejected():
    with pytest.raises(ConfigError, match="antisqueeze"):
        parse_config(
            {
                "version": 1,
                "comb": {
                    "n_pairs": 1,
                    "squeezing": {"squeeze_db": [5.0], "antisqueeze_db": [3.0]},
                },
            }
        )


# -- commands -----------------------------------------------------------------


def test_squeeze_report_echoes_inputs(tmp_path, capsys):
    path = write_config(tmp_path)
    assert main(["squeeze-report", "-c", str(path)]) == 0
    out = tmp_path / "out"
    rows = (out / "squeeze_report.csv").read_text().splitlines()
    assert rows[1].split(",")[0] == "pair"
    data = [r.split(",") for r in rows[2:]]
    assert len(data) == 4  # central line + 3 pairs
    for row, s_in in zip(data[1:], [2.1, 2.45, 2.8]):
        assert abs(float(row[5]) - s_in) < 1e-9   # squeeze_out_db echoes input
    assert (out / "squeeze_report.png").exists()


def test_squeeze_report_zero_squeezing_all_zero_db(tmp_path):
    comb = dict(SMALL_COMB)
    comb["squeezing"] = {
        "squeeze_db": [0.0, 0.0, 0.0],
        "antisqueeze_db": [0.0, 0.0, 0.0],
    }
    path = write_config(tmp_path, comb=comb)
    assert main(["squeeze-report", "-c", str(path)]) == 0
    rows = (tmp_path / "out" / "squeeze_report.csv").read_text().splitlines()[2:]
    for row in rows:
        cols = row.split(",")
        assert abs(float(cols[5])) < 1e-12
        assert abs(float(cols[6])) < 1e-12


def test_squeeze_report_impossible_config_exits_2(tmp_path, capsys):
    comb = dict(SMALL_COMB)
    comb["squeezing"] = {
        "squeeze_db": [5.0, 5.0, 5.0],
        "antisqueeze_db": [3.0, 3.0, 3.0],
    }
    path = write_config(tmp_path, comb=comb)
    assert main(["squeeze-report", "-c", str(path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_simulate_outputs_and_determinism(tmp_path):
    path = write_config(tmp_path)
    assert main(["simulate", "-c", str(path)]) == 0
    out = tmp_path / "out"
    for name in (
        "beatnote_records.csv",
        "beatnotes.csv",
        "spectrum.csv",
        "rf_spectrum.png",
        "interferogram_000.bin",
    ):
        assert (out / name).exists(), name
    # interferogram size matches the documented header + 8 bytes per sample
    n_samples = int(100e6 * 1e-3)
    assert (out / "interferogram_000.bin").stat().st_size == 44 + 8 * n_samples
    first = {
        name: (out / name).read_bytes()
        for name in ("beatnote_records.csv", "beatnotes.csv", "spectrum.csv")
    }
    assert main(["simulate", "-c", str(path)]) == 0
    for name, blob in first.items():
        assert (out / name).read_bytes() == blob, f"{name} not deterministic"


def test_simulate_classical_floor_is_flat(tmp_path):
    comb = dict(SMALL_COMB)
    path = write_config(tmp_path, scenario="classical-dcs", comb=comb)
    assert main(["simulate", "-c", str(path)]) == 0
    rows = (tmp_path / "out" / "beatnotes.csv").read_text().splitlines()[2:]
    el = 10 ** (-1.8)
    for row in rows:
        floor = float(row.split(",")[3])
        assert abs(floor - (1.0 + el)) < 0.15


def test_simulate_edcs_floors_below_unity(tmp_path):
    path = write_config(tmp_path)
    main(["simulate", "-c", str(path)])
    rows = (tmp_path / "out" / "beatnotes.csv").read_text().splitlines()[2:]
    floors = [float(r.split(",")[3]) for r in rows]
    assert all(f < 1.0 for f in floors)


def test_simulate_gas_two_shot_transmittance(tmp_path):
    sample = {
        "enabled": True,
        "line_list": str(bundled_line_list_path()),
        "path_length_cm": 17.5,
        "pressure_torr": 25.0,
        "temperature_k": 296.0,
        "mole_fraction": 0.7,
        "calibrate_peak_depth_db": 3.0,
    }
    comb = dict(SMALL_COMB)
    comb["center_freq_hz"] = 196.2e12   # near the deepest fixture line
    path = write_config(tmp_path, sample=sample)
    (tmp_path / "r2.yaml").write_text(
        yaml.safe_dump(
            {**yaml.safe_load(path.read_text()), "comb": {**SMALL_COMB, **comb}}
        )
    )
    assert main(["simulate", "-c", str(tmp_path / "r2.yaml")]) == 0
    out = tmp_path / "out"
    assert (out / "transmittance.csv").exists()
    assert (out / "transmittance.png").exists()
    assert (out / "line_list_calibrated.csv").exists()
    rows = (out / "transmittance.csv").read_text().splitlines()[2:]
    assert len(rows) == 6   # one per line, +-3 pairs
    etas = {int(r.split(",")[1]): float(r.split(",")[3]) for r in rows}
    assert set(etas) == {-3, -2, -1, 1, 2, 3}
    assert all(0.0 < v < 1.2 for v in etas.values())


def test_transmittance_round_trip_matches_model(tmp_path):
    # end-to-end oracle: per-line transmittance estimates agree with the
    # forward model within their propagated error bars for >= 95% of lines
    from edcs.absorption import GasCell, calibrate_strength_scale, ingest_line_list, transmittance
    from edcs.config import load_config
    from edcs.ioutil import read_csv_rows

    sample = {
        "enabled": True,
        "line_list": str(bundled_line_list_path()),
        "path_length_cm": 17.5,
        "pressure_torr": 25.0,
        "temperature_k": 296.0,
        "mole_fraction": 0.7,
        "calibrate_peak_depth_db": 3.0,
    }
    comb = dict(SMALL_COMB)
    comb["center_freq_hz"] = 196.0e12
    comb["n_sweeps"] = 10
    path = write_config(
        tmp_path,
        comb=comb,
        sample=sample,
        dsp={"sample_rate_hz": 100.0e6, "duration_s": 2.0e-3, "rbw_hz": 1.0e4,
             "save_interferogram": False},
    )
    assert main(["simulate", "-c", str(path)]) == 0
    _, rows = read_csv_rows(tmp_path / "out" / "transmittance.csv")
    assert len(rows) == 60   # 6 lines x 10 sweeps
    cell = GasCell(17.5, 25.0, 296.0, 0.7)
    lines = ingest_line_list(bundled_line_list_path())
    lines, _ = calibrate_strength_scale(lines, cell, 3.0)
    hits = 0
    for row in rows:
        truth = transmittance(float(row["optical_freq_hz"]), cell, lines)
        if abs(float(row["eta"]) - truth) <= 3.0 * float(row["sigma"]):
            hits += 1
    assert hits >= int(0.95 * len(rows))


def test_fit_command_recovers_truth(tmp_path):
    # self-generated measurement at exactly the model: fit returns the truth
    from edcs.absorption import GasCell, calibrate_strength_scale, ingest_line_list, transmittance
    from edcs.ioutil import fnum, write_csv

    lines = ingest_line_list(bundled_line_list_path())
    cell = GasCell(17.5, 25.0, 296.0, 0.7)
    lines, _ = calibrate_strength_scale(lines, cell, 3.0)
    from edcs.absorption import save_line_list

    line_path = tmp_path / "lines.csv"
    save_line_list(lines, line_path)
    freqs = np.linspace(1.945e14, 1.965e14, 120)
    etas = transmittance(freqs, cell, lines)
    meas = tmp_path / "measured.csv"
    write_csv(
        meas,
        ["optical_freq_hz", "eta", "sigma"],
        [(fnum(f), fnum(e), "0.01") for f, e in zip(freqs, etas)],
    )
    assert main(
        [
            "fit",
            "--measured", str(meas),
            "--lines", str(line_path),
            "--init-mole-fraction", "0.3",
            "-o", str(tmp_path / "fitout"),
        ]
    ) == 0
    result = json.loads((tmp_path / "fitout" / "fit.json").read_text())
    assert abs(result["values"]["mole_fraction"] - 0.7) < 1e-6
    assert (tmp_path / "fitout" / "fit.png").exists()


def test_fit_missing_file_exits_4(tmp_path, capsys):
    code = main(
        [
            "fit",
            "--measured", str(tmp_path / "nope.csv"),
            "--lines", str(bundled_line_list_path()),
        ]
    )
    assert code == 4
    assert "i/o error" in capsys.readouterr().err


def test_fit_iteration_budget_exits_3(tmp_path, capsys):
    from edcs.absorption import GasCell, calibrate_strength_scale, ingest_line_list, save_line_list, transmittance
    from edcs.ioutil import fnum, write_csv

    lines = ingest_line_list(bundled_line_list_path())
    cell = GasCell(17.5, 25.0, 296.0, 0.7)
    lines, _ = calibrate_strength_scale(lines, cell, 3.0)
    line_path = tmp_path / "lines.csv"
    save_line_list(lines, line_path)
    freqs = np.linspace(1.945e14, 1.965e14, 60)
    etas = transmittance(freqs, cell, lines)
    meas = tmp_path / "measured.csv"
    write_csv(
        meas,
        ["optical_freq_hz", "eta", "sigma"],
        [(fnum(f), fnum(e), "0.01") for f, e in zip(freqs, etas)],
    )
    code = main(
        [
            "fit",
            "--measured", str(meas),
            "--lines", str(line_path),
            "--init-mole-fraction", "0.05",
            "--max-nfev", "2",
            "-o", str(tmp_path / "fitout"),
        ]
    )
    assert code == 3
    assert "numerical error" in capsys.readouterr().err


def test_speedup_command_smoke(tmp_path):
    path = write_config(
        tmp_path,
        speedup={"m_list": [1, 10, 50], "n_seeds": 10},
        dsp={"sample_rate_hz": 100.0e6, "duration_s": 5.0e-4, "rbw_hz": 1.0e5},
    )
    assert main(["speedup", "-c", str(path)]) == 0
    out = tmp_path / "out"
    payload = json.loads((out / "speedup.json").read_text())
    assert payload["speedup"] > 1.0
    assert abs(payload["speedup"] / payload["speedup_analytic"] - 1.0) < 0.2
    assert (out / "precision.png").exists()
    assert (out / "precision_curves.csv").exists()


def test_uar_sweep_command_smoke(tmp_path):
    path = write_config(
        tmp_path,
        uar={
            "squeeze_db": 10.0,
            "antisqueeze_db": 15.0,
            "n_pairs": 10,
            "uar_values": [1.0, 10.0],
            "depth_values_db": [0.1, 3.0],
        },
    )
    assert main(["uar-sweep", "-c", str(path)]) == 0
    out = tmp_path / "out"
    body = (out / "uar_sweep.csv").read_text().splitlines()
    assert body[1].startswith("uar,")
    assert len(body) == 2 + 4
    payload = json.loads((out / "uar_sweep.json").read_text())
    adv = np.array(payload["advantage_adaptive_db"])
    assert adv.shape == (2, 2)
    assert (out / "uar_sweep.png").exists()


def test_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path)
    main(["simulate", "-c", str(path), "-o", str(tmp_path / "a")])
    main(["simulate", "-c", str(path), "-o", str(tmp_path / "b"), "--seed", "99"])
    a = (tmp_path / "a" / "spectrum.csv").read_bytes()
    b = (tmp_path / "b" / "spectrum.csv").read_bytes()
    assert a != b
