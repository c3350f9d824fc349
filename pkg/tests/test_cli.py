import json
import math
from pathlib import Path

import pytest
import yaml

from atomarray_om import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_SIM = {"n_photon_max": 3, "n_phonon_max": 10, "delta_points": 5, "tau_points": 80,
             "tau_max_kappa": 30}


def write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def run(verb, cfg_path, out, *extra):
    return cli.main([verb, cfg_path, "--out", str(out), *extra])


def small_fig4(**model):
    return {"physical": {"preset": "fig3"}, "simulation": dict(SMALL_SIM),
            "model": {"delta_L": "-G", **model}}


@pytest.mark.parametrize("verb,cfg", [
    ("map-params", {"physical": {"preset": "fig3"}}),
    ("regime-map", {"physical": {"preset": "fig3"},
                    "regime_map": {"axis1": {"name": "cavity_length", "start": "5 mm", "stop": "10 cm",
                                             "num": 4, "log": True},
                                   "axis2": {"name": "waist", "values": ["10 um", "20 um", "40 um"]}}}),
    ("g2-sweep", small_fig4()),
    ("g2-tau", small_fig4()),
    ("spectrum", small_fig4()),
    ("trajectories", {**small_fig4(), "trajectories": {"n_traj": 20, "t_max": 30}}),
    ("lattice-band", {"lattice": {"nx": 20, "a_over_lambda": 0.6, "w_over_a": 3, "k_points": 4}}),
    ("disorder-scan", {"lattice": {"nx": 30, "a_over_lambda": 0.6, "w_over_a": 5},
                       "disorder": {"eta_grid": [0.1, 0.2], "n_samples": 10}}),
])
def test_every_verb_runs(tmp_path, verb, cfg, capsys):
    out = tmp_path / "out"
    assert run(verb, write(tmp_path, cfg), out, "--seed", "3") == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == verb and man["seed"] == 3
    assert all((out / f).exists() for f in man["files"])


def test_shipped_configs_parse():
    from atomarray_om import io
    for p in CONFIGS.glob("*.yaml"):
        assert isinstance(io.load_config(p), dict)


def test_map_params_fig4_ratios(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("map-params", str(CONFIGS / "fig4.yaml"), out) == 0
    s = json.loads((out / "params.json").read_text())
    assert s["g_over_omega_m"] == pytest.approx(0.49, abs=0.01)
    assert s["kappa_over_omega_m"] == pytest.approx(0.275, abs=0.01)


def test_map_params_hem(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("map-params", str(CONFIGS / "hem.yaml"), out) == 0
    s = json.loads((out / "params.json").read_text())
    assert s["rates"]["omega_m"]["x2pi_Hz"] == pytest.approx(94.33e3, rel=1e-3)


def test_malformed_config_exit1_no_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("physical: [unclosed\n")
    out = tmp_path / "never"
    assert run("map-params", str(bad), out) == 1
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


def test_unknown_field_is_named(tmp_path, capsys):
    cfg = {"lattice": {"nx": 10, "spacing_typo": 3}}
    out = tmp_path / "never"
    assert run("lattice-band", write(tmp_path, cfg), out) == 1
    assert "spacing_typo" in capsys.readouterr().err
    assert not out.exists()


def test_unit_string_parsing(tmp_path, capsys):
    cfg = {"physical": {"preset": "fig3", "gamma": "6.07 x2pi MHz"}}
    out = tmp_path / "o"
    assert run("map-params", write(tmp_path, cfg), out) == 0
    assert json.loads((out / "manifest.json").read_text())["command"] == "map-params"
    bad = {"physical": {"preset": "fig3", "gamma": "6.07 parsecs"}}
    assert run("map-params", write(tmp_path, bad, "b.yaml"), tmp_path / "x") == 1


def test_reruns_are_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path, {**small_fig4(), "trajectories": {"n_traj": 10, "t_max": 30}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("trajectories", cfg, a, "--seed", "7") == 0
    assert run("trajectories", cfg, b, "--seed", "7") == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_nonconvergence_exit2(tmp_path, capsys):
    # undamped mechanics: the time march never settles within the budget
    cfg = small_fig4()
    cfg["simulation"].update(engine="master_equation", method="time_march", t_max=2)
    out = tmp_path / "never"
    assert run("g2-tau", write(tmp_path, cfg), out) == 2
    assert "numerical failure" in capsys.readouterr().err
    assert not out.exists()


def test_spectrum_bare_oscillators(tmp_path, capsys):
    cfg = {"model": {"g": 0.0, "kappa": 0.3, "delta_L": -0.5},
           "simulation": {"n_photon_max": 2, "n_phonon_max": 4}, "spectrum": {"count": 6}}
    out = tmp_path / "o"
    assert run("spectrum", write(tmp_path, cfg), out, "--format", "csv") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    levels = [float(l.split()[1]) for l in lines]
    expect = sorted(0.5 * n1 + n2 for n1 in range(3) for n2 in range(5))[:6]
    assert levels == pytest.approx(expect, abs=1e-10)
    assert not (out / "spectrum.svg").exists()


def test_format_selection_rejects_unknown(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["map-params", "x.yaml", "--format", "pdf"])


def test_strong_drive_guard(tmp_path, capsys):
    cfg = small_fig4()
    cfg["simulation"]["omega_ratio"] = 0.5
    assert run("g2-sweep", write(tmp_path, cfg), tmp_path / "n") == 1
    cfg["simulation"]["allow_strong_drive"] = True
    cfg["simulation"]["engine"] = "master_equation"
    cfg["model"]["gamma_m"] = 0.5
    cfg["simulation"].update(method="null_space", n_phonon_max=6, delta_points=2)
    assert run("g2-sweep", write(tmp_path, cfg, "s.yaml"), tmp_path / "s") == 0


def test_lattice_band_marks_light_cone_points(tmp_path, capsys):
    # k = (pi, 2pi/3)/a lies 0.3% outside the light cone at a = 0.6 lambda
    cfg = {"lattice": {"nx": 20, "a_over_lambda": 0.6, "w_over_a": 3, "k_points": 4}}
    out = tmp_path / "o"
    assert run("lattice-band", write(tmp_path, cfg), out, "--format", "csv") == 0
    rows = (out / "lattice_band.csv").read_text().strip().splitlines()
    assert rows[0].endswith("converged") and len(rows) == 1 + 7
    assert any(r.endswith("false") for r in rows[1:])
    man = json.loads((out / "manifest.json").read_text())
    assert len(man["summary"]["failed_points"]) >= 1
    assert man["summary"]["gamma0_over_gamma"] == pytest.approx(
        man["summary"]["gamma0_diffraction_oracle"], rel=1e-5)
