import json
import math

import numpy as np
import pytest

from heredlab import ConfigurationError
from heredlab.cards import load_material, material_from_dict, material_to_dict
from heredlab.cli import RunConfig, dumps, main
from heredlab.material import IsotropicMaterial, ScalarMaterial

SLS = {"C0": 1.0, "modes": [{"C": 1.0, "lambda": 1.0}]}


@pytest.fixture
def card(tmp_path):
    def write(data, name="m.json"):
        p = tmp_path / name
        p.write_text(json.dumps(data))
        return str(p)

    return write


def run_json(capsys, argv):
    code = main(argv + ["--json"])
    out = capsys.readouterr().out
    return code, json.loads(out)


# --- cards ------------------------------------------------------------------


def test_scalar_card_round_trip():
    m = material_from_dict(SLS)
    assert isinstance(m, ScalarMaterial)
    assert m.moduli.instantaneous == 2.0
    assert material_from_dict(material_to_dict(m)) == m


def test_measure_card_round_trip():
    data = {"C0": 0.5, "measure": {"lambda0": 0.1, "atoms": [[2.0, 1.0]]}}
    m = material_from_dict(data)
    assert material_from_dict(material_to_dict(m)) == m


def test_isotropic_card_round_trip():
    data = {"bulk": {"C0": 3.0, "modes": []}, "shear": SLS, "incompressible": False}
    m = material_from_dict(data)
    assert isinstance(m, IsotropicMaterial)
    assert material_from_dict(material_to_dict(m)) == m
    inc = material_from_dict({"shear": SLS, "incompressible": True})
    assert inc.kernel.incompressible


def test_card_problems_are_aggregated():
    bad = {"C0": -1, "modes": [{"C": 0, "lambda": 1}, {"C": 1}, "x"], "junk": 1}
    with pytest.raises(ConfigurationError) as info:
        material_from_dict(bad)
    assert len(info.value.problems) == 5


def test_isotropic_card_problems():
    with pytest.raises(ConfigurationError) as info:
        material_from_dict({"shear": SLS, "bulk": SLS, "incompressible": True, "x": 0})
    assert len(info.value.problems) == 2
    with pytest.raises(ConfigurationError):
        material_from_dict({"incompressible": False})


def test_unreadable_card(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_material(p)


# --- serialization ----------------------------------------------------------


def test_dumps_deterministic_and_exact():
    obj = {"b": 0.1, "a": [1, math.inf, -math.inf, math.nan], "c": np.float64(1 / 3)}
    text = dumps(obj)
    assert text.index('"a"') < text.index('"b"')
    back = json.loads(text)
    assert back["b"] == 0.1 and back["c"] == 1 / 3
    assert back["a"][1] == math.inf and math.isnan(back["a"][3])


# --- commands ---------------------------------------------------------------


def test_certify_sls(card, capsys):
    code, out = run_json(capsys, ["certify", "--material", card(SLS)])
    assert code == 0
    assert out["certificate"]["gamma"] == 0.5
    assert out["certificate"]["contractive"]


def test_certify_not_contractive_exit_3(card, capsys):
    heavy = {"C0": 0.1, "modes": [{"C": 10.0, "lambda": 1.0}]}
    code, out = run_json(capsys, ["certify", "--material", card(heavy), "--lambda0", "0.95", "--require-contractive"])
    assert code == 3 and not out["certificate"]["contractive"]


def test_picard_requires_decaying_weight_exit_3(card, capsys):
    code = main(["solve", "--material", card(SLS), "--mode", "creep", "--T", "1", "--method", "picard",
                 "--lambda0", "2"])
    assert code == 3


def test_picard_non_convergence_exit_4(card, capsys):
    code = main(["solve", "--material", card(SLS), "--mode", "creep", "--T", "5", "--method", "picard",
                 "--max-iter", "2", "--tol", "1e-14"])
    assert code == 4
    assert '"converged": false' in capsys.readouterr().err


def test_bad_csv_problems_are_capped(card, capsys, tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("t,sigma\n" + "x,1\n" * 30)
    assert main(["solve", "--material", card(SLS), "--input", str(csv)]) == 2
    assert "and 20 more" in capsys.readouterr().err


def test_config_errors_exit_2(card, capsys):
    code = main(["reduce", "--material", "missing.json", "--T", "-1", "--rank", "-2"])
    assert code == 2
    err = capsys.readouterr().err
    assert "file not found" in err


def test_modulus_at_zero_frequency(card, capsys):
    code, out = run_json(capsys, ["modulus", "--material", card(SLS), "--omega", "0"])
    pt = out["laws"][0]["points"][0]
    assert code == 0 and pt["storage"] == 1.0 and pt["loss"] == 0.0


def test_reduce_rank_zero_reports_leading_singular_value(card, capsys):
    code, out = run_json(capsys, ["reduce", "--material", card(SLS), "--T", str(math.pi), "--rank", "0"])
    law = out["laws"][0]
    assert code == 0
    assert law["truncation_error"] == pytest.approx(law["operator_norm"], rel=1e-12)
    cmp = law["sls_comparison"][0]
    assert cmp["rel_dev_extrapolated"] < 1e-6


def test_solve_custom_input_matches_creep(card, capsys, tmp_path):
    t = np.linspace(0, 2, 201)
    csv = tmp_path / "sigma.csv"
    csv.write_text("t,sigma\n" + "".join(f"{float(a)!r},1.0\n" for a in t))
    _, custom = run_json(capsys, ["solve", "--material", card(SLS), "--input", str(csv)])
    _, creep = run_json(capsys, ["solve", "--material", card(SLS), "--mode", "creep", "--T", "2", "--steps", "200"])
    assert custom["laws"][0]["final_strain"] == pytest.approx(creep["laws"][0]["final_strain"], rel=1e-12)


def test_spectrum_to_prony_and_distance(card, capsys, tmp_path):
    nu = card({"lambda0": 0.0, "density": {"support": [1.0, 2.0], "values": [1.0, 1.0]}}, "nu.json")
    code, out = run_json(capsys, ["spectrum", "--measure", nu, "--to-prony", "32"])
    assert code == 0 and out["atomization"]["distance"] <= 1e-8 and out["atomization"]["atoms"] == 32
    code, out = run_json(capsys, ["spectrum", "--measure", nu, "--distance", nu])
    assert out["distance"] == 0.0


def test_output_is_byte_deterministic(card, tmp_path, capsys):
    m = card(SLS)
    out = tmp_path / "o"
    argv = ["solve", "--material", m, "--mode", "creep", "--T", "3", "--method", "picard", "--output", str(out)]
    snapshots = []
    for _ in range(2):
        assert main(argv) == 0
        snapshots.append({n: (out / n).read_bytes() for n in ("summary.json", "strain.csv")})
    capsys.readouterr()
    assert snapshots[0] == snapshots[1]


def test_summary_config_round_trips(card, tmp_path, capsys):
    m = card(SLS)
    code, out = run_json(capsys, ["modulus", "--material", m, "--omega-range", "0.1", "10", "5"])
    cfg = RunConfig.from_dict(out["config"])
    assert cfg.command == "modulus" and cfg.omega_range == (0.1, 10.0, 5)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_thread_env(card, capsys, monkeypatch):
    monkeypatch.setenv("HEREDLAB_THREADS", "1")
    assert main(["certify", "--material", card(SLS)]) == 0
    monkeypatch.setenv("HEREDLAB_THREADS", "zero")
    assert main(["certify", "--material", card(SLS)]) == 2


def test_plot_writes_figures(card, tmp_path, capsys):
    pytest.importorskip("matplotlib")
    out = tmp_path / "o"
    assert main(["reduce", "--material", card(SLS), "--T", "3", "--rank", "2", "--grid", "60",
                 "--output", str(out), "--plot"]) == 0
    assert any(p.suffix == ".png" for p in out.iterdir())


def test_plot_needs_output(card, capsys):
    assert main(["certify", "--material", card(SLS), "--plot"]) == 2
