import json

import pytest

from choifilter.cli import main, parse_args
from choifilter.errors import InputError


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"j_over_h": 0.8, "sizes": "4,6", "max-bond": 32}))
    args = parse_args(["sweep", "--config", str(cfg), "--max-bond", "16"])
    assert args.j_over_h == 0.8 and args.sizes == [4, 6] and args.max_bond == 16
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(InputError):
        parse_args(["sweep", "--config", str(cfg)])


def test_grid_syntax():
    assert parse_args(["sweep", "--pzz-grid", "0:0.5:0.25"]).pzz_grid == [0.0, 0.25, 0.5]
    assert parse_args(["sweep", "--pzz-grid", "0.1,0.3"]).pzz_grid == [0.1, 0.3]


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["sweep"]) == 2
    assert main(["sweep", "--j-over-h", "1", "--sizes", "5"]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2


def test_prepare_sweep_fit(tmp_path, capsys):
    ck = tmp_path / "ck"
    assert main(["prepare", "--j-over-h", "1.2", "--sizes", "4", "--out", str(ck)]) == 0
    assert len(list(ck.glob("*.mps"))) == 1
    out = tmp_path / "s.csv"
    code = main(["sweep", "--j-over-h", "1.0", "--sizes", "4,6,8", "--pzz-grid", "0:0.5:0.05",
                 "--out", str(out)])
    assert code == 0
    assert "p_c =" in capsys.readouterr().out
    fits = tmp_path / "fits.json"
    assert main(["fit", str(out), "--out", str(fits)]) == 0
    assert json.loads(fits.read_text())["extrapolation"] is not None


def test_fit_failure_exit_4(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--j-over-h", "1.0", "--sizes", "4", "--pzz-grid", "0,0.1", "--out", str(out)]) == 0
    assert main(["fit", str(out)]) == 4


def test_convergence_exit_3(tmp_path):
    code = main(["prepare", "--j-over-h", "1.0", "--sizes", "8", "--max-sweeps", "1", "--out", str(tmp_path)])
    assert code == 3


def test_validate(capsys):
    assert main(["validate", "--pzz-grid", "0,0.25,0.5"]) == 0
    assert "max deviation" in capsys.readouterr().out
