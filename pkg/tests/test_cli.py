import csv
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from riveq import ConfigParseError
from riveq.cli import load_config, main, parse_config, run_scenario

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def rows(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_all_shipped_configs_parse():
    names = sorted(p.stem for p in CONFIGS.glob("*.ini"))
    assert len(names) >= 6
    for p in CONFIGS.glob("*.ini"):
        cfg = load_config(p)
        assert cfg.system.convention().startswith("delta=")


def test_solve_writes_csv_and_svg(tmp_path):
    assert main(["solve", "--config", str(CONFIGS / "play_operator.ini"), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "solve.csv").read_text()
    assert "# delta=(mu/2)*(v-u)^2;mu=1.0" in text
    r = rows(tmp_path / "solve.csv")
    assert list(r[0]) == ["t", "u", "u_left", "u_right", "stable", "margin_ir", "margin_sl"]
    for row in r:
        assert float(row["u"]) == pytest.approx(max(0.0, float(row["t"]) - 1.0), abs=1e-8)
        assert row["stable"] == "1"
    for svg in ("solve_u.svg", "solve_phase.svg"):
        assert ET.parse(tmp_path / svg).getroot().tag.endswith("svg")


def test_output_is_deterministic(tmp_path):
    cfg = str(CONFIGS / "play_operator.ini")
    for sub in ("a", "b"):
        assert main(["slopes", "--config", cfg, "--out", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "slopes.csv").read_bytes() == (tmp_path / "b" / "slopes.csv").read_bytes()


def test_verify_transition_and_envelope(tmp_path):
    cfg = str(CONFIGS / "quartic_rate_independent.ini")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == 0
    bal = rows(tmp_path / "balance.csv")
    assert len(bal) == 1 and abs(float(bal[0]["defect"])) < 1e-5
    assert all(r["passed"] == "1" for r in rows(tmp_path / "verify.csv"))

    assert main(["transition", "--config", cfg, "--out", str(tmp_path)]) == 0
    tr = rows(tmp_path / "transition.csv")
    assert [float(r["point"]) for r in tr] == pytest.approx([-1.0, 1.0])
    assert tr[1]["gap_kind"] == "hole" and tr[0]["regime"] == "sliding"
    assert "certified=1" in (tmp_path / "transition.csv").read_text().splitlines()[-2]

    assert main(["envelope", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "plateau level=0 from=-1" in (tmp_path / "envelope.csv").read_text()
    assert main(["admissibility", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "admissibility.csv")[0]["passed"] == "1"


def test_sweep_with_workers(tmp_path):
    text = (CONFIGS / "quartic_rate_independent.ini").read_text().replace("samples = 1025", "samples = 257")
    text = text.replace("[run]", "[run]\nworkers = 2")
    cfg = parse_config(text, "sweep-test")
    assert run_scenario(cfg, "sweep", tmp_path, mu_grid="0:0.3:2") == 0
    summary = rows(tmp_path / "sweep.csv")
    assert [float(r["mu"]) for r in summary] == pytest.approx([0.0, 0.3])
    # [DERIVED] trigger mu sqrt(1 - mu) below the delay regime
    assert float(summary[1]["trigger_level"]) == pytest.approx(0.3 * 0.7 ** 0.5, abs=1e-6)
    assert (tmp_path / "sweep_mu_001.csv").exists()


def test_exit_codes(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\nalpha_plus = 0.5\nalpha_minus = 0.5\nenergy = sextic\n[loading]\ninterval = 0, 1\n")
    assert main(["solve", "--config", str(bad)]) == 2
    assert "config-parse" in capsys.readouterr().err
    with pytest.raises(SystemExit) as err:
        main(["bogus", "--config", str(bad)])
    assert err.value.code == 2
    odd = tmp_path / "odd.ini"
    odd.write_text((CONFIGS / "play_operator.ini").read_text())
    assert main(["solve", "--config", str(odd), "--out", str(tmp_path), "--levels", "1"]) == 2


@pytest.mark.parametrize("text", [
    "[system]\nalpha_plus = 1\nalpha_minus = 1\n",
    "[system]\nalpha_plus = x\nalpha_minus = 1\n[loading]\ninterval = 0, 1\n",
    "[system]\nalpha_plus = 1\nalpha_minus = 1\nenergy = composite\n[loading]\ninterval = 0, 1\n",
    "[system]\nalpha_plus = 1\nalpha_minus = 1\n[loading]\ninterval = 0\n",
    "[system]\nalpha_plus = 1\nalpha_minus = 1\n[loading]\ninterval = 0, 1\n[run]\ntie_rule = random\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigParseError):
        parse_config(text)


def test_composite_and_piecewise_configs_parse():
    text = (CONFIGS / "composite_double_chain.ini").read_text()
    cfg = parse_config(text)
    assert cfg.system.W.breakpoints == (1.0, 1.5)
    pw = parse_config("[system]\nalpha_plus = 1\nalpha_minus = 1\n[loading]\nkind = piecewise\n"
                      "segment1 = 0 1 : 0, 0, 1\nsegment2 = 1 2 : -1, 2\n")
    assert pw.system.ell.value(1.5) == pytest.approx(2.0)
