import csv
import io
from pathlib import Path

import pytest

from wakesim.cli import main, pdr_checks, pdr_sweep
from wakesim.config import ConfigError, Document, data_path
from wakesim.scenario import LEDGER_COLUMNS, TRACE_COLUMNS, load_scenario, parse_scenario


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_tables_rows(capsys):
    code, out, _ = run(capsys, "tables")
    assert code == 0
    assert "1024 bit/s, 6.88 µW" in out
    assert "1.8 V, 2.78 dBm, 26.08 mW" in out
    assert "SetupWuR, 1.14 mJ, 564.2 ms" in out
    assert "sender 1.33 mJ / 72.58 ms" in out
    assert "FAIL" not in out


def test_tables_tampered(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(data_path("power_tables.yaml").read_text().replace("consumption_mw: 58.68", "consumption_mw: lots"))
    code, _, err = run(capsys, "tables", "--config", str(bad))
    assert code == 2
    assert "tx[2].consumption_mw" in err and "bad.yaml:" in err


def test_tables_reference_failure_exits_nonzero(capsys, tmp_path):
    off = tmp_path / "off.yaml"
    off.write_text(data_path("power_tables.yaml").read_text().replace("sender_energy_mj: 1.33", "sender_energy_mj: 1.40"))
    code, out, _ = run(capsys, "tables", "--config", str(off))
    assert code == 1 and "FAIL" in out


@pytest.mark.parametrize("argv", [[], ["--ldr", "32768"], ["--ldr", "32768", "--voltage", "3.3"],
                                  ["--ldr", "32768", "--payload-bits", "48"]])
def test_transaction_agrees(capsys, argv):
    code, out, _ = run(capsys, "transaction", *argv)
    assert code == 0, out
    assert "FAIL" not in out


def test_transaction_values_surface(capsys):
    _, out, _ = run(capsys, "transaction", "--ldr", "32768", "--payload-bits", "48")
    assert "83.0766" in out and "53.3609" in out


def test_transaction_rejects_low_rate(capsys):
    code, _, err = run(capsys, "transaction", "--ldr", "512")
    assert code == 2 and "1024" in err


def test_lifetime_points(capsys):
    code, out, _ = run(capsys, "lifetime")
    assert code == 0
    assert out.count("PASS") == 4


def test_lifetime_sweep_csv(capsys, tmp_path):
    path = tmp_path / "life.csv"
    assert run(capsys, "lifetime", "--sweep", "--out", str(path))[0] == 0
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert list(rows[0]) == ["rate_hz", "avg_power_w", "lifetime_s", "lifetime_years"]
    rates = [float(r["rate_hz"]) for r in rows]
    assert rates == sorted(rates)
    assert any(abs(r - 1 / 3600) < 1e-15 for r in rates)


def test_simulate_is_byte_identical(capsys, tmp_path):
    near = tmp_path / "near.yaml"
    near.write_text(scenario_text(**{"position_m: [100, 0]": "position_m: [10, 0]"}))
    for d in ("a", "b"):
        assert run(capsys, "simulate", "--config", str(near), "--out", str(tmp_path / d))[0] == 0
    for name in ("trace.csv", "ledger.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    trace = list(csv.reader(io.StringIO((tmp_path / "a" / "trace.csv").read_text())))
    ledger = list(csv.reader(io.StringIO((tmp_path / "a" / "ledger.csv").read_text())))
    assert tuple(trace[0]) == TRACE_COLUMNS and tuple(ledger[0]) == LEDGER_COLUMNS
    assert any(r[2] == "irq-assert" and r[3] == "payload=0102030405ff" for r in trace[1:])
    assert any(r[3] == "response reason=wur payload=0102030405ff" for r in trace[1:])


def test_pdr_sweep_small(capsys, tmp_path):
    path = tmp_path / "pdr.csv"
    code, _, err = run(capsys, "pdr-sweep", "--trials", "100", "--distances", "1.1,50,100,150", "--out", str(path))
    assert code == 0, err
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert [float(r["distance_m"]) for r in rows] == [1.1, 50, 100, 150]
    assert all(float(r["pdr_empirical"]) >= 0.85 for r in rows[:3])
    assert float(rows[3]["pdr_empirical"]) == 0


def test_pdr_sweep_rerun_identical(capsys, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        run(capsys, "pdr-sweep", "--trials", "50", "--distances", "120,130", "--seed", "5", "--out", str(tmp_path / name))
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_pdr_sweep_bad_trials(capsys):
    assert run(capsys, "pdr-sweep", "--trials", "0")[0] == 2


def test_pdr_130m_large():
    scn = load_scenario()
    rows = pdr_sweep(scn, [130.0, 150.0], 10_000, scn.seed)
    assert abs(rows[0]["pdr_empirical"] - 0.11) <= 0.01
    assert rows[1]["pdr_empirical"] == 0
    assert all(ok for _, ok in pdr_checks(rows))


def scenario_text(**repl):
    text = data_path("field_test.yaml").read_text()
    for old, new in repl.items():
        assert old in text
        text = text.replace(old, new)
    return text


def test_scenario_requires_seed():
    with pytest.raises(ConfigError, match="seed"):
        parse_scenario(Document(scenario_text(**{"seed: 2025\n": ""})))


def test_scenario_unknown_preset():
    with pytest.raises(ConfigError, match="link_preset"):
        parse_scenario(Document(scenario_text(**{"link_preset: field": "link_preset: moon"})))


def test_scenario_unknown_command_has_line():
    with pytest.raises(ConfigError, match=r":16: field 'script\[2\]\.command'"):
        parse_scenario(Document(scenario_text(**{"command: SendWuC": "command: Launch"})))


def test_simulate_tampered_scenario_exit(capsys, tmp_path):
    bad = tmp_path / "s.yaml"
    bad.write_text(scenario_text(**{"voltage_v: 1.8, address: 0x0001": "voltage_v: high, address: 0x0001"}))
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == 2 and "devices[0].voltage_v" in err


def test_example_scenario_runs(capsys):
    path = Path(__file__).parents[1] / "scenarios" / "three_tags.yaml"
    code, out, _ = run(capsys, "simulate", "--config", str(path))
    assert code == 0
    assert "tag_near,command,response reason=wur payload=0a0b" in out
    assert "tag_far,frame-complete,address 0x00a1 not ours" in out
