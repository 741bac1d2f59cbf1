import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc_imaging.cli import main
from spdc_imaging.config import ConfigError, parse_config, serialize
from spdc_imaging.detection import ScanResult
from spdc_imaging.scanfile import ScanFileError, format_scan, read_scan, write_scan

SMALL = """
[geometry]
z1 = 34 cm
z2 = 7 cm
f = 25 cm
z = auto

[grid]
n = 512

[detection]
steps = 101
"""

LENS_FREE = """
[geometry]
z1 = 34 cm
z2 = 0 m
z = 70 cm
"""


def test_minimal_config_uses_defaults():
    cfg = parse_config("[geometry]\nz1 = 34 cm\nz2 = 7 cm\nf = 25 cm\n")
    assert cfg.n == 4096 and cfg.dx_auto and cfg.z_auto
    assert cfg.geometry.is_imaging()
    assert cfg.pump.wavelength == 442e-9
    assert cfg.mode == "same" and cfg.scan_range == 1.2e-3 and cfg.steps == 101
    assert not cfg.noise_enabled


def test_lens_free_range_default():
    assert parse_config(LENS_FREE).scan_range == 6e-3


def test_units_convert_exactly():
    cfg = parse_config("[geometry]\nz1 = 34 cm\nz2 = 0 m\nz = 70 cm\n[object]\na = 100 um\n")
    assert cfg.geometry.z1 == 0.34
    assert cfg.pump.mask.a == 1e-4


def test_zero_focal_length_names_element_and_line():
    with pytest.raises(ConfigError) as err:
        parse_config("[geometry]\nz1 = 34 cm\nz2 = 7 cm\nf = 0 m\n")
    assert "ThinLens" in str(err.value) and "line 4" in str(err.value)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[geometry]\nz1 = 34 cm\nspeed = 3 m\n", 3, "unknown key"),
        ("[geometry]\nz1 = 34\n", 2, "needs a unit"),
        ("[geometry]\nz1 = 34 ft\n", 2, "unknown unit"),
        ("[optics]\n", 1, "unknown section"),
        ("z1 = 34 cm\n", 1, "outside"),
        ("[geometry]\nz1 = auto\n", 2, "auto"),
        ("[geometry]\nz1 = 34 cm\nz1 = 35 cm\n", 3, "duplicate"),
        ("[noise]\nenabled = maybe\n", 2, "true or false"),
    ],
)
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert f"line {line}" in str(err.value) and fragment in str(err.value)


def test_serialize_round_trip():
    cfg = parse_config(SMALL)
    for resolved in (False, True):
        assert parse_config(serialize(cfg, resolved)) == parse_config(serialize(parse_config(serialize(cfg, resolved)), resolved))
    assert parse_config(serialize(cfg)) == cfg


@settings(max_examples=30, deadline=None)
@given(
    st.integers(5, 60).map(lambda c: c / 100),
    st.integers(1, 20).map(lambda c: c / 100),
    st.integers(150, 900).map(lambda u: u * 1e-6),
    st.integers(0, 2**31 - 1),
)
def test_round_trip_random_values(z1, z2, d, seed):
    text = f"[geometry]\nz1 = {z1!r} m\nz2 = {z2!r} m\nz = 1.2 m\n[object]\nd = {d!r} m\n[noise]\nseed = {seed}\n"
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg


def make_result():
    x = np.linspace(-1e-3, 1e-3, 5)
    return ScanResult(x, np.array([0.0, 0.5, 1.0, 0.5, 0.25]), "same", "max-normalized", meta={"n": 512})


def test_scan_file_round_trip(tmp_path):
    path = write_scan(tmp_path / "s.txt", make_result(), serialize(parse_config(SMALL)))
    back = read_scan(path)
    np.testing.assert_array_equal(back.rates, make_result().rates)
    np.testing.assert_allclose(back.positions, make_result().positions, rtol=1e-15)
    assert back.header["mode"] == "same" and back.header["meta.n"] == "512"
    assert parse_config(back.config_text) == parse_config(SMALL)


def test_scan_file_rejects_bad_input(tmp_path):
    bad = make_result()
    bad.rates[0] = -1
    with pytest.raises(ScanFileError):
        format_scan(bad)
    (tmp_path / "x.txt").write_text("hello\n")
    with pytest.raises(ScanFileError):
        read_scan(tmp_path / "x.txt")


# --------------------------------------------------------------------- CLI


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_pump_scan_writes_file(small_cfg, tmp_path, capsys):
    assert main(["pump-scan", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
    scan = read_scan(tmp_path / "pump_scan.txt")
    assert scan.rates.size == 101 and scan.rates.max() == 1.0
    assert "grid: n=512" in capsys.readouterr().out


def test_coincidence_scan_is_independent_of_workers(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        assert main(["coincidence-scan", "--config", str(small_cfg), "--mode", "fixed",
                     "--out", str(out), "--workers", str(w)]) == 0
    a = (tmp_path / "w1" / "coincidence_fixed-signal.txt").read_bytes()
    assert a == (tmp_path / "w3" / "coincidence_fixed-signal.txt").read_bytes()
    assert b"2023-11-14T22:13:20Z" in a


def test_bad_config_exits_1(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("[geometry]\nz1 = 34 cm\nz2 = 7 cm\nf = 0 m\n")
    assert main(["pump-scan", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "line 4" in capsys.readouterr().err


def test_missing_config_file_exits_1(tmp_path):
    assert main(["pump-scan", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_bad_workers_exit_1(small_cfg):
    assert main(["pump-scan", "--config", str(small_cfg), "--workers", "0"]) == 1


def test_fig3_needs_lens(tmp_path):
    p = tmp_path / "free.cfg"
    p.write_text(LENS_FREE)
    assert main(["reproduce-fig3", "--config", str(p), "--out", str(tmp_path)]) == 1


def test_reproduce_reports_unmeasurable_scan_with_exit_2(tmp_path, capsys):
    # a range too short to hold both image peaks
    p = tmp_path / "short.cfg"
    p.write_text(SMALL + "range = 0.1 mm\n")
    assert main(["reproduce-fig3", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "FAIL" in (tmp_path / "fig3_summary.txt").read_text()


def test_reproduce_fig3_small_grid(small_cfg, tmp_path):
    assert main(["reproduce-fig3", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "fig3_summary.txt").read_text()
    assert summary.count("PASS") == 2
    for name in ("pump", "fixed-signal", "same"):
        assert (tmp_path / f"fig3_{name}.txt").exists()


def test_verify_passes_on_small_grid(small_cfg, tmp_path):
    assert main(["verify", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "verify_report.txt").read_text()
    assert text.rstrip().endswith("0 failed")
    assert "INFO" in text


def test_verify_fails_with_exit_2_when_grid_too_coarse(tmp_path):
    p = tmp_path / "coarse.cfg"
    p.write_text(SMALL.replace("n = 512", "n = 128"))
    assert main(["verify", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "FAIL" in (tmp_path / "verify_report.txt").read_text()


def test_console_script_entry_point(small_cfg, tmp_path):
    env = dict(os.environ, SOURCE_DATE_EPOCH="0")
    r = subprocess.run([sys.executable, "-m", "spdc_imaging.cli", "pump-scan", "--config", str(small_cfg),
                        "--out", str(tmp_path)], capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
