import json
import shutil
import subprocess

import numpy as np
import pytest

from solsurf.cli import UsageError, main, parse_values, thread_cap


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_lax_passes(capsys, tmp_path):
    summary = tmp_path / "s.json"
    code, out, _ = run(capsys, "verify", "lax", "lsp", "--model", "cn", "--k", "0.8", "--json", str(summary))
    assert code == 0
    assert out.splitlines()[0].startswith("# model=cn k=0.8 lambda=1.2")
    assert out.splitlines()[-1] == "RESULT\tpass"
    data = json.loads(summary.read_text())
    assert data["passed"] and {c["suite"] for c in data["checks"]} == {"lax", "lsp"}


def test_verify_printed_pattern_is_a_breach(capsys):
    # the printed Q3 defect pattern does not hold, so the symmetry suite reports a breach
    code, out, _ = run(capsys, "verify", "symmetry", "--model", "cn", "--k", "0.7071067811865476")
    assert code == 1
    lines = [l for l in out.splitlines() if "Q3" in l]
    assert any(l.endswith("pass") for l in lines if "determining" in l or "entry (2,1)" in l)
    assert any("FAIL" in l and "(2,2)" in l for l in lines)
    assert out.splitlines()[-1] == "RESULT\tfail"


def test_verify_unknown_suite_is_usage_error(capsys):
    code, _, err = run(capsys, "verify", "curvature")
    assert code == 2 and "unknown suite" in err


def test_bad_flag_value_is_usage_error(capsys):
    code, _, err = run(capsys, "verify", "lax", "--k", "abc")
    assert code == 2 and "bad value for 'k'" in err


def test_argparse_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["elliptic", "tan"])
    assert info.value.code == 2


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = wp\nlambda = 1\nx = 0.2:3\ny = -0.6:0.6\nk = nope\n")
    code, _, err = run(capsys, "verify", "lax", "--config", str(cfg))
    assert code == 2 and f"{cfg}:5:5" in err
    cfg.write_text("model = wp\nlambda = 7\nx = 0.2:3\ny = -0.6:0.6\n")
    code, out, _ = run(capsys, "verify", "lax", "--config", str(cfg), "--lambda", "1")
    assert code == 0 and "lambda=1.0 g=-5.0" in out


def test_surface_preset_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "surface", "--preset", "fig3-wp-lm2-ux", "--format", "obj",
                       "--output", str(tmp_path))
    assert code == 0
    obj = tmp_path / "fig3-wp-lm2-ux.obj"
    meta = (tmp_path / "fig3-wp-lm2-ux.meta.txt").read_text()
    assert obj.exists() and "nan" not in obj.read_text()
    assert "correction_fig3-g-value = " in meta and "caption_g = 31" in meta and "lambda = -2.0" in meta


def test_surface_deterministic(capsys, tmp_path):
    args = ["surface", "--model", "sn", "--k", "0.5", "--family", "combo", "--a", "1", "--b", "0.5",
            "--gauge", "e3", "--x=-2:2:9", "--y=-1:1:5"]
    run(capsys, *args, "--output", str(tmp_path / "a.csv"))
    run(capsys, *args, "--output", str(tmp_path / "b.csv"))
    a, b = (tmp_path / "a.csv").read_bytes(), (tmp_path / "b.csv").read_bytes()
    assert a == b and a.startswith(b"x,y,F1,F2,F3\n")


def test_surface_all_masked_is_input_error(capsys, tmp_path):
    # wp grid entirely inside the pole strip
    code, _, err = run(capsys, "surface", "--model", "wp", "--lambda", "1", "--x=-0.05:0.05:3", "--y", "0:1:3",
                       "--output", str(tmp_path))
    assert code == 2 and "masked" in err


def test_gauge_family_needs_term(capsys, tmp_path):
    code, _, err = run(capsys, "surface", "--family", "gauge", "--output", str(tmp_path))
    assert code == 2 and "gauge" in err


def test_list_presets(capsys):
    code, out, _ = run(capsys, "surface", "--list-presets")
    assert code == 0 and "fig3-wp-lm5-ux" in out.split()


def test_fff_csv(capsys, tmp_path):
    path = tmp_path / "fff.csv"
    code, _, _ = run(capsys, "fff", "--model", "wp", "--lambda", "1", "--x", "0.5:2:4", "--y=-0.5:0.5:3",
                     "--output", str(path))
    assert code == 0
    rows = path.read_text().splitlines()
    assert rows[0] == "x,y,E,F,G,E_closed,F_closed,G_closed" and len(rows) == 13
    vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    np.testing.assert_allclose(vals[:, 2], 0.0, atol=1e-9)
    np.testing.assert_allclose(vals[:, 3:5], vals[:, 6:8], rtol=1e-6, atol=1e-9)


def test_elliptic_tables(capsys):
    code, out, _ = run(capsys, "elliptic", "sn", "--x", "1", "--k", "0.5")
    assert code == 0
    assert out.splitlines()[1].split("\t")[2].startswith("0.8226355781298")
    code, out, _ = run(capsys, "elliptic", "ellint_pi", "--u", "0.5", "--alpha2", "0.25", "--k", "0.5")
    row = out.splitlines()[1].split("\t")
    assert row[3].startswith("0.5414380479799") and abs(float(row[4])) < 1e-11
    code, out, _ = run(capsys, "elliptic", "wp", "--x", "0.5:1.5:0.5")
    rows = out.splitlines()[1:]
    assert len(rows) == 3 and all(abs(float(r.split("\t")[5])) < 1e-9 for r in rows)
    code, out, _ = run(capsys, "elliptic", "rj", "--x", "0", "--y", "1", "--z", "2", "--p", "3")
    assert out.splitlines()[1].split("\t")[4].startswith("0.7768862377858")


def test_elliptic_domain_error(capsys):
    code, _, err = run(capsys, "elliptic", "ellint_pi", "--u", "0.9", "--alpha2", "2", "--k", "0.5")
    assert code == 2 and "t*" in err
    code, _, err = run(capsys, "elliptic", "sn", "--x", "1")
    assert code == 2 and "--k is required" in err


def test_parse_values():
    np.testing.assert_allclose(parse_values("0:1:0.25", "x"), [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(parse_values("1,2", "x"), [1, 2])
    with pytest.raises(UsageError):
        parse_values("1:0:1", "x")


def test_thread_cap(monkeypatch):
    monkeypatch.delenv("SOLITON_SURF_THREADS", raising=False)
    assert thread_cap() == 1
    monkeypatch.setenv("SOLITON_SURF_THREADS", "4")
    assert thread_cap() == 4
    monkeypatch.setenv("SOLITON_SURF_THREADS", "zero")
    with pytest.raises(UsageError):
        thread_cap()


def test_threads_env_usage_error(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("SOLITON_SURF_THREADS", "-1")
    code, _, err = run(capsys, "surface", "--preset", "fig2-sn-k02-st", "--output", str(tmp_path))
    assert code == 2 and "SOLITON_SURF_THREADS" in err


@pytest.mark.skipif(shutil.which("solsurf") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["solsurf", "elliptic", "dn", "--x", "1.3", "--k", "0.8"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1].split("\t")[2].startswith("0.68937766046342")
