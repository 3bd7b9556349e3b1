import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodge_frobenius.cli import main
from hodge_frobenius.config import SCHEMA, dump_config, evaluate, parse_config
from hodge_frobenius.csvio import format_grid_csv, parse_report, read_grid_csv, write_grid_csv
from hodge_frobenius.dec import Grid2
from hodge_frobenius.errors import ConfigError

finite = st.floats(-1e6, 1e6, allow_nan=False)
VALUES = {
    "float": finite,
    "int": st.integers(-1000, 1000),
    "bool": st.booleans(),
    "str": st.sampled_from(["scherk", "minimal_surface", "chaplygin", "report.txt"]),
    "expr": st.sampled_from(["x", "sin(x) * y", "log(cos(x) / cos(y))", "r ** 2", "-theta"]),
    "floats": st.lists(finite, min_size=1, max_size=4).map(tuple),
    "ints": st.lists(st.integers(1, 300), min_size=1, max_size=4).map(tuple),
}


@st.composite
def configs(draw):
    lines = []
    for section in draw(st.lists(st.sampled_from(sorted(SCHEMA)), unique=True, max_size=4)):
        lines.append(f"[{section}]")
        keys = draw(st.lists(st.sampled_from(sorted(SCHEMA[section])), unique=True, max_size=4))
        for key in keys:
            value = draw(VALUES[SCHEMA[section][key]])
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ", ".join(repr(v) for v in value)
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


@settings(max_examples=100, deadline=None)
@given(text=configs())
def test_config_roundtrip(text):
    cfg = parse_config(text)
    assert parse_config(dump_config(cfg)) == cfg


def test_comments_and_types():
    cfg = parse_config("# run\n[grid]\nvertices = 65  # per side\n[solver]\nsubsonic_guard = false\n")
    assert cfg.get("grid", "vertices") == 65
    assert cfg.get("solver", "subsonic_guard") is False


@pytest.mark.parametrize("text,lineno", [
    ("[grid]\nvertices = 65\nbogus = 1\n", 3),
    ("[nosuch]\n", 1),
    ("vertices = 3\n", 1),
    ("[grid]\nvertices = many\n", 2),
    ("[problem]\ndirichlet = __import__('os')\n", 2),
    ("[grid]\nvertices = 3\nvertices = 4\n", 3),
])
def test_config_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.lineno == lineno


def test_expression_evaluation():
    X, Y = np.meshgrid([0.5, 1.0], [0.0, 0.25])
    np.testing.assert_allclose(evaluate("sin(x) * y + r", X, Y), np.sin(X) * Y + np.hypot(X, Y))
    np.testing.assert_allclose(evaluate("2", X, Y), 2.0)


def test_csv_format_and_roundtrip(tmp_path):
    grid = Grid2.from_bounds(0.0, 1.0, 0.0, 2.0, 2, 3)
    vals = np.arange(12, dtype=float).reshape(grid.shape) / 7.0
    text = format_grid_csv(grid, vals)
    assert text.startswith("x,y,value\n0,0,0\n") and text.endswith("\n") and "\r" not in text
    assert not text.endswith("\n\n")
    path = tmp_path / "f.csv"
    write_grid_csv(path, grid, vals)
    xs, ys, back = read_grid_csv(path)
    assert np.array_equal(back, vals)


def run(args, capsys=None):
    code = main(args)
    if capsys is not None:
        capsys.readouterr()
    return code


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_solve_outputs_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path, "s.cfg", "[problem]\nfixture = scherk\n[grid]\nvertices = 17\n")
    for k in range(2):
        assert run(["solve", "--config", cfg, "--out", str(tmp_path / f"o{k}")], capsys) == 0
    for name in ("u.csv", "Q.csv", "residual.csv"):
        assert (tmp_path / "o0" / name).read_bytes() == (tmp_path / "o1" / name).read_bytes()
    report = parse_report((tmp_path / "o0" / "report.txt").read_text())
    assert report["converged"] == "true"


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, "bad.cfg", "[grid]\nvertices = oops\n")
    assert run(["solve", "--config", bad, "--out", str(tmp_path / "b")], capsys) == 2
    sonic = write(tmp_path, "sonic.cfg",
                  "[problem]\ndirichlet = 0.9 * x\n[density]\nfamily = chaplygin\ngamma = 2\n"
                  "[grid]\nvertices = 9\n")
    assert run(["solve", "--config", sonic, "--out", str(tmp_path / "d")], capsys) == 4
    slow = write(tmp_path, "slow.cfg",
                 "[problem]\nfixture = scherk\n[grid]\nvertices = 17\n"
                 "[solver]\nmax_iterations = 1\ntolerance = 1e-14\n")
    assert run(["solve", "--config", slow, "--out", str(tmp_path / "n")], capsys) == 3
    assert run(["solve", "--config", str(tmp_path / "missing.cfg"),
                "--out", str(tmp_path / "m")], capsys) == 2


def test_density_report_command(tmp_path, capsys):
    cfg = write(tmp_path, "d.cfg", "[density]\nfamily = chaplygin\ngamma = 2\n")
    assert run(["density-report", "--config", cfg, "--out", str(tmp_path)], capsys) == 0
    report = parse_report((tmp_path / "density_report.txt").read_text())
    assert float(report["sonic_Q"]) == pytest.approx(2.0 / 3.0, abs=1e-10)


def test_analysis_commands(tmp_path, capsys):
    cfg = write(tmp_path, "a.cfg", "[problem]\nfixture = scherk\n[grid]\nvertices = 17\n")
    assert run(["backlund", "--config", cfg, "--out", str(tmp_path / "b")], capsys) == 0
    assert (tmp_path / "b" / "xi_x.csv").exists()
    assert run(["mean-value", "--config", cfg, "--out", str(tmp_path / "m")], capsys) == 0
    eik = write(tmp_path, "e.cfg", "[eikonal]\nu = x\nnu = 1\nvertices = 17\n")
    assert run(["eikonal", "--config", eik, "--out", str(tmp_path / "e")], capsys) == 0
    assert (tmp_path / "e" / "v.csv").exists()
    probe = write(tmp_path, "p.cfg", "[problem]\nfixture = punctured_harmonic\n"
                                     "[analysis]\nresolutions = 17, 33\n")
    assert run(["singularity-probe", "--config", probe, "--out", str(tmp_path / "p")], capsys) == 0
