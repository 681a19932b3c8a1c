import math

import pytest
from hypothesis import given, settings, strategies as st

from solsurf.config import ConfigError, RunConfig, build_config, canonical_fields, load, parse_text, parse_value

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_defaults():
    cfg = load("")
    assert cfg == RunConfig()
    assert "lam" in canonical_fields()


def test_comments_aliases_and_ranges():
    cfg = load("""
# a comment
model = weierstrass   # trailing comment
g3 = 1
lambda = -2
family = q1
x = 0.2:3:57
y = -0.5:0.5
""")
    assert cfg.model == "wp" and cfg.lam == -2.0 and cfg.family == "Ux"
    assert cfg.x == (0.2, 3.0, 57) and cfg.y == (-0.5, 0.5, None)
    xs, ys = cfg.grid()
    assert len(xs) == 57 and len(ys) == cfg.ny


def test_last_assignment_wins():
    cfg = load("k = 0.2\nk = 0.8\n", overrides=[("k", 0.3)])
    assert cfg.k == 0.3
    assert load("k = 0.2\nk = 0.8\n").k == 0.8


def test_preset_then_explicit_override():
    cfg = build_config([("lambda", 2.0), ("preset", "fig2")])
    assert cfg.preset == "fig2" and cfg.k == 0.2
    assert cfg.x == (-20.0, 20.0, None) and (cfg.nx, cfg.ny) == (161, 41)
    assert cfg.lam == 2.0


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        build_config([("preset", "fig9")])


@pytest.mark.parametrize("text,line,col,msg", [
    ("model = sn\nbogus = 1\n", 2, 1, "unknown key"),
    ("model = sn\n  k 0.5\n", 2, 3, "expected key = value"),
    ("k = abc\n", 1, 5, "bad value"),
    ("x = 3:1\n", 1, 5, "lo < hi"),
    ("k =\n", 1, 4, "missing value"),
    ("model = tan\n", 1, 9, "model must be one of"),
    ("= 3\n", 1, 1, "missing key"),
])
def test_errors_carry_line_and_column(text, line, col, msg):
    with pytest.raises(ConfigError, match=msg) as info:
        parse_text(text, source="run.cfg")
    assert (info.value.line, info.value.column) == (line, col)
    assert str(info.value).startswith(f"run.cfg:{line}:{col}: ")


def test_gauge_values():
    assert parse_value("gauge", "e3") == "e3"
    assert parse_value("gauge", "1, 0, 2.5") == "1.0,0.0,2.5"
    with pytest.raises(ConfigError):
        parse_value("gauge", "e4")


def test_nonfinite_rejected():
    with pytest.raises(ConfigError):
        parse_value("k", "nan")


@settings(max_examples=80, deadline=None)
@given(model=st.sampled_from(["sn", "cn", "dn", "wp"]), k=st.floats(0, 1), lam=finite,
       fam=st.sampled_from(["ST", "Ux", "gauge", "combo"]), lo=finite, width=st.floats(0.01, 40),
       n=st.one_of(st.none(), st.integers(2, 500)), metric=st.sampled_from(["Killing", "Euclidean"]),
       fmt=st.sampled_from(["csv", "obj", "ply"]))
def test_canonical_round_trip(model, k, lam, fam, lo, width, n, metric, fmt):
    hi = lo + width
    if not lo < hi:
        return
    cfg = RunConfig(model=model, k=k, lam=lam, family=fam, x=(lo, hi, n), metric=metric, format=fmt,
                    gauge="e2", output="out.csv")
    text = cfg.canonical()
    assert load(text) == cfg
    assert load(text).canonical() == text
