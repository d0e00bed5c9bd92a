import math

import pytest
from hypothesis import given, settings, strategies as st

from ricci_bvp.config import ConfigError, parse, serialize, snapshot_schedule

BASE = """
[run]
T = 0.1
[geometry]
chart = slab
n = 2
N0 = 9
Nt = 4
[initial]
family = warped
profile = exp
amplitude = 0.5
"""


def test_defaults_and_access():
    cfg = parse(BASE)
    assert cfg.kind == "flow" and cfg["run"]["safety"] == 0.5
    assert cfg["run"]["rm_stop"] == math.inf
    assert cfg.boundary("lower")["eta"] == "induced"


def test_side_overrides():
    cfg = parse(BASE + "[boundary]\neta = compatible\n[boundary.upper]\neta = constant\n")
    assert cfg.boundary("lower")["eta"] == "compatible"
    assert cfg.boundary("upper")["eta"] == "constant"


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 10.0), st.floats(0.01, 1.0), st.integers(4, 200), st.integers(0, 50),
       st.sampled_from(["flat", "warped", "random"]), st.integers(0, 2**31))
def test_serialize_is_canonical_and_idempotent(T, safety, N0, every, family, seed):
    text = (f"[run]\nT = {T!r}\nsafety={safety!r}\nsnapshot_every = {every}\nrng_seed={seed}\n"
            f"[geometry]\nn=2\nN0 = {N0}\nNt=3\n[initial]\nfamily = {family}\n")
    once = serialize(parse(text))
    assert serialize(parse(once)) == once
    assert parse(once).digest() == parse(text).digest()


@pytest.mark.parametrize("text, needle", [
    (BASE.replace("T = 0.1", "T = -1"), "T must be positive"),
    (BASE.replace("N0 = 9", "N0 = 2"), "N0"),
    (BASE + "[bogus]\nx = 1\n", "unknown section"),
    (BASE.replace("profile = exp", "profile = sinh"), "profile"),
    (BASE.replace("family = warped", "family = hemisphere"), "not available"),
    (BASE.replace("chart = slab", "chart = radial"), "slab or ball"),
    (BASE + "[boundary]\ngamma = scaled\ngamma_rate = -20\n", "stay positive"),
    (BASE.replace("n = 2", "n = two"), "cannot parse"),
    ("[run]\nT=1\n", "missing required key"),
    ("not an ini file", "syntax"),
])
def test_violations_are_reported(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse(text)
    assert any(needle in p for p in exc.value.problems)


def test_all_violations_listed():
    bad = BASE.replace("T = 0.1", "T = 0").replace("N0 = 9", "N0 = 1")
    with pytest.raises(ConfigError) as exc:
        parse(bad)
    assert len(exc.value.problems) >= 2


def test_snapshot_schedule():
    cfg = parse(BASE.replace("T = 0.1", "T = 0.1\nsnapshot_levels = 2\nsnapshot_times = 0.03"))
    assert snapshot_schedule(cfg) == pytest.approx((0.025, 0.03, 0.05, 0.1))
    assert cfg.with_resolution(17, 8)["geometry"]["N0"] == 17
    assert cfg["geometry"]["N0"] == 9
