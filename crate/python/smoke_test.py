"""Smoke test for the ambulo_py extension.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import math
import random
import tempfile
from pathlib import Path

import ambulo_py as a


def check_rmssd():
    rng = random.Random(1)
    t, ibi = [], []
    now = 0
    for _ in range(2000):
        v = rng.uniform(600.0, 1100.0)
        now += round(v)
        t.append(now)
        ibi.append(v)
    s = a.rolling_rmssd(t, ibi)
    assert len(s) > 0
    # Direct check of the last window.
    end = s.t_ms[-1]
    inside = [v for ti, v in zip(t, ibi) if end - 300_000 < ti <= end]
    diffs = [(y - x) ** 2 for x, y in zip(inside, inside[1:])]
    want = math.sqrt(sum(diffs) / len(diffs))
    assert abs(s.rmssd_ms[-1] - want) <= 1e-9 * want, (s.rmssd_ms[-1], want)


def check_eda():
    k = a.bateman_irf(20.0, 4.0)
    area = sum((x + y) / 2 for x, y in zip(k, k[1:])) / 4.0
    assert abs(area - 1.0) < 1e-3

    rate = 4.0
    n = 2400
    sc = [2.0] * n
    for onset in (150.0, 400.0):
        for i in range(n):
            dt = i / rate - onset
            if dt > 0:
                sc[i] += 0.3 * (math.exp(-dt / 2.0) - math.exp(-dt / 0.7))
    d = a.decompose_eda([i * 250 for i in range(n)], sc, rate_hz=rate)
    peaks = [e.peak_ms / 1000 for e in d.events if e.significant]
    assert len(peaks) == 2, peaks
    assert len(d.tonic) == n


def check_misc():
    assert a.walkability_from_ranks(5, 5, 5, 5) == 5.0
    assert a.categorize("Cars typically don't stop at a crosswalk") == "crosswalk"
    words = a.word_frequencies(["The sidewalk is cracked", "sidewalk again"], 3)
    assert words[0] == ("sidewalk", 2), words


def check_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = a.synthesize(tmp, participants=["f02", "f07"])
        c = a.Config.load(str(cfg))
        c.validate()
        assert c.participants == ["f02", "f07"]
        out = Path(tmp) / "run"
        summary = a.run(str(cfg), out=str(out))
        ids = [p["participant_id"] for p in summary["participants"]]
        assert ids == ["f02", "f07"], ids
        assert (out / "report" / "summary.json").is_file()


if __name__ == "__main__":
    for f in (check_rmssd, check_eda, check_misc, check_pipeline):
        f()
        print(f"{f.__name__}: ok")
    print("smoke test passed")
