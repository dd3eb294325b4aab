"""Smoke test for the ustat_cs_py extension module.

Build and install first, e.g.
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/ustat_cs-*.whl
then run `python python/smoke_test.py`.
"""

import json
import math
import tempfile
from pathlib import Path

import ustat_cs_py as us


def check_state():
    st = us.UStatState("gmd")
    st.extend([1.0, 2.0, 4.0])
    # |1-2|, |1-4|, |2-4| averaged.
    assert len(st) == 3 and abs(st.ustat() - 2.0) < 1e-15
    q = [r / 2 for r in st.row_sums()]
    sigma2 = sum(x * x for x in q) / 3 - st.ustat() ** 2
    assert abs(st.jackknife_sigma2() - sigma2) < 1e-14

    pairs = us.UStatState("mmd-gauss", gram_cache=True)
    pairs.push((0.1, -0.2))
    try:
        pairs.push(0.3)
    except ValueError:
        pass
    else:
        raise AssertionError("scalar accepted by a paired kernel")


def check_boundaries():
    a = us.g_inv(0.05)
    assert abs(a - 2.7954834829) < 1e-9
    assert abs(us.gamma(400, "gm", 0.05, 400) - a / 20.0) < 1e-14
    assert us.gamma(4000, "lil", 0.05, 400) < us.gamma(400, "lil", 0.05, 400)
    try:
        us.gamma(10, "gm", 0.05, 400)
    except ValueError:
        pass
    else:
        raise AssertionError("n < m accepted")


def check_sequences():
    st = us.UStatState("gmd")
    records = []
    for i in range(300):
        st.push(math.sin(1.3 * i))
        rec = us.nondegenerate_cs(st, "gm", 0.05, 50)
        if i + 1 < 50:
            assert rec is None
        else:
            records.append(rec)
    assert records[0].n == 50 and records[-1].n == 300
    assert records[-1].half_width() < records[0].half_width()
    assert us.sequential_test(records, records[-1].center) == (False, None)
    assert us.sequential_test(records, -10.0) == (True, 50)
    ci = us.classical_ci(st, 0.05)
    assert ci.half_width() < records[-1].half_width()


def check_spectrum():
    single = us.SpectrumEstimate.from_eigenvalues([1.0], 1.0, "data", 0.05)
    a = us.g_inv(0.05)
    want = (math.log(4.0) + a * a - 1.0) / 400
    assert abs(us.sage_upper(400, single, "gm", 0.05, 100) - want) < 1e-14

    st = us.UStatState("mmd-gauss", gram_cache=True)
    st.extend([(math.sin(i), math.cos(0.7 * i)) for i in range(120)])
    est = us.estimate_spectrum(st, "poly:2")
    assert len(est.eigenvalues) == int(120 ** 0.25)
    rec = us.degenerate_cs(st, est, "lil", 0.05, 100)
    assert rec.hi == math.inf and rec.lo < rec.center


def check_experiment():
    cfg = {
        "experiment": "coverage",
        "kernel": "gmd",
        "dist": {"family": {"type": "gaussian", "mean": 0.0, "var": 1.0}},
        "m": 20,
        "n_max": 80,
        "reps": 2,
        "seed": 5,
    }
    with tempfile.TemporaryDirectory() as d:
        res = json.loads(us.run_experiment(json.dumps(cfg), d))
        assert len(res["coverage"]) == 3
        assert (Path(d) / "coverage.csv").exists()
    cfg["bogus"] = 1
    try:
        us.run_experiment(json.dumps(cfg))
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")


if __name__ == "__main__":
    check_state()
    check_boundaries()
    check_sequences()
    check_spectrum()
    check_experiment()
    print("python smoke test: ok")
