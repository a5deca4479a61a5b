"""Smoke test for the Python extension. Build it first, e.g.

    pip install maturin
    maturin develop -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import csv
import io

import mlapportion as ml


def main():
    # Two groups of 1/2, each with two leaves of 1/2.
    inst = ml.Instance.from_parents([None, 5, 5, 6, 6, 0, 0], ["1"] + ["1/2"] * 6)
    assert len(inst) == 7 and inst.height == 2
    assert inst.relative_entitlement(1) == "1/4"
    assert inst.strict_quota(5, 6) == "3"

    assert ml.allocate(inst, "adams", 6) == [6, 2, 1, 2, 1, 3, 3]
    traj = ml.trajectory(inst, "jefferson", 6)
    assert len(traj) == 7 and traj[0] == [0] * 7
    assert all(a <= b for prev, cur in zip(traj, traj[1:]) for a, b in zip(prev, cur))

    report = ml.check(inst, [6, 2, 2, 1, 1, 4, 2])
    assert report.upper_violators == [5] and report.lower_violators == [6]
    assert report.upper[5] == 3 and report.lower[6] == 3
    assert not report.compliant

    both = ml.allocate_both_quotas(inst, 6)
    assert both[5] == 3 and both[6] == 3
    assert ml.check(inst, both).compliant
    assert both in ml.oracle(inst, 6)

    # A lopsided two-level tree where the quota method overshoots.
    lop = ml.Instance.from_parents([None, 0, 0, 1, 1], ["1", "8/9", "1/9", "8/9", "1/9"])
    seats = ml.allocate(lop, "quota", 5)
    assert seats == [5, 5, 0, 5, 0]
    assert ml.check(lop, seats).upper_violators == [3]

    reduced, forward = ml.reduce(ml.Instance.from_parents([None, 0, 0, 0], ["1", "1/2", "1/4", "1/4"]))
    assert len(reduced) == 5 and len(forward) == 4

    gen = ml.generate("binary", 3, seed=7)
    assert len(gen) == 15
    assert ml.generate("binary", 3, seed=7).to_json() == gen.to_json()
    assert len(ml.Instance.from_json(gen.to_json())) == 15

    table = ml.run_experiment("4ary", 3, instances=10, seed=1, houses=[20], methods=["adams", "ucquota"])
    rows = list(csv.DictReader(io.StringIO(table)))
    assert [r["method"] for r in rows] == ["adams", "ucquota"]
    assert rows[1]["uq_violation_rate_pct"] == "0.0000"

    try:
        ml.Instance.from_parents([None, 0, 0], ["1", "1/2", "1/3"])
    except ValueError as e:
        assert "5/6" in str(e)
    else:
        raise AssertionError("unnormalized weights accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
