"""Smoke test for the cwta_py extension module.

Build and install first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import cwta_py


def main():
    model = cwta_py.TransitionModel.profile("moderate")
    assert len(model.improve_prob) == 5
    assert model.horizon_months == 60

    trial = cwta_py.simulate_trial(model, 100, 0.7, seed=11)
    assert len(trial) == 100
    states = trial.states()
    assert all(s[0] == 2 for s in states)
    assert all(abs(a - b) <= 1 for s in states for a, b in zip(s, s[1:]))
    assert trial.arms().count("control") == 50

    # Same seed, same trial.
    again = cwta_py.simulate_trial(model, 100, 0.7, seed=11)
    assert again.states() == states

    result = trial.analyze()
    for method in ("CWTA", "PFS", "OS"):
        z, p = result[method]
        assert 0.0 <= p <= 1.0
    assert result["pfs_control"][0][1] <= 1.0
    assert set(trial.p_values()) == {"CWTA", "PFS", "OS"}

    steps = cwta_py.kaplan_meier([1, 2, 2, 3], [True, True, False, True])
    assert abs(steps[0][1] - 0.75) < 1e-12

    z, p = cwta_py.logrank(
        [1, 2, 3, 4, 5, 6],
        [True] * 6,
        ["control"] * 3 + ["experimental"] * 3,
    )
    assert z > 0 and 0 < p < 1

    ss = cwta_py.interpolate_sample_size([(20, 0.3), (40, 0.6), (60, 0.9)], 0.8)
    assert 40 < ss < 60

    power = cwta_py.power(model, 0.5, 60, 20, master_seed=3, workers=2)
    assert set(power) == {"CWTA", "PFS", "OS"}

    fitted, (cr, pr) = cwta_py.calibrate(0.05, 0.30, tolerance=0.02, rounds=4)
    assert abs(cr - 0.05) <= 0.02 and abs(pr - 0.30) <= 0.02
    assert cwta_py.TransitionModel.from_json(fitted.to_json()).improve_prob == fitted.improve_prob

    try:
        cwta_py.simulate_trial(model, 101, 0.7, seed=1)
    except ValueError:
        pass
    else:
        raise AssertionError("odd sample size accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
