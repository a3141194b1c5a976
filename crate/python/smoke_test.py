"""Smoke test for the platoon Python module.

Build and install first:  pip install --no-build-isolation crates/python
"""

import math
import tempfile
from pathlib import Path

import platoon

GAINS = platoon.Gains(0.01, 0.1, 0.1, 0.4, 0.1, 2.0)


def check_geometry():
    circle = platoon.Path.circle(5.0)
    assert circle.closed and abs(circle.length - 2 * math.pi * 5.0) < 1e-9
    x, y, heading, curvature, _ = circle.point_at(0.0)
    assert abs(curvature - 0.2) < 1e-12
    s, y_tilde = circle.project(6.0, 0.0)
    assert abs(y_tilde + 1.0) < 1e-9

    road = platoon.Path.straight(100.0)
    s, y_tilde, theta_tilde, v_r = platoon.to_frenet(road, 10.0, 2.0, 0.1, 5.0)
    assert abs(s - 10.0) < 1e-9 and abs(y_tilde - 2.0) < 1e-9
    assert abs(v_r - 5.0 * math.cos(0.1)) < 1e-9


def check_control():
    left, right = platoon.lateral_safety(1.0, 5.0, 5.0, 1.2)
    assert abs(left - 2.8) < 1e-12 and abs(right - 4.8) < 1e-12
    nominal, barrier = platoon.lateral_control(GAINS, 1.0, 0.2, 10.0, 0.0, left, right)
    assert barrier < 0.0
    _, barrier = platoon.lateral_control(GAINS, 1.0, 0.2, 10.0, 0.0, left, right, mode="baseline")
    assert barrier == 0.0
    _, barrier = platoon.longitudinal_control(GAINS, -1.0, -2.0, 3.0)
    assert abs(barrier - 2.0 * -2.0 / 3.0) < 1e-12
    assert platoon.lyapunov_lateral(0.0, 0.0, 0.01) == 0.0
    min_d, t_end, _ = platoon.barrier_ode(2.0, 1.0, -3.0, 20.0)
    assert min_d > 0.0 and abs(t_end - 20.0) < 1e-9


def check_run():
    scenario = platoon.Scenario.load("scenario_A")
    scenario.duration = 10.0
    run = scenario.run()
    cols = run.columns()
    assert list(cols) == platoon.CSV_COLUMNS
    assert len(cols["t"]) == scenario.n_vehicles * 101
    assert not run.breaches()
    assert run.csv().splitlines()[0] == ",".join(platoon.CSV_COLUMNS)
    with tempfile.TemporaryDirectory() as tmp:
        written = run.write(tmp)
        assert (Path(tmp) / "scenario_A_safe.csv").exists(), written

    scenario.mode = "baseline"
    scenario.duration = 60.0
    assert scenario.run().has_breach(4, "d_rho")

    round_trip = platoon.Scenario.parse(scenario.to_toml())
    assert round_trip.mode == "baseline" and round_trip.hold == "continuous"


def check_errors():
    try:
        platoon.Scenario.parse("name = 3")
    except platoon.ScenarioError as e:
        assert isinstance(e, ValueError)
    else:
        raise AssertionError("expected ScenarioError")

    scenario = platoon.Scenario.load("scenario_B")
    scenario.gains = platoon.Gains(0.01, 0.1, 0.0, 0.4, 0.1, 2.0)
    try:
        scenario.run()
    except platoon.SimulationAborted as e:
        message, t, vehicle, partial = e.args
        assert "d_eta" in message and len(partial) > 0
    else:
        raise AssertionError("expected SimulationAborted")


if __name__ == "__main__":
    check_geometry()
    check_control()
    check_run()
    check_errors()
    print("smoke test passed")
