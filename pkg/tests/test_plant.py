import math

import numpy as np
import pytest

from fsmca.freq_split import build_references, scale_reference
from fsmca.mca import McaConfig, MotionCueing
from fsmca.model import ControlInput, PlatformState, step_array, step_dynamics
from fsmca.plant import (LOG_COLUMNS, IdealPlant, SurrogatePlant, TrajectoryLog, make_plant, plant_step,
                         run_closed_loop)
from fsmca.scenarios import Scenario, make_step

DT = 0.01


def test_ideal_is_the_model():
    rng = np.random.default_rng(1)
    x = PlatformState.from_array(rng.normal(size=(2, 6)))
    u = ControlInput.from_array(rng.normal(size=(2, 2)))
    got = plant_step(IdealPlant(), x, u, DT).as_array()
    np.testing.assert_array_equal(got, step_dynamics(x, u, DT).as_array())


def test_surrogate_unit_dc_gain():
    plant = SurrogatePlant(rate_limit_omega=math.inf)
    x = np.zeros((2, 6))
    u = np.array([[0.3, 0.0], [-0.2, 0.0]])
    for _ in range(300):  # 3 s, many times 1/omega_n
        x = plant.step(x, u, DT)
    np.testing.assert_allclose(plant.achieved_jerk[:, 0], u[:, 0], rtol=0.01)


def test_surrogate_lag_matches_fine_simulation():
    # second-order lag against a fine explicit integration of the same ODE
    wn, zeta = 20.0, 0.9
    plant = SurrogatePlant(omega_n=wn, zeta=zeta, rate_limit_omega=math.inf)
    x = plant.step(np.zeros((2, 6)), np.array([[1.0, 0.0], [0.0, 0.0]]), DT)
    y = yd = p = v = a = 0.0
    h = DT / 20000
    for _ in range(20000):
        ydd = wn * wn * (1.0 - y) - 2 * zeta * wn * yd
        p += h * v
        v += h * a
        a += h * y
        y += h * yd
        yd += h * ydd
    assert plant.achieved_jerk[0, 0] == pytest.approx(y, rel=1e-3)
    assert x[0, 2] == pytest.approx(a, rel=1e-3)


def test_surrogate_rate_saturation():
    plant = SurrogatePlant()
    x = np.zeros((2, 6))
    x[0, 4] = math.radians(2.9)
    u = np.zeros((2, 2))
    u[0, 1] = 50.0
    for _ in range(100):
        x = plant.step(x, u, DT)
    assert abs(math.degrees(x[0, 4])) == pytest.approx(3.15, abs=1e-9)
    assert x[0, 5] == 0.0  # a clipped rate is not being pushed further


def test_plant_parameter_checks():
    with pytest.raises(ValueError):
        SurrogatePlant(omega_n=0.0)
    with pytest.raises(ValueError):
        SurrogatePlant(zeta=2.5)
    with pytest.raises(ValueError):
        make_plant("hexapod")
    assert isinstance(make_plant("surrogate", omega_n=50.0), SurrogatePlant)


def _zero_scenario(duration=0.5):
    n = int(round(duration / DT)) + 1
    return Scenario("zero", DT, np.zeros(n), np.zeros(n))


def test_zero_scenario_gives_zero_log():
    log = run_closed_loop(McaConfig(horizon=10), "ideal", _zero_scenario(), 1.0)
    assert len(log) == 50
    assert log.error is None
    for arr in (log.states, log.outputs, log.commands, log.delta):
        assert not np.any(arr)


def test_ideal_plant_follows_internal_prediction():
    cfg = McaConfig(horizon=20)
    sc = make_step().truncated(4.0)
    refs = build_references(scale_reference(sc.accel(), 1.0), cfg.split_config(1.0))
    ctrl = MotionCueing(cfg)
    x = np.zeros((2, 6))
    for i in range(300):
        _, sol = ctrl.tick(x, refs.lookahead(i + 1, cfg.horizon))
        x = IdealPlant().step(x, sol.first_input, DT)
        np.testing.assert_allclose(x, sol.states[0], atol=1e-9)


def test_log_alignment_and_csv_round_trip(tmp_path):
    cfg = McaConfig(horizon=15)
    sc = make_step().truncated(3.0)
    log = run_closed_loop(cfg, "ideal", sc, 1.0)
    assert len(log) == len(sc.ax) - 1
    np.testing.assert_allclose(log.t, sc.t[1:])
    np.testing.assert_allclose(log.f_ref, sc.accel()[1:])
    np.testing.assert_allclose(log.lf_ref + log.hf_ref, log.f_ref, atol=1e-15)
    path = tmp_path / "traj.csv"
    log.to_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(LOG_COLUMNS)
    back = TrajectoryLog.read_csv(path)
    np.testing.assert_array_equal(back["f"], log.f)
    np.testing.assert_array_equal(back["s"], log.states[:, :, 0])
    np.testing.assert_array_equal(back["iters"], log.iters)
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        TrajectoryLog.read_csv(tmp_path / "junk.csv")


def test_dt_mismatch_rejected():
    with pytest.raises(ValueError):
        run_closed_loop(McaConfig(dt=0.02), "ideal", _zero_scenario(), 1.0)


def test_solver_failure_keeps_partial_log(monkeypatch):
    calls = {"n": 0}
    real = MotionCueing.tick

    def flaky(self, x, look):
        calls["n"] += 1
        if calls["n"] == 5:
            raise RuntimeError("boom")
        return real(self, x, look)

    monkeypatch.setattr(MotionCueing, "tick", flaky)
    log = run_closed_loop(McaConfig(horizon=5), "ideal", _zero_scenario(), 1.0)
    assert len(log) == 4
    assert "boom" in log.error


def test_surrogate_closed_loop_runs_short():
    log = run_closed_loop(McaConfig(horizon=20), SurrogatePlant(), make_step().truncated(1.0), 1.0)
    assert log.error is None
    assert np.all(np.isfinite(log.delta))
    assert log.meta["plant"] == "surrogate"


def test_step_array_is_the_ideal_plant():
    x = np.ones((2, 6))
    u = np.full((2, 2), 0.5)
    np.testing.assert_array_equal(IdealPlant().step(x, u, DT), step_array(x, u, DT))


class _RunawayPlant(IdealPlant):
    name = "runaway"

    def step(self, x, u, dt):
        x = super().step(x, u, dt)
        self.calls = getattr(self, "calls", 0) + 1
        if self.calls == 3:
            x[1, 0] = 6.0
        return x


def test_run_stops_when_plant_diverges():
    log = run_closed_loop(McaConfig(horizon=5), _RunawayPlant(), _zero_scenario(), 1.0)
    assert len(log) == 3
    assert "diverged" in log.error
    assert log.states[-1, 1, 0] == 6.0
