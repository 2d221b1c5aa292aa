import io

import numpy as np
import pytest

from busselab.integrator import (
    STOP,
    ImplicitOperator,
    SimulationBlowupError,
    StepSchedule,
    read_snapshots,
    simulate,
    step,
    write_snapshot,
)
from busselab.model import FieldState, Grid1D, default_params, homogeneous_states
from busselab.noise import NoiseConfig


def homogeneous_state(grid, point, t=0.0):
    return FieldState(u=np.full(grid.N, point[0]), v=np.full(grid.N, point[1]), t=t)


class TestImplicitOperator:
    def test_multipliers_in_unit_interval(self):
        g = Grid1D(L=250.0, N=256)
        for dt in (1e-4, 0.05, 10.0):
            op = ImplicitOperator(grid=g, d=500.0, m=0.45, dt=dt)
            for mult in (op.mult_u, op.mult_v):
                assert np.all(mult > 0) and np.all(mult <= 1.0)

    def test_linear_mode_decay(self):
        # One implicit solve must scale mode j by exactly
        # 1/(1 + dt*r - dt*c*mu_j): diffusion plus the linear decay term.
        g = Grid1D(L=250.0, N=256)
        dt, d, m = 0.05, 500.0, 0.45
        op = ImplicitOperator(grid=g, d=d, m=m, dt=dt)
        x = g.x()
        for j, comp in [(3, "u"), (17, "v"), (0, "u")]:
            mode = np.cos(2 * np.pi * j * (x + g.L) / (2 * g.L))
            solved = op.solve_u(mode) if comp == "u" else op.solve_v(mode)
            c, r = (d, 1.0) if comp == "u" else (1.0, m)
            mu = (2 * np.cos(2 * np.pi * j / g.N) - 2) / g.h**2
            assert np.allclose(solved, mode / (1 + dt * r - dt * c * mu), atol=1e-13)


class TestStep:
    def test_bare_soil_fixed_point(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.3)
        op = ImplicitOperator(grid=g, d=p.d, m=p.m, dt=0.05)
        state = homogeneous_state(g, homogeneous_states(p).bare)
        out = step(state, p, None, op, 0.05)
        assert np.abs(out.u - p.a).max() < 1e-13
        assert np.abs(out.v).max() < 1e-13

    def test_vegetated_fixed_point(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.0)
        op = ImplicitOperator(grid=g, d=p.d, m=p.m, dt=0.05)
        lower = homogeneous_states(p).lower
        out = step(homogeneous_state(g, lower), p, None, op, 0.05)
        assert np.abs(out.u - lower[0]).max() < 1e-12
        assert np.abs(out.v - lower[1]).max() < 1e-12

    def test_dt_mismatch_rejected(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.0)
        op = ImplicitOperator(grid=g, d=p.d, m=p.m, dt=0.05)
        with pytest.raises(ValueError):
            step(homogeneous_state(g, (1.0, 1.0)), p, None, op, 0.01)

    def test_blowup_carries_time_and_index(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(2.0)
        op = ImplicitOperator(grid=g, d=p.d, m=p.m, dt=50.0)
        huge = FieldState(u=np.full(g.N, 1e160), v=np.full(g.N, 1e160), t=7.0)
        with pytest.raises(SimulationBlowupError) as err:
            step(huge, p, None, op, 50.0)
        assert err.value.t == pytest.approx(57.0)
        assert 0 <= err.value.index < g.N


class TestSimulate:
    def test_zero_horizon_returns_init(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.0)
        init = homogeneous_state(g, (1.0, 2.0))
        res = simulate(init, p, NoiseConfig(seed=0), StepSchedule(dt=0.05, t_end=0.0, observe_stride=4.0),
                       observers=[lambda t, s: t], grid=g)
        assert res.final is init
        assert res.observations == [[]]

    def test_observation_times(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.0)
        init = homogeneous_state(g, homogeneous_states(p).bare)
        res = simulate(init, p, NoiseConfig(seed=0), StepSchedule(dt=0.05, t_end=12.0, observe_stride=4.0),
                       observers=[lambda t, s: True], grid=g)
        times = [t for t, _ in res.observations[0]]
        assert times == pytest.approx([0.0, 4.0, 8.0, 12.0])

    def test_seed_determinism_with_noise(self):
        g = Grid1D(L=250.0, N=512)
        p = default_params(1.5, sigma=0.2)
        init = homogeneous_state(g, homogeneous_states(p).lower)

        def run():
            res = simulate(init, p, NoiseConfig(xi=0.1, seed=314), StepSchedule(dt=0.05, t_end=5.0, observe_stride=1.0),
                           observers=[lambda t, s: s.v.copy()], grid=g)
            return res.observations[0]

        first, second = run(), run()
        for (t1, v1), (t2, v2) in zip(first, second):
            assert t1 == t2 and np.array_equal(v1, v2)

    def test_zero_biomass_subspace_invariant(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.5, sigma=0.5)
        init = FieldState(u=np.full(g.N, 0.7), v=np.zeros(g.N), t=0.0)
        res = simulate(init, p, NoiseConfig(xi=0.1, seed=3), StepSchedule(dt=0.05, t_end=10.0, observe_stride=10.0), grid=g)
        assert np.all(res.final.v == 0.0)

    def test_observer_stop_sentinel(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.0)
        init = homogeneous_state(g, homogeneous_states(p).bare)

        def stopper(t, state):
            return STOP if t >= 8.0 else t

        res = simulate(init, p, NoiseConfig(seed=0), StepSchedule(dt=0.05, t_end=100.0, observe_stride=4.0),
                       observers=[stopper], grid=g)
        assert res.stopped_early
        assert res.final.t == pytest.approx(8.0)
        assert [t for t, _ in res.observations[0]] == pytest.approx([0.0, 4.0])

    def test_deterministic_order_one_convergence(self):
        g = Grid1D(L=250.0, N=256)
        p = default_params(1.5)
        x = g.x()
        u0 = 0.5 + 0.1 * np.cos(2 * np.pi * 3 * (x + g.L) / (2 * g.L))
        v0 = 3.0 + 0.5 * np.cos(2 * np.pi * 5 * (x + g.L) / (2 * g.L))

        def final_v(dt):
            init = FieldState(u=u0, v=v0, t=0.0)
            sched = StepSchedule(dt=dt, t_end=10.0, observe_stride=10.0)
            return simulate(init, p, NoiseConfig(seed=0), sched, grid=g).final.v

        ref = final_v(0.05 / 16)
        e1 = np.abs(final_v(0.05) - ref).max()
        e2 = np.abs(final_v(0.025) - ref).max()
        rate = np.log2(e1 / e2)
        assert 0.8 <= rate <= 1.2


class TestStepSchedule:
    def test_stride_must_be_multiple_of_dt(self):
        with pytest.raises(ValueError):
            StepSchedule(dt=0.05, t_end=10.0, observe_stride=0.13)

    def test_valid_stride(self):
        sched = StepSchedule(dt=0.05, t_end=10.0, observe_stride=4.0)
        assert sched.stride_steps == 80


class TestSnapshots:
    def test_round_trip(self):
        u = np.linspace(0, 1, 32)
        v = np.linspace(1, 2, 32)
        buf = io.BytesIO()
        write_snapshot(buf, 3.5, u, v)
        write_snapshot(buf, 7.5, v, u)
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".bin", delete=False) as fh:
            fh.write(buf.getvalue())
            path = fh.name
        records = read_snapshots(path)
        assert len(records) == 2
        assert records[0][0] == 3.5
        assert np.array_equal(records[0][1], u) and np.array_equal(records[0][2], v)
        assert records[1][0] == 7.5 and np.array_equal(records[1][1], v)

    def test_byte_layout(self):
        # header: magic "BBL1", u64 N little-endian, f64 t little-endian
        buf = io.BytesIO()
        write_snapshot(buf, 1.0, np.array([2.0]), np.array([4.0]))
        raw = buf.getvalue()
        assert raw[:4] == b"BBL1"
        assert raw[4:12] == (1).to_bytes(8, "little")
        assert np.frombuffer(raw[12:20], dtype="<f8")[0] == 1.0
        assert np.frombuffer(raw[20:36], dtype="<f8").tolist() == [2.0, 4.0]

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(ValueError, match="magic"):
            read_snapshots(str(path))
