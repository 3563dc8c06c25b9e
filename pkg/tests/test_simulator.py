import numpy as np
import pytest

from app.exceptions import ContractException
from app.models.config import (
    ChangeKind,
    ChangeSpec,
    GaussianSegment,
    Observable,
    ObservationLayout,
    SpringConfig,
)
from app.services.correlation import raw_correlation
from app.services.simulator import (
    SpringSystem,
    equicorrelation,
    flip_correlation,
    gaussian_regimes,
    simulate_springs,
    spring_column_names,
)


class TestSpringSystem:

    def test_adjacency_is_symmetric_without_loops(self, rng):
        system = SpringSystem(SpringConfig(), rng)
        assert np.array_equal(system.adjacency, system.adjacency.T)
        assert not np.diag(system.adjacency).any()

    def test_connection_change_resamples(self, rng):
        system = SpringSystem(SpringConfig(), rng)
        for _ in range(20):
            before = system.adjacency.copy()
            system.apply_change(ChangeSpec(kind=ChangeKind.CONNECTION, at=1))
            assert not np.array_equal(before, system.adjacency)

    def test_positions_stay_in_box(self, rng):
        config = SpringConfig(box_half_width=1.0)
        system = SpringSystem(config, rng)
        for _ in range(300):
            system.step()
            assert np.all(np.abs(system.positions) <= config.box_half_width)
        system.apply_change(ChangeSpec(kind=ChangeKind.LOCATION, at=1, magnitude=5.0))
        assert np.all(np.abs(system.positions) <= config.box_half_width)

    def test_force_free_motion_is_straight(self, rng):
        config = SpringConfig(spring_constant=0.0, box_half_width=1e6)
        system = SpringSystem(config, rng)
        system.positions = rng.uniform(-1.0, 1.0, size=(config.n_particles, 2))
        start, velocity = system.positions.copy(), system.velocities.copy()
        for _ in range(10):
            system.step()
        assert np.allclose(system.positions, start + 10 * config.dt * velocity)

    def test_energy_drift_is_small(self):
        config = SpringConfig(box_half_width=1e6, noise_std=0.0, dt=0.01)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            system = SpringSystem(config, rng)
            # 盒子夠大、初始位置集中，不會碰到牆
            system.positions = rng.uniform(-1.0, 1.0, size=(config.n_particles, 2))
            initial = system.energy()
            for _ in range(100):
                system.step()
            assert abs(system.energy() - initial) <= 0.05 * initial

    def test_forces_are_graph_laplacian(self, rng):
        config = SpringConfig(spring_constant=2.0)
        system = SpringSystem(config, rng)
        system.positions = rng.uniform(-1.0, 1.0, size=(config.n_particles, 2))
        adjacency = system.adjacency.astype(np.float64)
        laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
        assert np.allclose(system.forces(), -2.0 * laplacian @ system.positions, atol=1e-12)

    def test_speed_change_moves_velocities_only(self, rng):
        system = SpringSystem(SpringConfig(), rng)
        positions, velocities = system.positions.copy(), system.velocities.copy()
        system.apply_change(ChangeSpec(kind=ChangeKind.SPEED, at=1, magnitude=1.0))
        assert np.array_equal(system.positions, positions)
        assert not np.allclose(system.velocities, velocities)


class TestRestStart:

    @pytest.mark.parametrize("seed", range(5))
    def test_components_share_state(self, seed):
        system = SpringSystem(SpringConfig.synthetic(), np.random.default_rng(seed))
        labels = system.components()
        for label in np.unique(labels):
            members = np.flatnonzero(labels == label)
            assert np.all(system.positions[members] == system.positions[members[0]])
            assert np.all(system.velocities[members] == system.velocities[members[0]])
        # 有彈簧相連的粒子一定在同一個分量
        i, j = np.nonzero(system.adjacency)
        assert np.array_equal(labels[i], labels[j])

    def test_springs_carry_no_force(self, rng):
        system = SpringSystem(SpringConfig.synthetic(), rng)
        assert np.all(system.forces() == 0.0)
        velocities = system.velocities.copy()
        for _ in range(50):
            system.step()
        assert np.array_equal(system.velocities, velocities)

    @pytest.mark.parametrize("seed", range(3))
    def test_motion_is_linear_before_change(self, seed):
        changes = [ChangeSpec(kind=ChangeKind.CONNECTION, at=50)]
        stream = simulate_springs(SpringConfig.synthetic(), 100, changes, seed=seed)
        values = stream.frame.values
        assert np.allclose(np.diff(values[:50], n=2, axis=0), 0.0, atol=1e-9)

    def test_preset_accepts_overrides(self):
        config = SpringConfig.synthetic(n_particles=3)
        assert config.n_particles == 3
        assert config.start_at_rest
        assert config.noise_std == 0.0


class TestSimulateSprings:

    def test_labels_and_shape(self):
        stream = simulate_springs(SpringConfig(), 100, [ChangeSpec(kind=ChangeKind.CONNECTION, at=50)], seed=3)
        assert stream.true_cps == (50,)
        assert stream.frame.values.shape == (100, 5)

    def test_deterministic(self):
        changes = [ChangeSpec(kind=ChangeKind.SPEED, at=40)]
        first = simulate_springs(SpringConfig(), 80, changes, seed=7)
        second = simulate_springs(SpringConfig(), 80, changes, seed=7)
        assert np.array_equal(first.frame.values, second.frame.values)

    def test_particle_layout(self):
        config = SpringConfig(
            layout=ObservationLayout.PARTICLE,
            observables=(Observable.X, Observable.Y, Observable.VX, Observable.VY),
        )
        stream = simulate_springs(config, 20, seed=1)
        assert stream.frame.dim == 20
        assert spring_column_names(config)[:4] == ("p0_x", "p0_y", "p0_vx", "p0_vy")

    def test_change_outside_range(self):
        with pytest.raises(ContractException):
            simulate_springs(SpringConfig(), 50, [ChangeSpec(kind=ChangeKind.SPEED, at=50)])

    def test_duplicate_change_times(self):
        changes = [ChangeSpec(kind=ChangeKind.SPEED, at=10), ChangeSpec(kind=ChangeKind.LOCATION, at=10)]
        with pytest.raises(ContractException):
            simulate_springs(SpringConfig(), 50, changes)

    def test_speed_change_shows_in_velocity_columns(self):
        config = SpringConfig(noise_std=0.0, observables=(Observable.X, Observable.VX))
        changed = simulate_springs(config, 60, [ChangeSpec(kind=ChangeKind.SPEED, at=30)], seed=4).frame.values
        baseline = simulate_springs(config, 60, seed=4).frame.values
        n = config.n_particles
        assert np.array_equal(changed[:30], baseline[:30])
        assert np.array_equal(changed[30, :n], baseline[30, :n])
        assert not np.allclose(changed[30, n:], baseline[30, n:])


class TestGaussianRegimes:

    def test_single_segment_has_no_change_points(self):
        stream = gaussian_regimes([GaussianSegment(length=30, correlation=np.eye(2).tolist())], seed=0)
        assert stream.true_cps == ()

    def test_segment_correlation(self):
        target = equicorrelation(2, 0.9)
        stream = gaussian_regimes(
            [
                GaussianSegment(length=100, correlation=np.eye(2).tolist()),
                GaussianSegment(length=1000, correlation=target.tolist()),
            ],
            seed=11,
        )
        assert stream.true_cps == (100,)
        second = stream.frame.window(100, 1000)
        corr, _ = raw_correlation(second)
        assert corr[0, 1] == pytest.approx(0.9, abs=0.04)

    def test_non_pd_segment_fails(self):
        with pytest.raises(ContractException):
            gaussian_regimes([GaussianSegment(length=10, correlation=equicorrelation(3, -0.8).tolist())])

    def test_flip_keeps_positive_definite(self):
        flipped = flip_correlation(equicorrelation(3, 0.8), [0])
        assert flipped[0, 1] == pytest.approx(-0.8)
        assert flipped[1, 2] == pytest.approx(0.8)
        assert np.all(np.linalg.eigvalsh(flipped) > 0)

    @pytest.mark.parametrize("window, tolerance", [(50, 0.15), (200, 0.08)])
    @pytest.mark.parametrize("seed", range(5))
    def test_first_window_after_change(self, window, tolerance, seed):
        stream = gaussian_regimes(
            [
                GaussianSegment(length=100, correlation=np.eye(2).tolist()),
                GaussianSegment(length=window, correlation=equicorrelation(2, 0.9).tolist()),
            ],
            seed=seed,
        )
        corr, _ = raw_correlation(stream.frame.window(100, window))
        assert corr[0, 1] == pytest.approx(0.9, abs=tolerance)
