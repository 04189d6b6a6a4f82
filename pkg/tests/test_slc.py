import numpy as np
import pytest

from slcq import dynamics as dyn
from slcq import engine, metrics, slc
from slcq.uncertainty import SampleSet, ThetaSample, UncertaintyChannelSpec, grid_samples

from conftest import random_hermitian, random_state


def small_system(rng, dim=3, n_controls=2, intervals=10, duration=5.0, n_classes=2):
    drift = dyn.HamiltonianTerm(random_hermitian(rng, dim), dyn.CONSTANT_SCALE_FORM, theta_class=0)
    controls = tuple(
        dyn.HamiltonianTerm(random_hermitian(rng, dim), dyn.COSINE_MODULATED_FORM,
                            theta_class=n_classes - 1)
        for _ in range(n_controls)
    )
    model = dyn.HamiltonianModel(dim=dim, drift_terms=(drift,), control_terms=controls,
                                 n_theta_classes=n_classes)
    grid = dyn.TimeGrid(duration=duration, intervals=intervals)
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    target = slc.TargetSpec.pure(random_state(rng, dim))
    return model, grid, psi0, target


def finite_difference(model, samples, u, psi0, target, step=1e-6):
    sys_c = engine.compile_system(model, u.grid, psi0, target.vector)
    thetas = samples.as_array()

    def cost(values):
        return float(np.mean(engine.evaluate_batch(sys_c, thetas, values).costs))

    fd = np.zeros_like(u.values)
    for m in range(u.n_controls):
        for w in range(u.n_intervals):
            up = u.values.copy()
            up[m, w] += step
            dn = u.values.copy()
            dn[m, w] -= step
            fd[m, w] = (cost(up) - cost(dn)) / (2 * step)
    return fd


class TestGradient:
    def test_matches_finite_differences(self, rng):
        model, grid, psi0, target = small_system(rng)
        samples = SampleSet(samples=(ThetaSample(values=(1.13, 0.17)),), provenance="grid")
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        analytic = slc.sample_gradient(model, samples.samples[0], u, psi0, target) * grid.dt
        fd = finite_difference(model, samples, u, psi0, target)
        assert np.linalg.norm(analytic - fd) / np.linalg.norm(fd) <= 1e-3

    def test_augmented_matches_finite_differences(self, rng):
        model, grid, psi0, target = small_system(rng)
        specs = [UncertaintyChannelSpec.grid(0.2, 3), UncertaintyChannelSpec.grid(0.2, 3, center=0.0)]
        samples = grid_samples(specs)
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        analytic = slc.augmented_gradient(aug, u) * grid.dt
        fd = finite_difference(model, samples, u, psi0, target)
        assert np.linalg.norm(analytic - fd) / np.linalg.norm(fd) <= 1e-3

    def test_mean_of_identical_samples_is_single(self, rng):
        model, grid, psi0, target = small_system(rng)
        theta = ThetaSample(values=(1.05, -0.1))
        samples = SampleSet(samples=(theta,) * 4, provenance="grid")
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        single = slc.sample_gradient(model, theta, u, psi0, target)
        averaged = slc.augmented_gradient(aug, u)
        assert np.abs(single - averaged).max() < 1e-12

    def test_zero_control_hamiltonian_zero_row(self, rng):
        model, grid, psi0, target = small_system(rng)
        zero_term = dyn.HamiltonianTerm(np.zeros((3, 3)), dyn.CONSTANT_SCALE_FORM, theta_class=0)
        model2 = dyn.HamiltonianModel(dim=3, drift_terms=model.drift_terms,
                                      control_terms=(*model.control_terms, zero_term),
                                      n_theta_classes=2)
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((3, 10)))
        g = slc.sample_gradient(model2, ThetaSample(values=(1.0, 0.0)), u, psi0, target)
        assert np.all(g[2] == 0.0)

    def test_stationary_at_perfect_transfer(self, rng):
        # target = the state actually reached: J = 1 and the gradient vanishes
        model, grid, psi0, _ = small_system(rng)
        theta = ThetaSample(values=(1.0, 0.0))
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        traj = dyn.propagate(model, theta, u, psi0)
        target = slc.TargetSpec.pure(traj.final_state)
        samples = SampleSet(samples=(theta,), provenance="grid")
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        assert abs(slc.performance(aug, u) - 1.0) < 1e-12
        g = slc.augmented_gradient(aug, u)
        assert np.abs(g).max() < 1e-6

    def test_midpoint_method_converges_quadratically(self, rng):
        # the pointwise (midpoint) gradient is the continuous-time density;
        # its finite-difference mismatch should shrink ~4x per dt halving
        model, _, psi0, target = small_system(rng)
        theta = ThetaSample(values=(1.13, 0.17))
        samples = SampleSet(samples=(theta,), provenance="grid")
        errors = []
        for w in (10, 20, 40):
            grid = dyn.TimeGrid(duration=5.0, intervals=w)
            u = dyn.ControlField(grid=grid, values=np.vstack([np.sin(grid.midpoints()),
                                                              np.cos(grid.midpoints())]))
            analytic = slc.sample_gradient(model, theta, u, psi0, target, method="midpoint")
            fd = finite_difference(model, samples, u, psi0, target)
            errors.append(np.linalg.norm(analytic * grid.dt - fd) / np.linalg.norm(fd))
        assert errors[1] < errors[0] / 2.5
        assert errors[2] < errors[1] / 2.5

    def test_first_order_ascent(self, rng):
        model, grid, psi0, target = small_system(rng)
        samples = SampleSet(samples=(ThetaSample(values=(0.9, 0.2)),), provenance="grid")
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        for _ in range(5):
            u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
            delta = slc.augmented_gradient(aug, u)
            if np.linalg.norm(delta) <= 1e-6:
                continue
            j0 = slc.performance(aug, u)
            improved = any(
                slc.performance(aug, u.with_values(u.values + eta * delta)) > j0
                for eta in (1e-4, 1e-3, 1e-2)
            )
            assert improved


class TestTrain:
    def test_stationary_start_terminates_quickly(self, rng):
        model, grid, psi0, _ = small_system(rng)
        theta = ThetaSample(values=(1.0, 0.0))
        u0 = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        traj = dyn.propagate(model, theta, u0, psi0)
        target = slc.TargetSpec.pure(traj.final_state)
        aug = slc.AugmentedSystem(model=model, samples=SampleSet(samples=(theta,), provenance="grid"),
                                  psi0=psi0, target=target)
        cfg = slc.TrainConfig(eta=0.1, patience=5, max_iter=100)
        rec = slc.train(aug, u0, cfg, threads=1)
        assert rec.terminated_by == "patience"
        assert rec.iterations <= 10
        assert np.abs(rec.final_controls.values - u0.values).max() < 1e-9

    def test_max_iter_zero_returns_initial_cost(self, rng):
        model, grid, psi0, target = small_system(rng)
        aug = slc.AugmentedSystem(model=model,
                                  samples=SampleSet(samples=(ThetaSample(values=(1.0, 0.0)),),
                                                    provenance="grid"),
                                  psi0=psi0, target=target)
        u0 = dyn.ControlField(grid=grid, values=np.zeros((2, 10)))
        rec = slc.train(aug, u0, slc.TrainConfig(eta=0.1, max_iter=0), threads=1)
        assert rec.iterations == 0
        assert rec.terminated_by == "max_iter"
        assert len(rec.j_history) == 1

    def test_cost_increases_and_stays_in_range(self, rng):
        model, grid, psi0, target = small_system(rng)
        samples = grid_samples([UncertaintyChannelSpec.grid(0.2, 3),
                                UncertaintyChannelSpec.grid(0.1, 3, center=0.0)])
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        u0 = dyn.ControlField(grid=grid, values=np.zeros((2, 10)))
        rec = slc.train(aug, u0, slc.TrainConfig(eta=0.05, max_iter=300), threads=1)
        assert rec.j_history[-1] > rec.j_history[0]
        assert np.all(rec.j_history >= 0.0) and np.all(rec.j_history <= 1.0 + 1e-9)

    def test_bounds_respected_every_iterate(self, rng):
        model, grid, psi0, target = small_system(rng)
        bounds = ((-0.3, 0.3), (0.0, 0.2))
        samples = SampleSet(samples=(ThetaSample(values=(1.0, 0.0)),), provenance="grid")
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        u0 = dyn.ControlField(grid=grid, values=np.zeros((2, 10)), bounds=bounds)
        rec = slc.train(aug, u0, slc.TrainConfig(eta=0.5, max_iter=50), threads=1)
        # train asserts inside the loop; re-check the final field here
        assert rec.final_controls.values[0].min() >= -0.3
        assert rec.final_controls.values[0].max() <= 0.3
        assert rec.final_controls.values[1].min() >= 0.0
        assert rec.final_controls.values[1].max() <= 0.2

    def test_deterministic_across_runs_and_threads(self, rng):
        model, grid, psi0, target = small_system(rng, intervals=8)
        samples = grid_samples([UncertaintyChannelSpec.grid(0.2, 4),
                                UncertaintyChannelSpec.grid(0.1, 4, center=0.0)])
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        u0 = dyn.ControlField(grid=grid, values=np.zeros((2, 8)))
        cfg = slc.TrainConfig(eta=0.05, max_iter=40)
        runs = [slc.train(aug, u0, cfg, threads=t) for t in (1, 1, 2)]
        assert np.array_equal(runs[0].j_history, runs[1].j_history)
        assert np.array_equal(runs[0].j_history, runs[2].j_history)
        assert np.array_equal(runs[0].final_controls.values, runs[2].final_controls.values)


class TestLiftedTarget:
    def test_lifted_overlap_equals_uhlmann(self, rng):
        # |<t'|psi>| == Uhlmann fidelity of the reduced state for every state
        # of the invariant subspace
        from slcq.experiments import build_cavity

        spec = build_cavity()
        target = spec.target
        for _ in range(1000):
            psi = random_state(rng, 4)
            overlap = abs(np.vdot(target.vector, psi))
            rho = metrics.partial_trace_field(psi, target.split)
            uhl = metrics.uhlmann_fidelity(rho, metrics.density_matrix(target.atom_state))
            assert abs(overlap - uhl) < 1e-9

    def test_lift_validation_rejects_bad_vector(self):
        from slcq.experiments import cavity_split

        bad = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2)
        atom = np.array([0.0, 1.0, 1.0, 0.0], dtype=complex) / np.sqrt(2)
        with pytest.raises(ValueError):
            slc.TargetSpec.lifted_subsystem_pure(bad, atom, cavity_split(0))


class TestTestReport:
    def test_zero_width_test_set(self, rng):
        model, grid, psi0, target = small_system(rng)
        samples = SampleSet(samples=(ThetaSample(values=(1.0, 0.0)),) * 5, provenance="uniform",
                            seed=3)
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        rep = slc.test(model, u, samples, psi0, target, threads=1)
        assert rep.fidelities.std() < 1e-15
        assert rep.seed == 3
        assert rep.histogram_counts.sum() == 5

    def test_mean_is_arithmetic_mean(self, rng):
        model, grid, psi0, target = small_system(rng)
        samples = grid_samples([UncertaintyChannelSpec.grid(0.2, 5),
                                UncertaintyChannelSpec.grid(0.2, 5, center=0.0)])
        u = dyn.ControlField(grid=grid, values=rng.standard_normal((2, 10)))
        rep = slc.test(model, u, samples, psi0, target, threads=1)
        assert abs(rep.mean_fidelity - rep.fidelities.mean()) < 1e-12
        assert rep.concurrences is None  # three-level states have no two-qubit reduction

    def test_two_qubit_reports_concurrence(self, rng):
        from slcq.experiments import build_supercond

        spec = build_supercond(reduced_grid=True)
        u = spec.initial_control()
        samples = SampleSet(samples=(ThetaSample(values=(1.0, 1.0, 1.0)),), provenance="grid")
        rep = slc.test(spec.model, u, samples, spec.psi0, spec.target, threads=1)
        assert rep.concurrences is not None and rep.concurrences.shape == (1,)


class TestBoundsModeNone:
    def test_unclipped_training_ignores_bounds(self, rng):
        model, grid, psi0, target = small_system(rng)
        samples = SampleSet(samples=(ThetaSample(values=(1.0, 0.0)),), provenance="grid")
        aug = slc.AugmentedSystem(model=model, samples=samples, psi0=psi0, target=target)
        u0 = dyn.ControlField(grid=grid, values=np.zeros((2, 10)), bounds=((-0.01, 0.01), None))
        cfg = slc.TrainConfig(eta=0.5, max_iter=30, bounds_mode="none")
        rec = slc.train(aug, u0, cfg, threads=1)
        # training was free to leave the (tiny) bound, and the result carries none
        assert rec.final_controls.bounds is None
