import json

import numpy as np
import pytest

from slcq import config as cfg
from slcq import experiments as ex
from slcq import metrics
from slcq.errors import InvalidPhotonNumber


class TestVtypeSingle:
    def test_dimensions(self):
        spec = ex.build_vtype_single()
        assert spec.model.dim == 3
        assert spec.model.n_controls == 4
        assert spec.grid.dt == 0.025

    def test_training_grid_values(self):
        spec = ex.build_vtype_single()
        arr = spec.training_samples().as_array()[:, 0]
        assert np.allclose(sorted(arr), [0.82, 0.88, 0.94, 1.00, 1.06, 1.12, 1.18], atol=1e-12)

    def test_initial_and_target_states(self):
        spec = ex.build_vtype_single()
        assert np.allclose(spec.psi0, [1, 0, 0])
        assert np.allclose(spec.target.vector, [0, 1 / np.sqrt(2), 1 / np.sqrt(2)])
        assert metrics.fidelity_pure(spec.psi0, spec.target.vector) == 0.0


class TestVtypeTimevarying:
    def test_two_free_parameters(self):
        spec = ex.build_vtype_timevarying()
        assert spec.model.n_theta_classes == 2
        assert len(spec.training_samples()) == 49

    def test_modulation_grid(self):
        spec = ex.build_vtype_timevarying()
        grids = {round(v, 10) for v in spec.training_samples().as_array()[:, 1]}
        assert grids == {-0.18, -0.12, -0.06, 0.0, 0.06, 0.12, 0.18}

    def test_nominal_member_is_uncertainty_free(self):
        from slcq.dynamics import hamiltonian_at
        from slcq.uncertainty import ThetaSample

        spec = ex.build_vtype_timevarying()
        u = spec.initial_control()
        single = ex.build_vtype_single()
        for w in (0, 57, 199):
            h_tv = hamiltonian_at(spec.model, ThetaSample(values=(0.0, 0.0)), u, w)
            h_plain = hamiltonian_at(single.model, ThetaSample(values=(1.0,)), u, w)
            assert np.abs(h_tv - h_plain).max() < 1e-14

    def test_nominal_baseline_trains_on_one_sample(self):
        spec = ex.build_vtype_nominal_baseline()
        samples = spec.training_samples()
        assert len(samples) == 1
        assert samples.samples[0].values == (0.0, 0.0)
        # test distribution identical to the time-varying arm
        tv = ex.build_vtype_timevarying()
        assert spec.test_sampling == tv.test_sampling
        assert spec.test_count == tv.test_count
        a = spec.test_samples(seed=5).as_array()
        b = tv.test_samples(seed=5).as_array()
        assert np.array_equal(a, b)


class TestSupercond:
    def test_bounds_vector(self):
        spec = ex.build_supercond()
        assert spec.bounds == ((0.0, 50.2), (0.0, 50.2), (0.0, 11.1), (0.0, 11.1), (-0.5, 0.5))

    def test_training_set_size(self):
        assert len(ex.build_supercond().training_samples()) == 343
        assert len(ex.build_supercond(reduced_grid=True).training_samples()) == 49

    def test_target_is_maximally_entangled(self):
        spec = ex.build_supercond()
        assert abs(metrics.concurrence(metrics.density_matrix(spec.target.vector)) - 1.0) < 1e-9

    def test_tied_channels(self):
        spec = ex.build_supercond()
        classes = [t.theta_class for t in spec.model.control_terms]
        assert classes == [0, 0, 1, 1, 2]

    def test_folded_signs(self):
        spec = ex.build_supercond()
        assert np.allclose(spec.model.control_terms[2].matrix,
                           -np.kron(metrics.SIGMA_X, np.eye(2)))
        assert np.allclose(spec.model.control_terms[4].matrix,
                           -np.kron(metrics.SIGMA_Y, metrics.SIGMA_Y))

    def test_initial_controls_inside_bounds(self):
        u = ex.build_supercond().initial_control()
        assert u.values[:4].min() >= 4.0 and u.values[:4].max() <= 6.0
        assert np.abs(u.values[4]).max() <= 0.25


class TestCavity:
    def test_number_operator_block(self):
        ops = ex.cavity_subspace_operators(0, 4.89, 0.05, 0.05)
        assert np.allclose(ops["controls"][1], np.diag([2, 1, 1, 0]))

    def test_coupling_entries_for_vacuum(self):
        ops = ex.cavity_subspace_operators(0, 4.89, 0.05, 0.05)
        fa1 = ops["controls"][3]
        assert abs(fa1[0, 1] - np.sqrt(2)) < 1e-15
        assert abs(fa1[2, 3] - 1.0) < 1e-15

    @pytest.mark.parametrize("n", [0, 1, 2, 5])
    def test_matches_fock_oracle(self, n):
        ops = ex.cavity_subspace_operators(n, 4.89, 0.05, 0.05)
        oracle = ex.fock_oracle_build(n, 4.89, 0.05, 0.05)
        assert np.abs(ops["h0"] - oracle["h0"]).max() <= 1e-12
        assert np.abs(ops["h_interaction"] - oracle["h_interaction"]).max() <= 1e-12
        for built, projected in zip(ops["controls"], oracle["controls"]):
            assert np.abs(built - projected).max() <= 1e-12

    def test_dipole_projection(self):
        oracle = ex.fock_oracle_build(0, 4.89, 0.05, 0.05)
        expected = np.zeros((4, 4))
        expected[1, 2] = expected[2, 1] = 1.0
        assert np.allclose(oracle["controls"][2], expected, atol=1e-15)

    def test_lifted_target(self):
        spec = ex.build_cavity()
        assert np.allclose(spec.target.vector, [0, 1 / np.sqrt(2), 1 / np.sqrt(2), 0])
        rho = metrics.partial_trace_field(spec.target.vector, spec.target.split)
        fid = metrics.uhlmann_fidelity(rho, metrics.density_matrix(spec.target.atom_state))
        assert abs(fid - 1.0) < 1e-10

    def test_rejects_negative_photon_number(self):
        with pytest.raises(InvalidPhotonNumber):
            ex.build_cavity(photon_number=-1)
        with pytest.raises(InvalidPhotonNumber):
            ex.fock_oracle_build(-2, 4.89, 0.05, 0.05)

    def test_defaults_are_parameters(self):
        spec = ex.build_cavity(photon_number=1, field_frequency=5.0, coupling_1=0.03,
                               coupling_2=0.04)
        assert spec.physical_params["photon_number"] == 1
        assert spec.physical_params["field_frequency"] == 5.0
        assert np.allclose(spec.model.control_terms[1].matrix, np.diag([3, 2, 2, 1]))


class TestSerializationRoundTrip:
    @pytest.mark.parametrize("experiment_id", ex.EXPERIMENT_IDS)
    def test_spec_to_config_to_spec(self, experiment_id):
        spec = ex.build(experiment_id)
        payload = json.loads(json.dumps(cfg.spec_to_config(spec, seed=99)))
        rebuilt, seed = cfg.resolve(payload)
        assert seed == 99
        assert cfg.specs_equal(spec, rebuilt)

    def test_model_invariants_hold(self):
        from slcq import linalg

        for experiment_id in ex.EXPERIMENT_IDS:
            spec = ex.build(experiment_id)
            for term in (*spec.model.drift_terms, *spec.model.control_terms):
                assert linalg.is_hermitian(term.matrix)
                assert term.matrix.shape == (spec.model.dim, spec.model.dim)
