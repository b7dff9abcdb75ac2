import math

import numpy as np
import pytest

from qsvtlab import encoding as en
from qsvtlab import simulator as sim
from qsvtlab._validation import ValidationError

from reference import partial_trace_loop, random_density, random_state_circuit

S2 = 1 / math.sqrt(2)


class TestCircuit:
    def test_hadamard(self):
        out = sim.run_circuit(sim.Circuit(1).add("H", 0)).amplitudes
        np.testing.assert_allclose(out, [S2, S2], atol=1e-15)

    def test_bell(self):
        out = sim.run_circuit(sim.Circuit(2).add("H", 0).add("CNOT", 0, 1)).amplitudes
        np.testing.assert_allclose(out, [S2, 0, 0, S2], atol=1e-15)

    def test_qubit_zero_is_most_significant(self):
        out = sim.run_circuit(sim.Circuit(2).add("X", 0)).amplitudes
        assert abs(out[2]) == 1

    def test_random_circuit_norm(self):
        rng = np.random.default_rng(0)
        circ = sim.random_circuit(3, 3, rng)
        assert abs(np.linalg.norm(sim.run_circuit(circ).amplitudes) - 1) <= 1e-10

    def test_inverse(self):
        rng = np.random.default_rng(1)
        circ = random_state_circuit(3, rng)
        U = circ.unitary() @ circ.inverse().unitary()
        np.testing.assert_allclose(U, np.eye(8), atol=1e-12)

    def test_dict_round_trip(self):
        rng = np.random.default_rng(2)
        circ = random_state_circuit(2, rng).add("U", 0, matrix=sim.random_unitary(2, rng))
        back = sim.Circuit.from_dict(circ.to_dict())
        np.testing.assert_allclose(back.unitary(), circ.unitary(), atol=1e-15)

    @pytest.mark.parametrize(
        "args",
        [("CNOT", 0, 0), ("H", 5), ("FOO", 0), ("RY", 0)],
    )
    def test_bad_gates(self, args):
        with pytest.raises(ValidationError):
            sim.Circuit(2).add(*args)

    def test_invalid_density(self):
        with pytest.raises(ValidationError):
            sim.DensityMatrix(np.diag([1.2, -0.2]))


class TestPartialTrace:
    def test_bell(self):
        psi = sim.run_circuit(sim.Circuit(2).add("H", 0).add("CNOT", 0, 1))
        np.testing.assert_allclose(sim.partial_trace(psi, [0]).entries, np.eye(2) / 2, atol=1e-15)

    def test_product_keeps_plus(self):
        psi = sim.run_circuit(sim.Circuit(2).add("H", 1))
        np.testing.assert_allclose(sim.partial_trace(psi, [1]).entries, np.full((2, 2), 0.5), atol=1e-15)

    @pytest.mark.parametrize("keep", [[0], [1], [2], [0, 2], [1, 2]])
    def test_random_vs_index_loop(self, keep):
        rng = np.random.default_rng(3)
        psi = sim.run_circuit(random_state_circuit(3, rng, depth=3))
        ref = partial_trace_loop(psi.amplitudes, 3, keep)
        np.testing.assert_allclose(sim.partial_trace(psi, keep).entries, ref, atol=1e-12)

    def test_density_input(self):
        rng = np.random.default_rng(4)
        rho = random_density(4, rng)
        red = sim.partial_trace(sim.DensityMatrix(rho), [0]).entries
        np.testing.assert_allclose(red, np.einsum("ajbj->ab", rho.reshape(2, 2, 2, 2)), atol=1e-14)


class TestHadamardTest:
    def test_identity(self):
        E = en.from_matrix(np.eye(2))
        assert sim.hadamard_test(E, sim.Circuit(1), [0]) == pytest.approx(1.0, abs=1e-14)

    def test_z_on_one(self):
        E = en.from_matrix(np.diag([1.0, -1.0]))
        assert sim.hadamard_test(E, sim.Circuit(1).add("X", 0), [0]) == pytest.approx(0.0, abs=1e-14)

    def test_random_hermitian(self):
        rng = np.random.default_rng(5)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        A = (g + g.conj().T) / (2 * np.linalg.norm(g, 2))
        circ = random_state_circuit(3, rng)
        rho = sim.partial_trace(sim.run_circuit(circ), [1, 2]).entries
        p = sim.hadamard_test(en.from_matrix(A, alpha=1.0), circ, [1, 2])
        assert p == pytest.approx((1 + np.real(np.trace(A @ rho))) / 2, abs=1e-10)

    def test_circuit_and_block_paths_agree(self, monkeypatch):
        rng = np.random.default_rng(6)
        A = np.diag([0.3, -0.7])
        circ = random_state_circuit(2, rng)
        E = en.from_matrix(A, alpha=1.0)
        gate_level = sim.hadamard_test(E, circ, [0])
        monkeypatch.setattr(sim, "CIRCUIT_SIM_QUBITS", 0)
        assert sim.hadamard_test(E, circ, [0]) == pytest.approx(gate_level, abs=1e-12)

    def test_sampling_is_seeded(self):
        E = en.from_matrix(np.diag([0.3, -0.7]), alpha=1.0)
        a = sim.hadamard_test(E, sim.Circuit(1).add("H", 0), [0], mode="sample", shots=500, seed=7)
        b = sim.hadamard_test(E, sim.Circuit(1).add("H", 0), [0], mode="sample", shots=500, seed=7)
        assert a == b

    def test_wrong_output_count(self):
        with pytest.raises(ValidationError):
            sim.hadamard_test(en.from_matrix(np.eye(2)), sim.Circuit(2), [0, 1])


class TestSwapTest:
    def test_same_pure(self):
        rho = sim.run_circuit(sim.Circuit(1).add("H", 0)).density()
        assert sim.swap_test(rho, rho) == pytest.approx(1.0, abs=1e-14)

    def test_orthogonal(self):
        assert sim.swap_test(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(0.5, abs=1e-14)

    def test_random_pair(self):
        rng = np.random.default_rng(8)
        r0, r1 = random_density(4, rng), random_density(4, rng)
        assert sim.swap_test(r0, r1) == pytest.approx((1 + np.real(np.trace(r0 @ r1))) / 2, abs=1e-10)

    def test_circuit_version(self):
        rng = np.random.default_rng(9)
        c0, c1 = random_state_circuit(2, rng), random_state_circuit(2, rng)
        circ = sim.swap_test_circuit(c0, c1, [0])
        out = sim.run_circuit(circ).amplitudes
        p0 = float(np.sum(np.abs(out[: out.size // 2]) ** 2))
        r0 = sim.prepared_state(c0, [0]).entries
        r1 = sim.prepared_state(c1, [0]).entries
        assert p0 == pytest.approx(sim.swap_test(r0, r1), abs=1e-12)

    def test_sampled_within_hoeffding(self):
        r0, r1 = np.diag([0.7, 0.3]), np.diag([0.2, 0.8])
        exact = sim.swap_test(r0, r1)
        shots = 20_000
        band = math.sqrt(math.log(2 / 0.01) / (2 * shots))
        hits = sum(abs(sim.swap_test(r0, r1, "sample", shots, seed) - exact) <= band for seed in range(50))
        assert hits >= 48


class TestAmplitudeAmplification:
    def test_no_steps(self):
        rng = np.random.default_rng(10)
        U = sim.random_unitary(4, rng)
        np.testing.assert_allclose(sim.exact_aa(U, [0], 0).amplitudes, U[:, 0], atol=1e-15)

    def test_quarter_amplitude_becomes_certain(self):
        # first column has weight 1/4 on the good index
        v = np.array([0.5, math.sqrt(0.75), 0, 0])
        rng = np.random.default_rng(11)
        rest = np.linalg.qr(np.column_stack([v, rng.normal(size=(4, 3))]))[0]
        U = rest * np.sign(rest[:, 0] @ v)
        out = sim.exact_aa(U, [0], 1).amplitudes
        assert abs(out[0]) ** 2 == pytest.approx(1.0, abs=1e-9)

    def test_two_steps_follow_sin_formula(self):
        rng = np.random.default_rng(12)
        U = sim.random_unitary(8, rng)
        good = [0, 3]
        theta = math.asin(math.sqrt(np.sum(np.abs(U[good, 0]) ** 2)))
        out = sim.exact_aa(U, good, 2).amplitudes
        assert math.sqrt(np.sum(np.abs(out[good]) ** 2)) == pytest.approx(abs(math.sin(5 * theta)), abs=1e-8)

    def test_projector_matrix_form(self):
        rng = np.random.default_rng(13)
        U = sim.random_unitary(4, rng)
        Pi = np.diag([1.0, 0, 1.0, 0])
        a = sim.exact_aa(U, Pi, 1).amplitudes
        b = sim.exact_aa(U, [0, 2], 1).amplitudes
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestDistances:
    def test_identical(self):
        rng = np.random.default_rng(14)
        rho = random_density(4, rng)
        assert sim.distance_oracle(rho, rho, "td") == pytest.approx(0, abs=1e-14)
        assert sim.distance_oracle(rho, rho, "fidelity") == pytest.approx(1, abs=1e-7)

    def test_orthogonal(self):
        a, b = np.diag([1.0, 0]), np.diag([0, 1.0])
        assert sim.distance_oracle(a, b, "td") == pytest.approx(1)
        assert sim.distance_oracle(a, b, "hs2") == pytest.approx(1)
        assert sim.distance_oracle(a, b, "qjs2") == pytest.approx(1)

    def test_entropy_of_maximally_mixed(self):
        assert sim.von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2 * math.log(2))
        assert sim.distance_oracle(np.eye(2) / 2, np.diag([1.0, 0]), "entropy_diff") == pytest.approx(math.log(2))

    def test_binary_entropy(self):
        assert sim.binary_entropy(0.5) == 1.0
        assert sim.binary_entropy(0.0) == 0.0
        assert sim.binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-3)

    def test_joint_entropy_identity(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            p = rng.dirichlet(np.ones(3))
            rhos = [random_density(2, rng) for _ in range(3)]
            joint = np.zeros((6, 6), dtype=complex)
            for i in range(3):
                joint[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = p[i] * rhos[i]
            # pad to a qubit dimension with an empty block
            padded = np.zeros((8, 8), dtype=complex)
            padded[:6, :6] = joint
            shannon = -np.sum(p * np.log(p))
            mixed = sum(pi * sim.von_neumann_entropy(r) for pi, r in zip(p, rhos))
            assert sim.von_neumann_entropy(padded) == pytest.approx(shannon + mixed, abs=1e-8)

    def test_unknown_measure(self):
        with pytest.raises(ValidationError):
            sim.distance_oracle(np.eye(2) / 2, np.eye(2) / 2, "bures")
