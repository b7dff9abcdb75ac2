import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from qsvtlab import state_testing as st
from qsvtlab.cli import main, read_coeff_csv
from qsvtlab.encoding import matrix_to_json
from qsvtlab.poly_approx import sign_poly

from reference import flipped_copy, random_state_circuit


def run(*args):
    result = CliRunner().invoke(main, [str(a) for a in args])
    report = json.loads(result.stdout) if result.stdout.strip() else None
    return result.exit_code, report


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def instances(tmp_path):
    rng = np.random.default_rng(0)
    c = random_state_circuit(1, rng)
    other = random_state_circuit(2, rng)
    mixed = random_state_circuit(2, rng)
    return {
        "orth": write(tmp_path / "orth.json", st.StateTestInstance(c, flipped_copy(c), (0,), 1.0, 0.0).to_dict()),
        "same": write(tmp_path / "same.json", st.StateTestInstance(c, c, (0,), 1.0, 0.0).to_dict()),
        "random": write(tmp_path / "random.json", st.StateTestInstance(other, mixed, (0,), 1.0, 0.0).to_dict()),
    }


class TestApprox:
    def test_sign_spec(self, tmp_path):
        spec = write(tmp_path / "sign.json", {"kind": "sign", "delta": 0.2, "eps": 0.01})
        out = tmp_path / "sign.csv"
        code, report = run("approx", spec, "--out", out)
        assert code == 0
        res = report["results"]
        assert report["schema"] == "qsvtlab.report/1"
        assert res["parity"] == "odd"
        assert res["max_abs"] <= 1
        assert res["max_err_outside_gap"] <= 5 * 0.01
        sidecar = json.loads((tmp_path / "sign.csv.json").read_text())
        assert sidecar["degree"] == res["degree"]
        assert json.loads(spec.read_text())["kind"] == "sign"

    def test_csv_round_trip(self, tmp_path):
        spec = write(tmp_path / "s.json", {"kind": "sign", "delta": 0.3, "eps": 0.01})
        out = tmp_path / "s.csv"
        assert run("approx", spec, "--out", out)[0] == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["k", "c_k", "chat_k"]
        P = read_coeff_csv(str(out))
        direct = sign_poly(0.3, 0.01)
        assert np.max(np.abs(P.coeffs[: direct.coeffs.size] - direct.coeffs)) <= 1e-12
        assert P.parity == "odd"

    def test_zero_custom(self, tmp_path):
        spec = write(tmp_path / "z.json", {"kind": "custom", "expr": "0*x", "d": 4, "eps": 0.01})
        out = tmp_path / "z.csv"
        code, report = run("approx", spec, "--out", out)
        assert code == 0
        assert report["results"]["l1_norm"] == 0
        assert all(float(r["chat_k"]) == 0 for r in csv.DictReader(out.open()))

    def test_log_spec(self, tmp_path):
        spec = write(tmp_path / "log.json", {"kind": "log", "beta": 0.2, "eps": 0.01})
        code, report = run("approx", spec)
        assert code == 0
        assert report["results"]["parity"] == "even"
        assert report["results"]["max_abs"] <= 1

    def test_invalid_spec(self, tmp_path):
        spec = write(tmp_path / "bad.json", {"kind": "sign", "eps": 0.01})
        code, report = run("approx", spec)
        assert code == 2
        assert report["status"] == "invalid_input"

    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run("approx", bad)[0] == 2

    def test_over_cap(self, tmp_path):
        spec = write(tmp_path / "sign.json", {"kind": "sign", "delta": 0.01, "eps": 1e-4})
        code, report = run("approx", spec, "--cap", 63)
        assert code == 3
        assert report["status"] == "resource_error"


class TestQsvt:
    def poly(self, tmp_path, coeffs):
        path = tmp_path / "p.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "c_k", "chat_k"])
            for k, c in enumerate(coeffs):
                w.writerow([k, c, c])
        return path

    def test_identity_with_first_chebyshev(self, tmp_path):
        enc = write(tmp_path / "eye.json", {"matrix": matrix_to_json(np.eye(2)), "alpha": 1.0})
        code, report = run("qsvt", enc, self.poly(tmp_path, [0, 1]))
        assert code == 0
        np.testing.assert_allclose(np.array(report["results"]["block"])[..., 0], np.eye(2), atol=1e-12)

    def test_hermitian_needs_flag(self, tmp_path):
        A = np.array([[0.5, 0.3], [0.3, -0.2]])
        enc = write(tmp_path / "h.json", {"matrix": matrix_to_json(A), "alpha": 2.0})
        poly = self.poly(tmp_path, [0, 0, 0, 1])
        assert run("qsvt", enc, poly)[0] == 2
        code, report = run("qsvt", enc, poly, "--allow-scaled")
        assert code == 0
        assert report["results"]["scaled_input"] is True
        assert report["results"]["deviation"] <= 1e-10

    def test_output_file(self, tmp_path):
        A = np.diag([0.3, -0.6])
        enc = write(tmp_path / "d.json", {"matrix": matrix_to_json(A), "alpha": 1.0})
        out = tmp_path / "out.json"
        code, report = run("qsvt", enc, self.poly(tmp_path, [0, 0, 1]), "--out", out)
        assert code == 0
        saved = json.loads(out.read_text())
        assert saved["deviation"] <= 1e-10


class TestStateTests:
    def test_trace_distance(self, instances):
        code, report = run("test", instances["orth"], instances["random"], "--algo", "qsd")
        assert code == 0
        assert [r["pass"] for r in report["results"]] == [True, True]

    @pytest.mark.parametrize("algo", ["cert-qsd", "cert-qhs", "qhs"])
    def test_certification_and_swap(self, instances, algo):
        code, report = run("test", instances["orth"], instances["same"], "--algo", algo)
        assert code == 0

    def test_parallel_matches_serial(self, instances):
        args = ("test", instances["orth"], instances["same"], instances["random"], "--algo", "qhs")
        _, serial = run(*args)
        _, parallel = run(*args, "--jobs", 2)
        assert serial["results"] == parallel["results"]

    def test_sample_mode_is_seeded(self, instances):
        args = ("test", instances["random"], "--algo", "qsd", "--mode", "sample", "--seed", 11)
        a, b = run(*args)[1], run(*args)[1]
        assert a["results"] == b["results"]

    def test_hh_with_cap(self, instances):
        code, report = run("test", instances["orth"], "--algo", "hh", "--eps", 0.01, "--cap", 1 << 18)
        assert code == 0
        assert report["results"][0]["success"] >= 0.99

    def test_hh_default_cap_exceeded(self, instances):
        assert run("test", instances["orth"], "--algo", "hh", "--eps", 0.01)[0] == 3

    def test_protocol(self, instances):
        code, report = run("test", instances["orth"], "--algo", "protocol", "--eps", 0.01, "--cap", 1 << 18, "--trials", 2000)
        assert code == 0
        assert report["results"][0]["band"] > 0

    def test_entropy_with_overrides(self, tmp_path):
        mixed = random_state_circuit(2, np.random.default_rng(3))
        inst = {"q0": mixed.to_dict(), "q1": mixed.to_dict(), "outputs": [0], "g": 0.4}
        path = write(tmp_path / "q.json", inst)
        code, report = run("test", path, "--algo", "qed", "--override", "beta=0.1", "--override", "eps_qsvt=0.01")
        assert code == 0
        assert report["results"][0]["schedule"]["beta"] == 0.1

    def test_mismatch_exit(self, instances):
        # a coarse sign approximation cannot resolve the difference
        code, report = run(
            "test", instances["random"], "--algo", "qsd", "--override", "delta=0.9", "--override", "eps_qsvt=0.45"
        )
        assert code == 4
        assert report["status"] == "mismatch"
        assert report["results"][0]["pass"] is False

    def test_discriminator(self, tmp_path):
        path = write(tmp_path / "disc.json", {"matrix": matrix_to_json(np.diag([0.2, 0.8])), "alpha": 0.3, "beta": 0.7, "eps": 0.05})
        code, report = run("test", path, "--algo", "svd-disc")
        assert code == 0
        assert report["results"][0]["projector"] == "image"

    def test_bad_override(self, instances):
        assert run("test", instances["orth"], "--algo", "qsd", "--override", "delta")[0] == 2
        assert run("test", instances["orth"], "--algo", "qsd", "--override", "kappa=0.1")[0] == 2

    def test_missing_field(self, tmp_path):
        path = write(tmp_path / "bad.json", {"q0": {"n_qubits": 1, "gates": []}})
        assert run("test", path, "--algo", "qsd")[0] == 2


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "qsvtlab", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "approx" in out.stdout
