import csv
import io
import json
import math

import numpy as np
import pytest

from mpqw import compiler as C
from mpqw import harness_cli as hc
from mpqw import timing
from mpqw import two_particle as tp
from mpqw.dynamics import StateVector, enumerate_basis


def run_cli(capsys, *argv):
    code = hc.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# --- records -----------------------------------------------------------------


def test_record_errors_and_phase_wrapping():
    r = hc.ExperimentRecord("x", {"L": 4}, {"fidelity": 0.9, "phase": 3.1},
                            {"fidelity": 1.0, "phase": -3.1})
    assert r.errors["fidelity"] == pytest.approx(0.1)
    # 3.1 and -3.1 are 0.083 apart on the circle
    assert r.errors["phase"] == pytest.approx(2 * math.pi - 6.2)
    with pytest.raises(ValueError):
        hc.ExperimentRecord("x", {}, {"a": 1.0}, {"b": 1.0})


def test_csv_is_deterministic_and_parseable():
    recs = hc.run_gate_scan("phase_gate", [8, 12])
    again = hc.run_gate_scan("phase_gate", [8, 12])
    a, b = hc.records_to_csv(recs), hc.records_to_csv(again)
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert tuple(rows[0]) == hc.CSV_FIELDS
    assert len(rows) == sum(len(r.measured) for r in recs)
    for row in rows:
        assert float(row["abs_error"]) == pytest.approx(abs(float(row["measured"]) - float(row["predicted"])))
    assert "seconds" not in rows[0]
    assert "seconds" in hc.records_to_csv(recs, include_timing=True).splitlines()[0]


def test_json_mirrors_csv():
    recs = hc.run_gate_scan("basis_change", [8])
    d = json.loads(hc.records_to_json(recs))
    assert d["schema_version"] == hc.SCHEMA_VERSION
    rows = list(csv.DictReader(io.StringIO(hc.records_to_csv(recs))))
    flat = {(r["quantity"]): float(r["measured"]) for r in rows}
    assert flat == d["records"][0]["measured"]


def test_gate_scan_contents():
    (rec,) = hc.run_gate_scan("phase_gate", [16])
    M = timing.packet_offset(-math.pi / 4, 16)
    assert rec.params["M"] == M and rec.params["K"] == 2 * M + 16 and rec.params["t"] == 24.0
    assert rec.predicted["fidelity"] == 1.0 and rec.predicted["error_norm"] == 0.0
    assert 0.7 < rec.measured["fidelity"] < 1.0
    with pytest.raises(Exception):
        hc.run_gate_scan("identity_gate", [8])
    (idr,) = hc.run_gate_scan("identity_gate", [16], k=-math.pi / 4)
    assert idr.measured["fidelity"] > 0.7


def test_gate_scan_error_decreases_with_length():
    recs = hc.run_gate_scan("hadamard_k2", [16, 32, 64])
    err = [r.measured["error_norm"] for r in recs]
    assert err[0] > err[1] > err[2]


# --- logical outcome -----------------------------------------------------------


def _small_run(circ, bits, L=8):
    lay = C.compile_circuit(circ, L, -math.pi / 2)
    return hc.run_circuit_sim(lay, None, "boson", tol=1e-8, bits=bits)


def test_logical_outcome_conservation():
    tol = 1e-8
    out = _small_run(C.CircuitIR(1, (C.PhaseT(0),)), [1])
    total = sum(out.probabilities.values()) + out.leakage
    assert abs(total - 1) <= 10 * tol
    assert all(0 <= p <= 1 for p in out.probabilities.values())
    assert abs(sum(out.normalized.values()) - 1) < 1e-12
    assert 0 <= out.fidelity <= 1 + 1e-9
    d = out.to_dict()
    assert d["schema_version"] == hc.SCHEMA_VERSION and set(d["probabilities"]) == set(out.probabilities)


def test_empty_circuit_transport_improves_with_length():
    f = [_small_run(C.CircuitIR(1), [0], L).fidelity for L in (8, 16, 24)]
    assert f[2] > f[1] > f[0] > 0.5


def test_mediator_hadamard_splits_evenly():
    circ = C.CircuitIR(0, (C.HadamardMed(0),), mediators=1)
    lay = C.compile_circuit(circ, 16, -math.pi / 2)
    out = hc.run_circuit_sim(lay, None, "boson", tol=1e-8, circuit=circ, bits=[])
    norm = out.normalized
    assert len(norm) == 2
    for p in norm.values():
        assert abs(p - 0.5) < 0.05
    assert out.ideal_probabilities and all(abs(p - 0.5) < 1e-12 for p in out.ideal_probabilities.values())


# --- truncation ----------------------------------------------------------------


def test_hop_distance_on_path():
    A = np.diag(np.ones(4), 1)
    A = A + A.T
    assert list(hc.hop_distance(A, [0])) == [0, 1, 2, 3, 4]
    assert list(hc.hop_distance(A, [0, 4])) == [0, 1, 2, 1, 0]


def test_truncation_trials_are_deterministic():
    a = hc.verify_truncation_experiment(seed=3, trials=3)
    b = hc.verify_truncation_experiment(seed=3, trials=3)
    assert hc.records_to_csv(a.records) == hc.records_to_csv(b.records)
    assert a.passed and a.max_ratio <= 1.0 and a.min_margin >= 0
    for r in a.records:
        assert r.params["dimension"] <= 400
        assert r.measured["discrepancy"] <= r.predicted["discrepancy"]
    with pytest.raises(ValueError):
        hc.verify_truncation_experiment(trials=0)


def test_coarse_truncation_still_bounded():
    rep = hc.verify_truncation_experiment(seed=1, trials=5, coarse=True)
    assert rep.passed
    assert all(r.params["coarse_extra"] >= 1 for r in rep.records)


# --- state dumps --------------------------------------------------------------


def test_state_round_trip(tmp_path):
    basis = enumerate_basis(5, 2, "boson")
    rng = np.random.default_rng(0)
    amp = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    path = tmp_path / "s.bin"
    hc.write_state(path, StateVector(basis, amp), {"time": 1.5})
    header, back = hc.read_state(path)
    assert np.array_equal(back, amp)
    assert header["basis"] == {"vertices": 5, "particles": 2, "statistics": "boson",
                               "order": "lexicographic"}
    assert header["time"] == 1.5 and header["dimension"] == basis.dimension
    raw = path.read_bytes()
    assert raw[:8] == hc.STATE_MAGIC
    # re/im interleaved little-endian doubles after the header
    assert np.frombuffer(raw[-16:], dtype="<f8").tolist() == [amp[-1].real, amp[-1].imag]
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        hc.read_state(bad)


# --- command line -------------------------------------------------------------


def test_cli_smatrix(capsys):
    code, out, _ = run_cli(capsys, "smatrix", "--gadget", "phase_gate", "--momentum", str(-math.pi / 4))
    assert code == 0
    d = json.loads(out)
    U = np.array([[complex(*z) for z in row] for row in d["block_form"]["U"]])
    assert np.abs(U - np.diag([np.exp(-1j * math.pi / 4), 1])).max() < 1e-9
    assert d["block_form"]["perfect_transmission"]


def test_cli_theta(capsys):
    code, out, _ = run_cli(capsys, "theta", "--model", "onsite", "--U", str(2 + math.sqrt(2)),
                           "--p1", str(math.pi / 4), "--p2", str(3 * math.pi / 8))
    assert code == 0
    d = json.loads(out)
    assert complex(*d["exp_i_theta_plus"]) == pytest.approx(-1j, abs=1e-10)
    assert complex(*d["closed_form_exp_i_theta_plus"]) == pytest.approx(-1j, abs=1e-10)


def test_cli_usage_errors(capsys):
    assert run_cli(capsys, "no-such-command")[0] == 2
    assert run_cli(capsys, "theta", "--model", "onsite", "--p1", "0.1", "--p2", "0.2")[0] == 2
    assert run_cli(capsys, "smatrix", "--gadget", "phase_gate", "--momentum", "0.5")[0] == 2
    assert run_cli(capsys, "compile", "--circuit", "/nonexistent.json", "--L", "8")[0] == 2


def test_cli_gate_scan_pass_and_fail(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "gate-scan", "--gate", "phase_gate", "--L", "8", "16",
                           "--require-monotone")
    assert code == 0 and out.startswith("schema_version,")
    code, _, err = run_cli(capsys, "gate-scan", "--gate", "phase_gate", "--L", "8",
                           "--min-fidelity", "0.999")
    assert code == 1 and "check failed" in err
    target = tmp_path / "scan.json"
    code, _, _ = run_cli(capsys, "gate-scan", "--gate", "basis_change", "--L", "8",
                         "--format", "json", "--out", str(target))
    assert code == 0 and json.loads(target.read_text())["records"][0]["kind"] == "gate_scan"


def test_cli_compile_run_evolve_and_dot(capsys, tmp_path):
    circ = tmp_path / "c.json"
    circ.write_text(C.CircuitIR(1, (C.PhaseT(0),)).to_json())
    layout = tmp_path / "l.json"
    code, out, _ = run_cli(capsys, "compile", "--circuit", str(circ), "--L", "8", "--out", str(layout))
    assert code == 0 and json.loads(out)["blocks_I"] == 1
    code, out, _ = run_cli(capsys, "run", "--layout", str(layout),
                           "--bits", "1", "--model", "none")
    assert code == 0 and 0 < json.loads(out)["fidelity"] <= 1
    dump = tmp_path / "s.bin"
    code, out, _ = run_cli(capsys, "evolve", "--layout", str(layout), "--model", "none",
                           "--out", str(dump))
    assert code == 0
    header, amp = hc.read_state(dump)
    assert abs(np.linalg.norm(amp) - 1) < 1e-7 and header["basis"]["particles"] == 2
    code, out, _ = run_cli(capsys, "export-dot", "--layout", str(layout))
    assert code == 0 and out.startswith("graph G {")
    code, out, _ = run_cli(capsys, "export-dot", "--gadget", "cd_block", "--param", "L=8")
    assert code == 0 and " -- " in out


def test_cli_verify_truncation(capsys):
    code, out, err = run_cli(capsys, "verify-truncation", "--seed", "0", "--trials", "2")
    assert code == 0 and "2/2 trials within bound" in err
    assert len(out.strip().splitlines()) == 3


def test_cli_planar_compile_reports_planarity(capsys, tmp_path):
    circ = tmp_path / "c.json"
    circ.write_text(C.CircuitIR(2, (C.CZ(0, 1),)).to_json())
    code, out, _ = run_cli(capsys, "compile", "--circuit", str(circ), "--L", "8", "--planar",
                           "--out", str(tmp_path / "l.json"))
    d = json.loads(out)
    assert code == 0 and d["is_planar"] and d["max_degree"] <= 4


def test_cd_phase_matches_cli_default_theta():
    model = tp.InteractionModel.nearest_neighbor(-2 - math.sqrt(2))
    assert tp.cd_phase(model, "fermion") == pytest.approx(math.pi / 2)
