"""Tests for model specs, report serialization, suites, and the CLI."""

import json

import numpy as np
import pytest

from skmslab.errors import DimensionMismatch, ParityViolation, ZeroWittenIndex
from skmslab.report import make_report
from skmslab.workbench import ModelSpec, build_model, model_digest, run_suite
from skmslab.workbench.cli import main
from skmslab.workbench.models import matrix_from_json, matrix_to_json
from skmslab.workbench.reports import (
    CSV_COLUMNS,
    emit_report,
    report_row,
    to_csv_text,
    to_json_text,
)
from skmslab.workbench.suites import (
    BUDGET_SENTINEL,
    SuiteConfig,
    parse_quadrature,
)

BLOCK_SPEC = ModelSpec(kind="RectangularBlock", p=3, q=2, seed=1)


# ---------------------------------------------------------------------------
# model specs


def test_matrix_json_round_trip():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    np.testing.assert_allclose(matrix_from_json(matrix_to_json(m)), m)
    with pytest.raises(DimensionMismatch):
        matrix_from_json([[1.0, 2.0], [3.0, 4.0]])  # bare floats, no pairs
    with pytest.raises(DimensionMismatch):
        matrix_from_json([[[1.0, 0.0], [2.0]]])


def test_model_spec_round_trip():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    spec = ModelSpec(
        kind="RectangularBlock", p=3, q=2, seed=4,
        m=tuple(tuple(tuple(pair) for pair in row) for row in matrix_to_json(m)),
        scale=0.8, perturbation={"seed": 9, "scale": 0.3})
    again = ModelSpec.from_json(spec.to_json())
    assert again == spec
    assert model_digest(again) == model_digest(spec)


def test_model_spec_validation():
    with pytest.raises(ValueError, match="kind"):
        ModelSpec(kind="Diagonal", p=2, q=1)
    with pytest.raises(ValueError, match="positive"):
        ModelSpec(kind="RectangularBlock", p=0, q=1)
    with pytest.raises(ValueError, match="schema"):
        ModelSpec.from_dict({"kind": "RectangularBlock", "p": 2, "q": 1})
    with pytest.raises(ValueError, match="unknown"):
        ModelSpec.from_dict({"schema": "skms-model/1", "kind": "RectangularBlock",
                             "p": 2, "q": 1, "extra": True})


def test_model_digest_is_canonical():
    a = ModelSpec(kind="RectangularBlock", p=3, q=2, seed=1)
    b = ModelSpec(kind="RectangularBlock", p=3, q=2, seed=2)
    assert len(model_digest(a)) == 16
    assert model_digest(a) != model_digest(b)
    assert int(model_digest(a), 16) >= 0  # hex


def test_build_rectangular_block():
    sys_, pert = build_model(BLOCK_SPEC)
    assert pert is None
    assert sys_.dim == 5
    assert sys_.witten_index == pytest.approx(1.0, abs=1e-10)
    # explicit block is honored verbatim
    m = np.array([[1.0, 0.0, 2.0], [0.0, 1.5, 0.0]]) + 0j
    spec = ModelSpec(kind="RectangularBlock", p=3, q=2,
                     m=tuple(tuple(tuple(p_) for p_ in row)
                             for row in matrix_to_json(m)))
    sys2, _ = build_model(spec)
    np.testing.assert_allclose(sys2.supercharge[3:, :3], m, atol=1e-15)
    # scale pins the supercharge norm
    spec3 = ModelSpec(kind="RectangularBlock", p=3, q=2, seed=5, scale=0.6)
    sys3, _ = build_model(spec3)
    assert np.linalg.norm(sys3.supercharge, 2) == pytest.approx(0.6, rel=1e-12)
    with pytest.raises(ZeroWittenIndex):
        build_model(ModelSpec(kind="RectangularBlock", p=2, q=2))


def test_build_random_graded():
    spec = ModelSpec(kind="RandomGraded", p=3, q=2, seed=1, scale=0.6)
    sys_, _ = build_model(spec)
    assert abs(sys_.witten_index) >= 1e-8
    sys_b, _ = build_model(spec)
    np.testing.assert_array_equal(sys_.supercharge, sys_b.supercharge)


def test_build_perturbation_paths():
    spec = ModelSpec(kind="RectangularBlock", p=3, q=2, seed=1,
                     perturbation={"seed": 3, "scale": 0.4})
    sys_, pert = build_model(spec)
    assert pert is not None
    assert pert.norm == pytest.approx(0.4, rel=1e-12)
    again = build_model(spec)[1]
    np.testing.assert_array_equal(pert.matrix, again.matrix)

    odd = np.zeros((5, 5), dtype=complex)
    odd[0, 3] = 1.0 - 2j
    odd[3, 0] = 1.0 + 2j
    spec_e = ModelSpec(kind="RectangularBlock", p=3, q=2, seed=1,
                       perturbation={"entries": matrix_to_json(odd)})
    pert_e = build_model(spec_e)[1]
    np.testing.assert_allclose(pert_e.matrix, odd, atol=1e-15)

    with pytest.raises(ParityViolation):
        build_model(ModelSpec(
            kind="RectangularBlock", p=3, q=2, seed=1,
            perturbation={"entries": matrix_to_json(np.eye(5))}))
    with pytest.raises(ValueError, match="'entries' or 'seed'"):
        build_model(ModelSpec(kind="RectangularBlock", p=3, q=2, seed=1,
                              perturbation={"scale": 0.5}))


# ---------------------------------------------------------------------------
# report serialization


def sample_reports():
    return [
        make_report("a.first", "S0", 10, 1e-12, 1e-10, seed=3, model_digest="d1"),
        make_report("b.second", "main", 5, 2.0, 1e-10, seed=3, model_digest="d1"),
    ]


def test_report_row_order_matches_csv_columns():
    row = report_row(sample_reports()[0])
    assert tuple(row.keys()) == CSV_COLUMNS


def test_json_text_schema_and_round_trip():
    text = to_json_text(sample_reports())
    assert text.endswith("\n")
    doc = json.loads(text)
    assert doc["schema"] == "skms-report/1"
    assert [r["identity_name"] for r in doc["reports"]] == ["a.first", "b.second"]
    assert doc["reports"][0]["passed"] is True
    assert doc["reports"][1]["passed"] is False


def test_csv_text_layout():
    lines = to_csv_text(sample_reports()).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    first = lines[1].split(",")
    assert first[0] == "a.first"
    assert first[5] == "true"
    assert lines[2].split(",")[5] == "false"
    # floats use round-trip repr
    assert first[3] == repr(1e-12)


def test_emit_report_writes_and_validates(tmp_path):
    path = tmp_path / "out.csv"
    text = emit_report(sample_reports(), format="csv", path=str(path))
    assert path.read_text() == text
    with pytest.raises(ValueError):
        emit_report(sample_reports(), format="xml")


def test_emit_report_deterministic_bytes():
    a = emit_report(sample_reports(), format="json")
    b = emit_report(sample_reports(), format="json")
    assert a.encode() == b.encode()


# ---------------------------------------------------------------------------
# suites


def test_parse_quadrature():
    assert parse_quadrature("gauss:8") == ("gauss", 8)
    assert parse_quadrature("mc:20000") == ("mc", 20000)
    with pytest.raises(ValueError):
        parse_quadrature("simpson:4")
    with pytest.raises(ValueError):
        parse_quadrature("gauss")


def test_axioms_suite_passes():
    rows = run_suite(BLOCK_SPEC, "Axioms")
    assert all(r.passed for r in rows)
    digest = model_digest(BLOCK_SPEC)
    assert all(r.model_digest == digest for r in rows)


def test_suite_name_is_case_insensitive_and_validated():
    a = run_suite(BLOCK_SPEC, "axioms")
    b = run_suite(BLOCK_SPEC, "Axioms")
    assert a == b
    with pytest.raises(ValueError, match="unknown suite"):
        run_suite(BLOCK_SPEC, "everything")


def test_cocycle_suite_passes():
    rows = run_suite(BLOCK_SPEC, "Cocycle", SuiteConfig(max_degree=3))
    names = [r.identity_name for r in rows]
    assert "tau.normalization" in names
    assert "tau.degeneracy" in names
    assert "cocycle.boundary_n1" in names and "cocycle.boundary_n3" in names
    assert all(r.passed for r in rows), [(r.identity_name, r.max_residual)
                                         for r in rows if not r.passed]


def test_parallel_jobs_preserve_rows():
    serial = run_suite(BLOCK_SPEC, "Lemma34", SuiteConfig(jobs=1))
    parallel = run_suite(BLOCK_SPEC, "Lemma34", SuiteConfig(jobs=4))
    assert serial == parallel


def test_budget_exhaustion_reported_not_fatal(monkeypatch):
    monkeypatch.setenv("SKMS_CHAIN_BUDGET", "20")
    rows = run_suite(BLOCK_SPEC, "Cocycle", SuiteConfig(max_degree=3))
    sentinels = [r for r in rows if r.max_residual == BUDGET_SENTINEL]
    assert sentinels, "expected budget-limited rows"
    assert all(not r.passed for r in sentinels)


def test_timing_flag_populates_wall_ms():
    rows = run_suite(BLOCK_SPEC, "Axioms", SuiteConfig(timing=True))
    assert all(r.wall_ms > 0.0 for r in rows)
    rows_plain = run_suite(BLOCK_SPEC, "Axioms")
    assert all(r.wall_ms == 0.0 for r in rows_plain)


def test_suite_bytes_are_reproducible():
    a = emit_report(run_suite(BLOCK_SPEC, "Perturbation"), format="csv")
    b = emit_report(run_suite(BLOCK_SPEC, "Perturbation"), format="csv")
    assert a.encode() == b.encode()


# ---------------------------------------------------------------------------
# command line


def write_spec(tmp_path, spec=BLOCK_SPEC):
    path = tmp_path / "model.json"
    path.write_text(spec.to_json())
    return str(path)


def test_cli_model_gen_and_validate(tmp_path, capsys):
    out = tmp_path / "gen.json"
    rc = main(["model", "gen", "--p", "3", "--q", "2", "--seed", "1",
               "--out", str(out)])
    assert rc == 0
    spec = ModelSpec.from_json(out.read_text())
    assert spec.p == 3 and spec.q == 2

    rc = main(["model", "validate", str(out)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["digest"] == model_digest(spec)
    assert info["dim"] == 5
    assert info["has_perturbation"] is False


def test_cli_model_gen_with_perturbation(tmp_path, capsys):
    out = tmp_path / "gen.json"
    rc = main(["model", "gen", "--p", "3", "--q", "2", "--perturb-seed", "4",
               "--perturb-scale", "0.3", "--out", str(out)])
    assert rc == 0
    rc = main(["model", "validate", str(out)])
    info = json.loads(capsys.readouterr().out)
    assert info["has_perturbation"] is True


def test_cli_verify_exit_codes(tmp_path, capsys):
    model = write_spec(tmp_path)
    out = tmp_path / "rep.csv"
    rc = main(["verify", "Axioms", "--model", model, "--format", "csv",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert all(line.split(",")[5] == "true" for line in lines[1:])
    capsys.readouterr()

    # an unnormalized draw grows too fast for the decay diagnostic; the
    # suite must report that honestly and exit nonzero
    failing = write_spec(
        tmp_path, ModelSpec(kind="RectangularBlock", p=3, q=2, seed=7))
    rc = main(["verify", "Entireness", "--model", failing])
    assert rc == 1
    doc = json.loads(capsys.readouterr().out)
    failed = [r for r in doc["reports"] if not r["passed"]]
    assert [r["identity_name"] for r in failed] == ["entireness.monotone"]


def test_cli_verify_stdout_default(tmp_path, capsys):
    model = write_spec(tmp_path)
    rc = main(["verify", "Lemma34", "--model", model])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema"] == "skms-report/1"
    assert {r["identity_name"] for r in doc["reports"]} == {
        "chain.rotation", "chain.slot_derivative"}


def test_cli_tau_eval_dual_route(tmp_path, capsys):
    model = write_spec(tmp_path)
    rc = main(["tau", "eval", "--model", model, "--degree", "2",
               "--tuples", "2", "--quadrature", "mc:4000"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema"] == "skms-tau/1"
    assert len(doc["evaluations"]) == 2
    for entry in doc["evaluations"]:
        val = complex(*entry["value"])
        est = complex(*entry["estimate"])
        assert abs(val - est) <= 5 * entry["quadrature_error"]


def test_cli_tau_eval_odd_degree(tmp_path, capsys):
    model = write_spec(tmp_path)
    rc = main(["tau", "eval", "--model", model, "--degree", "1",
               "--quadrature", "gauss:6"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    entry = doc["evaluations"][0]
    assert entry["value"] == [0.0, 0.0]
    assert "estimate" not in entry  # quadrature route is even-degree only


def test_cli_homotopy_check(tmp_path, capsys):
    model = write_spec(tmp_path)
    rc = main(["homotopy", "check", "--model", model, "--degree", "2"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    names = [r["identity_name"] for r in doc["reports"]]
    assert names == [
        "transgression.orientation",
        "transgression.derivative",
        "transgression.derivative_order",
        "transgression.endpoint",
    ]


def test_cli_perturb_sweep(tmp_path, capsys):
    model = write_spec(tmp_path)
    rc = main(["perturb", "sweep", "--model", model, "--grid", "5"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    names = [r["identity_name"] for r in doc["reports"]]
    assert "witten.invariance" in names
    assert "alpha_r.lipschitz_in_r" in names
    assert any(n.endswith("@r=0.5") for n in names)
    assert all(r["passed"] for r in doc["reports"])
