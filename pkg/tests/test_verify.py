import numpy as np
import pytest

from dgode import verify


@pytest.fixture(scope="module")
def instances():
    return verify.random_instances(20, seed=3)


def test_instance_ranges(instances):
    for inst in instances:
        n, d = inst.e.shape
        assert 2 <= n <= 12 and 1 <= d <= 8
        assert np.allclose(inst.a_hat, inst.a_hat.T) and np.allclose(inst.w, inst.w.T)
        assert 0.05 < inst.a_vals.min() and inst.a_vals.max() <= 1 + 1e-12
        assert 0.05 < inst.w_vals.min() and inst.w_vals.max() < 1


def test_instances_reproducible():
    a, b = verify.random_instances(3, seed=9), verify.random_instances(3, seed=9)
    assert all(np.array_equal(x.e, y.e) and np.array_equal(x.a_hat, y.a_hat) for x, y in zip(a, b))


def test_quadrature_scalar_case():
    inst = verify.make_instance(np.array([[0.5]]), np.array([[0.25]]), np.array([[2.0]]))
    r = np.log(0.125)
    want = 2.0 * (np.exp(3 * r) - 1) / r
    assert verify.quadrature(inst, 3.0)[0, 0] == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("name", [n for n in verify.CHECKS if n != "gradients"])
def test_checks_pass_on_another_seed(name):
    (res,) = verify.run_suite(seed=17, count=15, only=[name])
    assert res.passed, res.line()


def test_fault_is_detected_only_by_solver_checks():
    results = {r.name: r for r in verify.run_suite(seed=1, count=10, fault_inject=True,
                                                   only=["oracle_triangle", "linearity"])}
    assert not results["oracle_triangle"].passed
    assert results["linearity"].passed


def test_manifest_covers_all_operations():
    assert verify.coverage_gaps() == []
    assert "loss" in verify.coverage_gaps(["oracle_triangle"])


def test_report_only_check_never_fails():
    (res,) = verify.run_suite(count=5, only=["literal_form_deviation"])
    assert res.passed and res.report_only and res.line().startswith("INFO")


def test_result_line_format():
    r = verify.CheckResult("x", False, 0.5, 1e-3, "detail", seconds=0.25)
    assert r.line() == "FAIL x                        residual=5.000e-01 tol=1e-03  detail  (0.25s)"
