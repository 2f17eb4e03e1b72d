"""One test per acceptance criterion; each prints a PASS/FAIL line with the measured value."""

from lsam import verify


def _assert(result, report, limit_s=None):
    report(result.line())
    assert result.passed, result.line()
    if limit_s is not None:
        assert result.seconds < limit_s, f"{result.name} took {result.seconds:.1f}s, limit {limit_s}s"


def test_c01_gradient_correctness(report):
    _assert(verify.check_gradients(), report, 5)


def test_c02_density_validity(report):
    _assert(verify.check_densities(), report, 30)


def test_c03_score_identity(report):
    _assert(verify.check_score(), report, 120)


def test_c04_esgd_rate(report):
    _assert(verify.check_rate_esgd(), report, 60)


def test_c05_constant_rho_neighbourhood(report):
    _assert(verify.check_rate_constant_rho(), report, 120)


def test_c06_decaying_rho_vanishing(report):
    _assert(verify.check_rate_decaying_rho(), report, 180)


def test_c07_anchor_gap(report):
    # shares the runs of the two rate criteria; build them outside the timed check
    verify.esgd_run()
    verify.decaying_run()
    _assert(verify.check_anchor_gap(), report, 60)


def test_c08_gradient_split_identity(report):
    verify.esgd_run()
    verify.decaying_run()
    verify.constant_runs()
    labels = verify.logged_runs()
    if not any(l.startswith("dist-") for l in labels):
        verify.protocol_run("round-robin")
    if "equivalence" not in labels:
        verify.check_equivalence()
    if "pathwise" not in labels:
        verify.pathwise_gap(verify._quad(0.0), verify.esgd_schedule(), verify.QUAD_X0, 10_000)
    _assert(verify.check_gradient_split(), report)


def test_c09_protocol_conformance(report):
    _assert(verify.check_protocol(), report, 30)


def test_c10_single_chain_equivalence(report):
    _assert(verify.check_equivalence(), report, 10)


def test_c11_basin_selection(report):
    result = verify.check_basins()
    _assert(result, report, 300)
    report(verify.basin_result().table())
