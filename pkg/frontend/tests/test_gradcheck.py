"""Finite-difference audit of the analytic gradients."""

import pytest

from vdunet import GradCheckReport, NetConfig, ParameterError, grad_check

TINY = NetConfig(base_channels=4, depth=2, dense_layers_per_block=2,
                 dropout=0.0, growth_rate=4)


@pytest.mark.parametrize("term", ["l1", "ssim", "composite"])
def test_each_loss_term_passes_the_audit(term):
    report = grad_check(TINY, term=term, n_params=120, seed=0)
    assert isinstance(report, GradCheckReport)
    assert report.passed, report.summary()
    assert report.term == term
    assert report.n_checked >= 100
    assert report.max_rel_err < report.tol
    assert report.min_fidelity_margin > 1e-3
    assert report.min_residual_margin > 1e-3


def test_summary_reports_the_verdict():
    report = grad_check(TINY, term="l1", n_params=30, seed=0)
    text = report.summary()
    assert "PASS" in text
    assert "30 parameters" in text


def test_coarse_step_size_fails_the_audit():
    # A huge step makes central differences inaccurate; the audit must
    # notice rather than absorb it.
    report = grad_check(TINY, term="composite", n_params=60, seed=0,
                        h_rel=0.5)
    assert not report.passed
    assert report.max_rel_err > report.tol
    assert len(report.worst) > 0
    assert "FAIL" in report.summary()
    name, index, analytic, numeric, rel = report.worst[0]
    assert rel == report.max_rel_err


def test_audit_rejects_unsuitable_setups():
    with pytest.raises(ParameterError):
        grad_check(TINY, term="everything")
    with pytest.raises(ParameterError):
        grad_check(NetConfig(base_channels=8, depth=2,
                             dense_layers_per_block=2, dropout=0.0,
                             growth_rate=4))
    with pytest.raises(ParameterError):
        grad_check(NetConfig(base_channels=4, depth=2,
                             dense_layers_per_block=2, dropout=0.1,
                             growth_rate=4))
    with pytest.raises(ParameterError):
        grad_check(TINY, n_params=0)
    with pytest.raises(ParameterError):
        grad_check(TINY, spatial=10)
    with pytest.raises(ParameterError):
        grad_check(TINY, spatial=18)
    with pytest.raises(ParameterError):
        grad_check(TINY, h_rel=0.0)
    with pytest.raises(ParameterError):
        grad_check(TINY, denom_floor=0.0)


def test_audit_is_seed_deterministic():
    a = grad_check(TINY, term="l1", n_params=40, seed=3)
    b = grad_check(TINY, term="l1", n_params=40, seed=3)
    assert a.max_rel_err == b.max_rel_err
    assert a.worst == b.worst
