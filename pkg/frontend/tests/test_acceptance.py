"""Acceptance suite: one test per shipped guarantee, one printed line each.

Run with `pytest tests/test_acceptance.py -s` to see the [PASS]/[FAIL] lines
and measured margins. Each test also asserts its own wall-clock budget.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import torch

from vdunet import (
    Cube,
    DEFAULT_WEIGHTS,
    NetConfig,
    TrainConfig,
    VDUnet,
    composite_loss,
    depth_to_space,
    grad_check,
    read_cube,
    read_detector,
    read_matrix,
    space_to_depth,
    train,
    write_cube,
)
from vdunet.cli import _scan_data_dir
from helpers import run_giscsim

TINY = NetConfig(base_channels=4, depth=2, dense_layers_per_block=2,
                 dropout=0.0, growth_rate=4)


@contextmanager
def criterion(name, budget_s):
    rec = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield rec
    except Exception:
        print(f"\n[FAIL] {name}")
        raise
    wall = time.perf_counter() - t0
    ok = wall <= budget_s
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {rec['detail']} "
          f"[{wall:.2f}s / {budget_s:g}s budget]")
    assert ok, f"{name}: runtime {wall:.2f}s exceeds {budget_s}s budget"


def base_cfg(data_dir, **kw):
    base = _scan_data_dir(str(data_dir))
    return TrainConfig(matrix=base.matrix, scenes=base.scenes,
                       measurements=base.measurements,
                       dgi_inputs=base.dgi_inputs, **kw)


def test_forward_contract_and_fold_inverse():
    with criterion("full-size forward shape and fold round trip", 120) as rec:
        rng = np.random.default_rng(0)
        frame = rng.random((256, 256))
        estimate = rng.random((15, 128, 128))
        net = VDUnet(NetConfig(), bands=15).eval()
        with torch.no_grad():
            out = net(frame, estimate)
        assert tuple(out.shape) == (15, 128, 128)
        assert torch.isfinite(out).all()
        folded = space_to_depth(frame)
        assert folded.shape == (4, 128, 128)
        assert np.array_equal(depth_to_space(folded), frame)
        rec["detail"] = ("(256,256)+(15,128,128) -> (15,128,128) finite; "
                         "fold round trip bit exact")


def test_gradient_audit():
    with criterion("finite-difference gradient audit", 300) as rec:
        report = grad_check(TINY, term="composite", n_params=120, seed=0,
                            tol=1e-4)
        assert report.passed, report.summary()
        assert report.n_checked >= 100
        assert report.min_fidelity_margin > 1e-3
        assert report.min_residual_margin > 1e-3
        rec["detail"] = (f"max rel err {report.max_rel_err:.2e} over "
                         f"{report.n_checked} params (tol 1e-4)")


def test_single_sample_overfit_and_score_crosscheck(one_sample_dir, tmp_path):
    with criterion("1-sample overfit and cross-package score", 180) as rec:
        cfg = base_cfg(one_sample_dir, epochs=500, batch_size=1, lr=3e-3,
                       seed=1)
        result = train(cfg, TINY, tmp_path / "run")
        ratio = result.loss_curve[-1] / result.loss_curve[0]
        assert ratio < 0.05, f"final/initial loss ratio {ratio:.4f} >= 5%"

        frame = read_detector(one_sample_dir / "s000.meas.gsd1")
        estimate = read_cube(one_sample_dir / "s000.dgi.gsc1")
        net = result.net.eval()
        with torch.no_grad():
            out = net(frame.data, estimate.data)
        rec_path = tmp_path / "rec.gsc1"
        # Clamp like the export path: cube files hold physical intensities.
        write_cube(rec_path, Cube(wavelengths=estimate.wavelengths,
                                  data=out.double().clamp(min=0.0).numpy()))

        report_path = tmp_path / "report.json"
        run_giscsim("eval", "--ref", one_sample_dir / "s000.scene.gsc1",
                    "--rec", rec_path,
                    "--matrix", one_sample_dir / "matrix.gsm1",
                    "--meas", one_sample_dir / "s000.meas.gsd1",
                    "--out", report_path)
        theirs = json.loads(report_path.read_text())["loss"]

        ref = read_cube(one_sample_dir / "s000.scene.gsc1")
        phi = read_matrix(one_sample_dir / "matrix.gsm1")
        scored = read_cube(rec_path)
        ours = float(composite_loss(
            torch.as_tensor(ref.data)[None],
            torch.as_tensor(scored.data)[None],
            torch.as_tensor(frame.data)[None],
            torch.as_tensor(phi.data), DEFAULT_WEIGHTS)[0])
        rel = abs(ours - theirs) / abs(theirs)
        assert rel < 1e-5, f"score disagreement {rel:.2e}"
        rec["detail"] = (f"loss ratio {ratio:.4f} after 500 epochs; "
                         f"score agreement {rel:.2e}")


def test_twenty_sample_training_halves_the_loss(twenty_sample_dir, tmp_path):
    with criterion("20-sample loss halving", 180) as rec:
        cfg = base_cfg(twenty_sample_dir, epochs=200, batch_size=4, lr=1e-2,
                       seed=0)
        result = train(cfg, TINY, tmp_path / "run")
        curve = result.loss_curve
        below = np.nonzero(curve < 0.5 * curve[0])[0]
        assert below.size > 0, "loss never halved within 200 epochs"
        rec["detail"] = (f"halved at epoch {below[0] + 1}/200, final ratio "
                         f"{curve[-1] / curve[0]:.4f}")
