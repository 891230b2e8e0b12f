"""Finite-difference audit of the loss gradients through the whole net.

Backpropagated gradients of the composite loss (or one of its terms) are
compared against central differences at a random subset of parameters, in
64-bit precision on a deliberately tiny net. The net runs in eval mode so
the loss is a pure function of the parameters (fixed normalization
statistics, dropout inert); the config must still declare dropout 0 so
nobody mistakes the check for covering it.

The absolute-value terms are only piecewise differentiable, so the report
carries the smallest |residual| seen in each L1 term; the check demands
them to sit above 1e-3, far beyond the finite-difference step.

Relative error uses a small denominator floor (atol/rtol convention):
rel = |a - n| / max(|a|, |n|, denom_floor). Central differences on a loss
of magnitude 1e2..1e5 cannot resolve derivatives much below 1e-9, so
coordinates whose true gradient sits near zero would otherwise fail on
pure finite-difference noise; with the floor, a wrong gradient on such a
coordinate still fails once the disagreement exceeds tol * denom_floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import ParameterError
from .loss import DEFAULT_WEIGHTS, ssim
from .model import NetConfig, VDUnet

__all__ = ["GradCheckReport", "grad_check"]

_TERMS = ("composite", "ssim", "l1")
_L1_MARGIN = 1e-3


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of one audit; `worst` rows are (name, index, analytic,
    numeric, rel_err), sorted from worst down."""

    passed: bool
    term: str
    n_checked: int
    max_rel_err: float
    tol: float
    min_fidelity_margin: float
    min_residual_margin: float
    worst: tuple[tuple[str, int, float, float, float], ...]

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        lines = [
            f"[{state}] {self.term}: max rel err {self.max_rel_err:.3e} over "
            f"{self.n_checked} parameters (tol {self.tol:g}); L1 margins "
            f"{self.min_fidelity_margin:.3e} / {self.min_residual_margin:.3e}"
        ]
        if not self.passed:
            lines.append("worst offenders:")
            for name, idx, ana, num, rel in self.worst:
                lines.append(
                    f"  {name}[{idx}]: analytic {ana:.6e}, numeric {num:.6e}, "
                    f"rel {rel:.3e}"
                )
        return "\n".join(lines)


def grad_check(net_cfg: NetConfig, *, bands: int = 3, spatial: int = 16,
               n_params: int = 120, seed: int = 0, term: str = "composite",
               tol: float = 1e-4, h_rel: float = 1e-4,
               denom_floor: float = 1e-5) -> GradCheckReport:
    """Audit `n_params` randomly chosen parameters; see the module docstring."""
    if term not in _TERMS:
        raise ParameterError(f"term must be one of {_TERMS}, got {term!r}")
    if net_cfg.base_channels > 4:
        raise ParameterError(
            f"gradient audit wants a tiny net (base_channels <= 4), got "
            f"{net_cfg.base_channels}"
        )
    if net_cfg.dropout != 0.0:
        raise ParameterError("gradient audit requires dropout 0")
    if n_params < 1:
        raise ParameterError(f"n_params must be >= 1, got {n_params}")
    step = 2 ** net_cfg.depth
    if spatial % step or spatial < 11:
        raise ParameterError(
            f"spatial must be >= 11 and divisible by 2^depth = {step}, got {spatial}"
        )
    if not (math.isfinite(h_rel) and h_rel > 0):
        raise ParameterError(f"h_rel must be finite and > 0, got {h_rel!r}")
    if not (math.isfinite(denom_floor) and denom_floor > 0):
        raise ParameterError(
            f"denom_floor must be finite and > 0, got {denom_floor!r}"
        )

    torch.manual_seed(seed)
    net = VDUnet(net_cfg, bands=bands).double().eval()

    rows = (2 * spatial) ** 2
    cols = bands * spatial * spatial
    frame = torch.rand(2 * spatial, 2 * spatial, dtype=torch.float64)
    estimate = torch.rand(bands, spatial, spatial, dtype=torch.float64)
    # Reference well above the (near-zero-initialized) net output, and a
    # measurement offset past the predicted frame: both L1 residuals stay
    # far from their kinks.
    ref = torch.rand(bands, spatial, spatial, dtype=torch.float64) + 2.0
    phi = torch.rand(rows, cols, dtype=torch.float64) / cols
    y_meas = (phi @ ref.reshape(-1) + 1.0).reshape(2 * spatial, 2 * spatial)
    alpha, beta, gamma = DEFAULT_WEIGHTS

    def loss_value() -> torch.Tensor:
        out = net(frame, estimate)
        fidelity = (ref - out).abs().sum()
        residual = (y_meas.reshape(-1) - phi @ out.reshape(-1)).abs().sum()
        structure = 1.0 - ssim(ref[None], out[None])[0]
        if term == "ssim":
            return gamma * structure
        if term == "l1":
            return alpha * fidelity + beta * residual
        return alpha * fidelity + beta * residual + gamma * structure

    net.zero_grad()
    loss_value().backward()
    named = [(name, p) for name, p in net.named_parameters()]

    with torch.no_grad():
        out0 = net(frame, estimate)
        fid_margin = float((ref - out0).abs().min())
        res_margin = float((y_meas.reshape(-1) - phi @ out0.reshape(-1)).abs().min())
        if min(fid_margin, res_margin) <= _L1_MARGIN:
            raise ParameterError(
                f"L1 residual margin {min(fid_margin, res_margin):.3e} too "
                f"close to a kink; pick another seed"
            )

        sizes = [p.numel() for _, p in named]
        total = sum(sizes)
        gen = torch.Generator().manual_seed(seed + 1)
        flat_picks = sorted(torch.randperm(total, generator=gen)[:n_params].tolist())

        rows_out = []
        for flat in flat_picks:
            slot, offset = 0, flat
            while offset >= sizes[slot]:
                offset -= sizes[slot]
                slot += 1
            name, p = named[slot]
            grad = p.grad
            analytic = 0.0 if grad is None else float(grad.view(-1)[offset])
            flat_param = p.data.view(-1)
            original = float(flat_param[offset])
            h = h_rel * max(1.0, abs(original))
            flat_param[offset] = original + h
            f_plus = float(loss_value())
            flat_param[offset] = original - h
            f_minus = float(loss_value())
            flat_param[offset] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric),
                                                denom_floor)
            rows_out.append((name, offset, analytic, numeric, rel))

    rows_out.sort(key=lambda r: r[4], reverse=True)
    max_rel = rows_out[0][4]
    return GradCheckReport(
        passed=max_rel < tol,
        term=term,
        n_checked=len(rows_out),
        max_rel_err=max_rel,
        tol=tol,
        min_fidelity_margin=fid_margin,
        min_residual_margin=res_margin,
        worst=tuple(rows_out[:10]),
    )
