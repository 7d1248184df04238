"""Central finite-difference oracle for verifying analytic gradients.

The oracle re-evaluates the loss from scratch for every perturbed coordinate,
so it is independent of the reverse-mode path it checks.  Coordinates whose
finite-difference estimate is unstable under a smaller step (a kink of ReLU
or max) are excluded and reported as skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckResult:
    max_rel_err: float
    n_checked: int
    n_skipped: int

    def ok(self, tol: float) -> bool:
        return self.n_checked > 0 and self.max_rel_err < tol


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def check_gradients(make_loss, tensors, h: float = 1e-6, kink_tol: float = 1e-3) -> GradCheckResult:
    """Compare reverse-mode gradients of ``make_loss()`` against central differences.

    ``make_loss`` must rebuild the scalar loss from the current ``.data`` of the
    given tensors on every call (and must be deterministic).  Tensors should be
    float64 for meaningful tolerances.
    """
    tensors = list(tensors)
    for t in tensors:
        t.zero_grad()
    loss = make_loss()
    loss.backward()
    analytic = [None if t.grad is None else t.grad.copy() for t in tensors]

    max_err = 0.0
    checked = 0
    skipped = 0
    for t, grad in zip(tensors, analytic):
        if grad is None:
            grad = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = make_loss().item()
            flat[i] = orig - h
            f_minus = make_loss().item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            err = _rel_err(gflat[i], fd)
            if err > kink_tol:
                # probe with a smaller step: an unstable estimate means the
                # perturbation straddles a non-differentiable point
                h2 = h / 8.0
                flat[i] = orig + h2
                f_plus2 = make_loss().item()
                flat[i] = orig - h2
                f_minus2 = make_loss().item()
                flat[i] = orig
                fd2 = (f_plus2 - f_minus2) / (2.0 * h2)
                if _rel_err(fd, fd2) > kink_tol:
                    skipped += 1
                    continue
                err = min(err, _rel_err(gflat[i], fd2))
            checked += 1
            max_err = max(max_err, err)
    return GradCheckResult(max_err, checked, skipped)


def as_check_tensors(*arrays) -> list[Tensor]:
    """Wrap float64 copies of arrays as grad-requiring tensors."""
    return [Tensor(np.asarray(a, dtype=np.float64), requires_grad=True) for a in arrays]
