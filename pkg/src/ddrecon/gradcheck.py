"""Finite-difference verification of tape gradients."""

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tape, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple = ()  # (param index, flat element index)
    n_checked: int = 0
    failures: list = field(default_factory=list)

    def passed(self, tolerance):
        return self.max_rel_error < tolerance


def grad_check(forward, params, h=1e-5, tolerance=1e-4):
    """Compare analytic gradients of ``forward()`` against central differences.

    ``forward`` must be a deterministic zero-argument callable returning a
    scalar loss tensor built from ``params``. Every element of every
    parameter is perturbed by +/-h; failures above ``tolerance`` are
    collected rather than raised.
    """
    with Tape() as tape:
        loss = forward()
        backward(loss, tape)
    analytic = []
    for p in params:
        if p.grad is None:
            analytic.append(np.zeros_like(p.data))
        else:
            analytic.append(p.grad.copy())
        p.grad = None

    report = GradCheckReport(max_rel_error=0.0)
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        aflat = analytic[pi].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            f_plus = forward().item()
            flat[j] = orig - h
            f_minus = forward().item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = aflat[j]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            report.n_checked += 1
            if rel > report.max_rel_error:
                report.max_rel_error = rel
                report.worst = (pi, j)
            if rel > tolerance:
                report.failures.append((pi, j, a, numeric, rel))
    return report
