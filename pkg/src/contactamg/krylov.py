"""Right-preconditioned restarted GMRES on merged block vectors.

Modified Gram-Schmidt Arnoldi with Givens rotations; with right
preconditioning the recurrence tracks the true residual of the original
system, and the true residual is still recomputed at restarts and at
convergence before the solve is declared done.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_BREAKDOWN = 1e-14


@dataclass(frozen=True)
class GmresConfig:
    rel_tol: float = 1e-8
    max_iters: int = 500
    restart: int = 100

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ConfigError("rel_tol must lie in (0, 1)")
        if self.restart < 1:
            raise ConfigError("restart must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0


def gmres(apply_A, apply_Minv, b, cfg: GmresConfig):
    """Solve A x = b with x0 = 0; apply_Minv must be a fixed linear operator.

    Returns (x, SolveReport); report.residual_history holds the Givens-based
    residual estimates per iteration starting at ||b||.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=np.float64)
    n = len(b)
    report = SolveReport()

    norm_b = np.linalg.norm(b)
    report.residual_history.append(norm_b)
    if norm_b == 0.0:
        report.converged = True
        report.solve_seconds = time.perf_counter() - t0
        return np.zeros(n), report
    target = cfg.rel_tol * norm_b

    x = np.zeros(n)
    total_iters = 0
    converged = False

    while total_iters < cfg.max_iters and not converged:
        r = b - apply_A(x)
        beta = np.linalg.norm(r)
        if beta <= target:
            converged = True
            break
        m = min(cfg.restart, cfg.max_iters - total_iters)
        V = np.zeros((n, m + 1))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[:, 0] = r / beta

        j_used = 0
        for j in range(m):
            w = apply_A(apply_Minv(V[:, j]))
            for i in range(j + 1):  # modified Gram-Schmidt
                H[i, j] = np.dot(V[:, i], w)
                w -= H[i, j] * V[:, i]
            for i in range(j + 1):  # one reorthogonalization pass keeps the
                corr = np.dot(V[:, i], w)  # basis orthonormal past convergence
                w -= corr * V[:, i]
                H[i, j] += corr
            H[j + 1, j] = np.linalg.norm(w)
            happy = H[j + 1, j] <= _BREAKDOWN * max(1.0, abs(H[j, j]))
            if not happy:
                V[:, j + 1] = w / H[j + 1, j]

            for i in range(j):  # apply accumulated rotations to the new column
                h0 = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = h0
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            total_iters += 1
            j_used = j + 1
            est = abs(g[j + 1])
            report.residual_history.append(est)
            if happy or est <= target or total_iters >= cfg.max_iters:
                break

        y = np.zeros(j_used)
        for i in range(j_used - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1 : j_used] @ y[i + 1 : j_used]) / H[i, i]
        x = x + apply_Minv(V[:, :j_used] @ y)

        true_res = np.linalg.norm(b - apply_A(x))
        if true_res <= target:
            converged = True

    report.iterations = total_iters
    report.converged = converged
    report.solve_seconds = time.perf_counter() - t0
    return x, report
