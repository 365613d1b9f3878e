"""Unrestarted GMRES with right preconditioning.

Orthogonalization is modified Gram-Schmidt; the least-squares problem is
carried by Givens rotations, so the recurrence residual is available at
every step without forming the iterate.  With right preconditioning that
recurrence value estimates the residual of the original (unpreconditioned)
system, and a final true-residual recomputation guards the exit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveReport:
    """Outcome of one GMRES solve."""

    iterations: int
    residual_history: list
    converged: bool
    achieved_rtol: float
    wall_time: float


class SolveFailure(Exception):
    """GMRES hit its iteration cap; carries the report and best iterate."""

    def __init__(self, message, report, best=None):
        super().__init__(message)
        self.report = report
        self.best = best


def _as_matvec(op):
    return op.matvec if hasattr(op, "matvec") else op


def gmres(op, pc, b, rtol=1e-5, maxit=2000):
    """Solve op(x) = b with right-preconditioned unrestarted GMRES.

    Parameters
    ----------
    op : object with ``matvec`` or callable
        The square system operator.
    pc : object with ``apply`` or None
        Fixed linear preconditioner applied on the right; None for identity.
    b : ndarray
    rtol : float
        Relative tolerance on the residual norm, in (0, 1).
    maxit : int
        Hard cap on the Krylov dimension (unrestarted).

    Returns ``(x, SolveReport)``.  The initial guess is always zero, so the
    initial residual is ``b`` itself; a zero right-hand side returns
    immediately with the zero solution.
    """
    if not 0.0 < rtol < 1.0:
        raise ValueError("rtol must lie in (0, 1)")
    t0 = time.perf_counter()
    matvec = _as_matvec(op)
    apply_pc = pc.apply if pc is not None else (lambda r: r)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]

    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        report = SolveReport(0, [0.0], True, 0.0, time.perf_counter() - t0)
        return np.zeros(n), report

    history = [beta]
    basis = [b / beta]
    cols = []                   # rotated Hessenberg columns (upper triangle)
    cs, sn = [], []             # Givens rotation pairs
    g = [beta]                  # rotated right-hand side
    target = rtol * beta
    resid = beta
    breakdown = False

    def extract(m):
        y = np.zeros(m)
        for i in range(m - 1, -1, -1):
            y[i] = (g[i] - sum(cols[j][i] * y[j] for j in range(i + 1, m))) \
                / cols[i][i]
        v = sum(y[j] * basis[j] for j in range(m))
        return apply_pc(v)

    j = 0
    x = np.zeros(n)
    true_resid = beta
    while j < maxit:
        w = matvec(apply_pc(basis[j]))
        h = np.empty(j + 2)
        for i in range(j + 1):
            h[i] = basis[i] @ w
            w -= h[i] * basis[i]
        h[j + 1] = np.linalg.norm(w)
        if h[j + 1] > 0.0:
            basis.append(w / h[j + 1])
        else:
            breakdown = True

        for i in range(j):
            h[i], h[i + 1] = (cs[i] * h[i] + sn[i] * h[i + 1],
                              -sn[i] * h[i] + cs[i] * h[i + 1])
        denom = float(np.hypot(h[j], h[j + 1]))
        c, s = (1.0, 0.0) if denom == 0.0 else (h[j] / denom, h[j + 1] / denom)
        cs.append(c)
        sn.append(s)
        h[j] = denom
        g.append(-s * g[j])
        g[j] = c * g[j]
        cols.append(h[:j + 1].copy())
        resid = abs(g[j + 1])
        history.append(resid)
        j += 1

        if resid <= target or breakdown or j == maxit:
            x = extract(j)
            true_resid = float(np.linalg.norm(b - matvec(x)))
            if true_resid <= rtol * beta or breakdown or j == maxit:
                break
            # recurrence passed but rounding left the true residual above
            # tolerance: keep expanding the same Krylov space
            target = min(target, 0.25 * resid)
            if target < 1e-4 * rtol * beta:
                break

    converged = true_resid <= rtol * beta
    report = SolveReport(j, history, converged, true_resid / beta,
                         time.perf_counter() - t0)
    return x, report


def make_solver(op, pc, rtol=1e-5, maxit=2000, raise_on_failure=True):
    """Bind operator, preconditioner and tolerances into a solve callable.

    The result maps a right-hand side to ``(solution, report)`` and, by
    default, raises :class:`SolveFailure` when the cap is hit, carrying the
    report and the best iterate.
    """
    def solve(b):
        x, report = gmres(op, pc, b, rtol, maxit)
        if raise_on_failure and not report.converged:
            raise SolveFailure(
                f"GMRES stopped after {report.iterations} iterations at "
                f"relative residual {report.achieved_rtol:.3e}", report, x)
        return x, report

    return solve
