"""Power iteration on symmetric (generalized) eigenproblems.

Convergence is judged on the relative change of the Rayleigh quotient, which
for symmetric positive-definite operators increases monotonically along the
iteration, so estimates approach the extremal eigenvalue from inside.
"""

from __future__ import annotations

import numpy as np


class IterationError(Exception):
    """An eigenvalue iteration failed to converge within its cap.

    Carries the last Rayleigh-quotient ``estimate`` and iterate ``vector``;
    for SPD problems the quotient grows monotonically, so the estimate is
    still a certified bound from inside the spectrum.
    """

    def __init__(self, message, estimate=None, vector=None):
        super().__init__(message)
        self.estimate = estimate
        self.vector = vector


def power_iteration(matvec, v0, tol=1e-12, maxit=10_000, inner=None):
    """Largest eigenvalue (and eigenvector) of a symmetric operator.

    Parameters
    ----------
    matvec : callable
        Action of the operator.
    v0 : ndarray
        Start vector, not orthogonal to the dominant eigenvector.
    tol : float
        Relative Rayleigh-quotient change at which to stop.
    maxit : int
        Iteration cap; exceeding it raises IterationError.
    inner : callable, optional
        Inner-product weight action for generalized problems A v = lam B v:
        pass the action of B and supply ``matvec`` as B^{-1} A (the iteration
        then normalizes in the B-norm and reports the generalized quotient).
    """
    v = np.asarray(v0, dtype=np.float64).copy()
    bv = inner(v) if inner is not None else v
    nrm = np.sqrt(v @ bv)
    if nrm == 0.0:
        raise ValueError("zero start vector")
    v /= nrm
    lam = None
    for _ in range(maxit):
        w = matvec(v)
        bw = inner(w) if inner is not None else w
        lam_new = v @ bw        # Rayleigh quotient: v is unit in the B-norm
        nrm = np.sqrt(w @ bw)
        if nrm == 0.0:
            return 0.0, w          # operator annihilated the iterate
        v = w / nrm
        if lam is not None and abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new, v
        lam = lam_new
    raise IterationError(
        f"power iteration did not converge in {maxit} steps", lam, v)
