"""Proximal operator of the scaled squared-l1 penalty.

For a step size ``alpha`` and weight ``beta``, the penalty is
``g(u) = (alpha*beta/2) * (|u_1| + ... + |u_N|)**2`` and its proximal map

    prox_g(x) = argmin_u  0.5*|u - x|_2^2 + (alpha*beta/2)*|u|_1^2

has the closed form ``u_i = lam_i*x_i/(lam_i + alpha*beta)`` with weights
``lam_i = max(0, sqrt(alpha*beta/2)*|x_i|/sqrt(mu) - alpha*beta)`` summing to
one at the root ``mu`` of a scalar nonincreasing function.  The root is
located by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: |sum(lam) - 1| guaranteed at the bisection result.
LAMBDA_SUM_TOL = 1e-6
#: internal continuation threshold, two digits of headroom on the guarantee
_PSI_STOP = 1e-8


@dataclass
class ProxParams:
    """Scaling and tolerances for the squared-l1 prox.

    alpha:      prox step size (> 0)
    beta:       penalty weight (> 0)
    bisect_tol: absolute width at which the bisection interval may stop
    max_bisect: hard cap on bisection iterations
    """

    alpha: float
    beta: float
    bisect_tol: float = 1e-10
    max_bisect: int = 200

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.bisect_tol <= 0:
            raise ValueError("bisect_tol must be positive")


def psi(mu, x, params: ProxParams):
    """Scalar root function: sum of the weight brackets minus one.

    Nonincreasing in ``mu``; tends to -1 as mu -> inf and to +inf as
    mu -> 0+ for x != 0.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    kappa = params.alpha * params.beta
    x = np.asarray(x, dtype=float)
    brackets = np.maximum(0.0, np.sqrt(kappa / 2.0) * np.abs(x) / np.sqrt(mu) - kappa)
    return brackets.sum() - 1.0


def find_mu_star(x, params: ProxParams):
    """Bisection for the positive root of psi(. , x).

    Requires x != 0 (callers must short-circuit the zero vector).  The
    interval is shrunk until its width is below ``bisect_tol`` and the
    weights sum to one within LAMBDA_SUM_TOL.
    """
    x = np.asarray(x, dtype=float)
    absmax = np.abs(x).max()
    if absmax == 0.0:
        raise ValueError("find_mu_star requires a nonzero vector")
    kappa = params.alpha * params.beta
    n = x.size

    lo = params.bisect_tol
    # at the root, sqrt(kappa/2)*|x_i|/sqrt(mu) <= kappa + 1, so this upper
    # bound only needs a few doublings in pathological scalings
    hi = 0.5 * kappa * (absmax / kappa) ** 2 * max(1.0, float(n)) ** 2
    hi = max(hi, lo * 2.0)
    for _ in range(params.max_bisect):
        if psi(hi, x, params) < 0.0:
            break
        hi *= 2.0
    else:
        raise AssertionError("bisection bracket: psi stayed positive")
    while psi(lo, x, params) <= 0.0:
        lo *= 0.5
        if lo == 0.0:
            # root is at the resolution floor; hi is the best bracket
            return hi
    assert lo < hi

    mid = 0.5 * (lo + hi)
    for _ in range(params.max_bisect):
        val = psi(mid, x, params)
        if val > 0.0:
            lo = mid
        else:
            hi = mid
        mid = 0.5 * (lo + hi)
        if hi - lo <= params.bisect_tol and abs(psi(mid, x, params)) <= _PSI_STOP:
            break
        if hi == lo:
            break
    return mid


def prox_g(x, params: ProxParams):
    """Proximal point of the squared-l1 penalty at x (vector in R^N)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("prox_g: input contains non-finite values")
    if not x.any():
        return np.zeros_like(x)
    kappa = params.alpha * params.beta
    mu = find_mu_star(x, params)
    lam = np.maximum(0.0, np.sqrt(kappa / 2.0) * np.abs(x) / np.sqrt(mu) - kappa)
    return lam * x / (lam + kappa)


def prox_trajectory(u, params: ProxParams):
    """Column-wise prox of a control trajectory (one column per time node)."""
    from .trajectory import Trajectory

    out = np.empty_like(u.values)
    for k in range(u.values.shape[1]):
        out[:, k] = prox_g(u.values[:, k], params)
    return Trajectory(u.grid, out)
