"""Hamiltonian Monte Carlo for the mean-one constrained frailty vector.

The positive vector Z with mean(Z) = 1 lives on a scaled simplex.  It is
mapped to an unconstrained vector z* of length m-1 through a stick-breaking
construction: B_j = logistic(z*_j - log(m - j)), A_j = B_j * prod_{o<j}(1 -
B_o), A_m closes the simplex, and Z = m * A.  The offsets log(m - j) center
the map so z* = 0 gives Z = (1, ..., 1).  HMC runs on z* with the
log-Jacobian folded into the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HmcConfig",
    "DualAveraging",
    "transform",
    "inverse_transform",
    "log_target_z",
    "leapfrog",
    "hmc_update",
]


@dataclass
class HmcConfig:
    """Leapfrog integrator settings; defaults are conservative generic choices."""

    step_size: float = 0.1
    leapfrog_steps: int = 20
    step_jitter: float = 0.2
    adapt: bool = True
    target_accept: float = 0.8

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.leapfrog_steps < 1:
            raise ValueError("need at least one leapfrog step")
        if not 0.0 <= self.step_jitter < 1.0:
            raise ValueError("step jitter must lie in [0, 1)")


def _log_sigmoid(x):
    # log(1/(1+e^-x)) without overflow on either tail
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


def _sticks(z_star):
    """Shared forward pass: log B, log(1-B), and the log remaining stick mass."""
    z_star = np.asarray(z_star, dtype=float)
    m = z_star.size + 1
    offset = np.log(np.arange(m - 1, 0, -1, dtype=float))
    x = z_star - offset
    log_b = _log_sigmoid(x)
    log_1mb = _log_sigmoid(-x)
    # log prod_{o<j}(1 - B_o), j = 1..m (index 0 is the empty product)
    log_rem = np.concatenate(([0.0], np.cumsum(log_1mb)))
    return m, log_b, log_1mb, log_rem


def transform(z_star):
    """Map unconstrained z* to (Z, log |Jacobian|); mean(Z) = 1 by construction."""
    m, log_b, log_1mb, log_rem = _sticks(z_star)
    log_a = np.concatenate((log_b + log_rem[:-1], [log_rem[-1]]))
    z = m * np.exp(log_a)
    log_jac = float(np.sum(log_b + log_1mb + log_rem[:-1]))
    return z, log_jac


def inverse_transform(z):
    """Recover z* from a valid constrained frailty vector."""
    z = np.asarray(z, dtype=float)
    m = z.size
    if m < 2:
        raise ValueError("need at least two systems")
    if np.any(z <= 0):
        raise ValueError("frailties must be strictly positive")
    if abs(z.mean() - 1.0) > 1e-8:
        raise ValueError("frailty vector must have mean 1")
    a = z / m
    # remaining mass as a suffix sum of positives; the equivalent 1 - cumsum
    # cancels catastrophically when little mass is left
    rem = np.cumsum(a[::-1])[::-1]
    b = a[:-1] / rem[:-1]
    if np.any(b >= 1.0) or np.any(b <= 0.0):
        raise ValueError("frailty vector is not an interior simplex point")
    offset = np.log(np.arange(m - 1, 0, -1, dtype=float))
    return np.log(b) - np.log1p(-b) + offset


def log_target_z(z_star, n_j, mu_y, tau_y):
    """Log conditional density of z* given allocations, with its gradient.

    Target: |J(z*)| * prod_j LN(z_j | mu_{Y_j}, 1/tau_{Y_j}) * prod_j z_j^{n_j},
    i.e. per system (n_j - 1) w_j - tau_j/2 (w_j - mu_j)^2 with w = log z,
    plus the log-Jacobian.  The gradient is exact; additive constants in the
    normal densities are dropped.
    """
    n_j = np.asarray(n_j, dtype=float)
    mu_y = np.asarray(mu_y, dtype=float)
    tau_y = np.asarray(tau_y, dtype=float)
    m, log_b, log_1mb, log_rem = _sticks(z_star)
    w = math.log(m) + np.concatenate((log_b + log_rem[:-1], [log_rem[-1]]))

    log_jac = np.sum(log_b + log_1mb + log_rem[:-1])
    logp = float(log_jac + np.sum((n_j - 1.0) * w - 0.5 * tau_y * (w - mu_y) ** 2))

    # h_j = d/dw_j of the per-system term; gradient in z* follows from the
    # stick-breaking chain rule:
    #   dL/dz*_k = (1 - B_k)(1 + h_k) - B_k (m - k + sum_{j>k} h_j), k = 1..m-1
    h = n_j - 1.0 - tau_y * (w - mu_y)
    b = np.exp(log_b)
    tail = np.cumsum(h[::-1])[::-1]  # tail[k] = sum_{j >= k} h_j (0-based)
    k = np.arange(1, m, dtype=float)
    grad = (1.0 - b) * (1.0 + h[:-1]) - b * (m - k + tail[1:])
    return logp, grad


def leapfrog(z_star, p, eps, n_steps, grad_fn):
    """Standard leapfrog integration of Hamiltonian dynamics (identity mass)."""
    q = np.array(z_star, dtype=float)
    p = np.array(p, dtype=float)
    _, grad = grad_fn(q)
    p = p + 0.5 * eps * grad
    for step in range(n_steps):
        q = q + eps * p
        logp, grad = grad_fn(q)
        if not np.all(np.isfinite(grad)):
            return q, p, -np.inf, False
        p = p + (eps if step < n_steps - 1 else 0.5 * eps) * grad
    return q, p, logp, True


def hmc_update(z_star, logp_grad_fn, config: HmcConfig, rng, step_size=None):
    """One HMC transition; returns (new z*, accepted, divergent)."""
    eps = config.step_size if step_size is None else step_size
    if config.step_jitter > 0:
        eps = eps * (1.0 + config.step_jitter * (2.0 * rng.uniform() - 1.0))
    q0 = np.asarray(z_star, dtype=float)
    logp0, _ = logp_grad_fn(q0)
    p0 = rng.standard_normal(q0.size)
    h0 = -logp0 + 0.5 * float(p0 @ p0)

    q1, p1, logp1, ok = leapfrog(q0, p0, eps, config.leapfrog_steps, logp_grad_fn)
    if not ok or not np.isfinite(logp1):
        return q0, False, True, 0.0
    h1 = -logp1 + 0.5 * float(p1 @ p1)
    delta = h0 - h1
    if delta < -1000.0:
        return q0, False, True, 0.0
    accept_prob = min(1.0, math.exp(min(0.0, delta)))
    if rng.uniform() < accept_prob:
        return q1, True, False, accept_prob
    return q0, False, False, accept_prob


class DualAveraging:
    """Nesterov dual-averaging step-size adaptation toward a target acceptance."""

    def __init__(self, eps0, target=0.8, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.log_eps = math.log(eps0)
        self.log_eps_bar = math.log(eps0)
        self.h_bar = 0.0
        self.t = 0

    def update(self, accept_prob):
        self.t += 1
        frac = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def adapted_step(self):
        return math.exp(self.log_eps_bar)
