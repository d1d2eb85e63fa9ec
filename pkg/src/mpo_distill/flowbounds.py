"""Worst-case bound recursions for the noise level and ergodicity coefficient.

The pair (eps, tau) — noise level of the three error channels in the gauge
where the dominant channel is trace-preserving, and ergodicity coefficient of
that channel — obeys closed two-step update inequalities.  Iterating the
inequalities as equalities gives a certified convergence region for the
recurrence protocol; the deterministic five-qubit protocol reduces to a
scalar polynomial recursion.  Closed-form thresholds and double-exponential
speed bounds are provided alongside a grid scanner for the convergence
region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundState:
    """One point of the bound recursion.

    Derived quantities: Z = (1+tau^4)/(1-tau^4), P = 2 eps^2 + 5 eps^4,
    k = 2 Z P, Delta = k/(1-k).  The state is in the recursion's domain only
    while k < 1/2 (so Delta < 1) and tau < 1.
    """

    eps: float
    tau: float

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")

    @property
    def Z(self) -> float:
        t4 = self.tau**4
        return (1.0 + t4) / (1.0 - t4)

    @property
    def P(self) -> float:
        return 2.0 * self.eps**2 + 5.0 * self.eps**4

    @property
    def k(self) -> float:
        return 2.0 * self.Z * self.P

    @property
    def Delta(self) -> float:
        return self.k / (1.0 - self.k)

    @property
    def in_domain(self) -> bool:
        return 0.0 <= self.tau < 1.0 and self.k < 0.5


class OutOfDomainError(ValueError):
    """Bound step evaluated outside its domain of validity."""


def recurrence_bound_step(state: BoundState) -> BoundState:
    """One double-step update of the (eps, tau) bounds, treated as equalities.

    eps' = 4 (1+Delta)/(1-Delta) (eps^2 + eps^4)
    tau' = tau^4 (1 + 3 Delta) + (1+Delta)/(1-Delta) (3 Delta + P)
    """
    if not state.in_domain:
        raise OutOfDomainError(f"state (eps={state.eps}, tau={state.tau}) out of domain")
    delta = state.Delta
    ratio = (1.0 + delta) / (1.0 - delta)
    eps_next = 4.0 * ratio * (state.eps**2 + state.eps**4)
    tau_next = state.tau**4 * (1.0 + 3.0 * delta) + ratio * (3.0 * delta + state.P)
    return BoundState(eps=eps_next, tau=tau_next)


def five_qubit_bound_step(eps: float) -> float:
    """Single-round noise update for the code-based deterministic protocol."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    return 30.0 * eps**2 + 70.0 * eps**3 + 90.0 * eps**4 + 66.0 * eps**5


def converges(
    eps0: float,
    tau0: float,
    max_iter: int = 200,
    target: float = 1e-12,
) -> bool:
    """Whether the iterated bound state reaches eps < target in the domain."""
    ok, _ = iterate_to_target(eps0, tau0, max_iter=max_iter, target=target)
    return ok


def iterate_to_target(
    eps0: float,
    tau0: float,
    max_iter: int = 200,
    target: float = 1e-12,
):
    """Iterate the bound recursion; returns (converged, rounds_used)."""
    if not (0.0 <= eps0 < 1.0 and 0.0 <= tau0 < 1.0):
        return False, -1
    state = BoundState(eps=eps0, tau=tau0)
    for n in range(max_iter + 1):
        if state.eps < target:
            return True, n
        if not state.in_domain:
            return False, -1
        state = recurrence_bound_step(state)
    return False, -1


def analytic_threshold(tau0: float) -> float:
    """Closed-form noise threshold (1/7) (1 - tau0^4) / (1 + tau0^4)."""
    if not 0.0 <= tau0 < 1.0:
        raise ValueError("tau0 must lie in [0, 1)")
    t4 = tau0**4
    return (1.0 - t4) / (7.0 * (1.0 + t4))


def region_scan(
    eps_max: float,
    tau_max: float,
    n_eps: int,
    n_tau: int,
    max_iter: int = 200,
    target: float = 1e-12,
):
    """Grid scan of the convergence region.

    Yields one record per grid point in row-major order (eps outer, tau
    inner): (eps0, tau0, converged, rounds_to_target), rounds -1 when the
    iteration leaves the domain or fails to reach the target.
    """
    if n_eps < 2 or n_tau < 2:
        raise ValueError("grid resolution must be >= 2 per axis")
    eps_grid = np.linspace(0.0, eps_max, n_eps)
    tau_grid = np.linspace(0.0, tau_max, n_tau)
    for e in eps_grid:
        for t in tau_grid:
            ok, rounds = iterate_to_target(float(e), float(t), max_iter=max_iter, target=target)
            yield float(e), float(t), ok, rounds


def speed_bound(protocol: str, eps0: float, n: int) -> float:
    """Double-exponential convergence bound on the noise level after n steps.

    recurrence: (1/5)(5 eps0)^(2^(n/2)), n counted in single steps (even);
    five-qubit: (1/33)(33 eps0)^(2^n), n counted in rounds.
    """
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    if protocol == "recurrence":
        return (5.0 * eps0) ** (2.0 ** (n / 2.0)) / 5.0
    if protocol == "five-qubit":
        return (33.0 * eps0) ** (2.0**n) / 33.0
    raise ValueError(f"unknown protocol {protocol!r}")


def five_qubit_converges(eps0: float, max_iter: int = 500, target: float = 1e-12) -> bool:
    eps = eps0
    for _ in range(max_iter):
        if eps < target:
            return True
        if eps > 0.5:
            return False
        eps = five_qubit_bound_step(eps)
    return eps < target


def five_qubit_threshold(lo: float = 0.02, hi: float = 0.05, tol: float = 1e-6) -> float:
    """Empirical convergence threshold of the five-qubit recursion, by bisection."""
    if five_qubit_converges(hi):
        return hi
    if not five_qubit_converges(lo):
        raise ValueError("lower bracket does not converge")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if five_qubit_converges(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
