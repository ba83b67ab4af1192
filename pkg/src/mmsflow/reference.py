"""Exact implicit-Euler reference trajectories for the quadratic energy.

For F[u] = 0.5 ||u - f||^2 the proximal step has the closed form

    u_{n+1} = (u_n + tau * f) / (1 + tau),

with the n-step solution

    u_n = (1 + tau)^(-n) * u_0 + (1 - (1 + tau)^(-n)) * f.

Both forms are provided so they can cross-check each other; the decay
factor is evaluated as exp(-n * log1p(tau)), which underflows gracefully
to 0 (i.e. to f) for extreme n instead of overflowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ParameterError
from .hilbert import GridFunction


def exact_mms_step(u: GridFunction, f_star: GridFunction, tau: float) -> GridFunction:
    """One exact proximal step (u + tau * f_star) / (1 + tau)."""
    if tau <= 0:
        raise ParameterError("tau must be positive")
    u._check(f_star)
    return GridFunction((u.values + tau * f_star.values) / (1.0 + tau), u.grid)


def decay_factor(tau: float, n: int) -> float:
    """(1 + tau)^(-n), overflow-safe for large n."""
    return math.exp(-n * math.log1p(tau))


def exact_mms_closed(
    u0: GridFunction, f_star: GridFunction, tau: float, n: int
) -> GridFunction:
    """n-step closed form; equals n-fold :func:`exact_mms_step` composition."""
    if tau <= 0:
        raise ParameterError("tau must be positive")
    if n < 0:
        raise ParameterError("step count must be nonnegative")
    u0._check(f_star)
    c = decay_factor(tau, n)
    return GridFunction(c * u0.values + (1.0 - c) * f_star.values, u0.grid)


@dataclass
class ExactTrajectory:
    """u_0 .. u_n generated by the exact recursion."""

    tau: float
    target: GridFunction
    steps: list = field(default_factory=list)

    @classmethod
    def generate(
        cls, u0: GridFunction, f_star: GridFunction, tau: float, n_steps: int
    ) -> "ExactTrajectory":
        traj = cls(tau=tau, target=f_star, steps=[u0])
        u = u0
        for _ in range(n_steps):
            u = exact_mms_step(u, f_star, tau)
            traj.steps.append(u)
        return traj

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, n: int) -> GridFunction:
        return self.steps[n]
