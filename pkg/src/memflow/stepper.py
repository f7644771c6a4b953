"""Velocity update for the forced incompressible flow.

One substep applies a Heun (explicit second-order Runge-Kutta) stage to the
projected advection and stress forcing, with the viscous term handled by its
exact integrating factor, so stability is limited by advection only.  The
pressure never appears: the solenoidal projection eliminates it, and it can
be recovered on demand from the momentum balance.

Within one base (age) step the stress is frozen; the flow may take several
substeps under its advective CFL bound.  The optional forcing hook exists
for manufactured-solution studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralGrid


class FlowNaNError(FloatingPointError):
    """Non-finite velocity after a substep."""


@dataclass
class FlowState:
    """Velocity state: divergence-free physical field, its spectrum, and time."""

    grid: SpectralGrid
    u: np.ndarray
    eta: float
    t: float = 0.0
    u_hat: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("viscosity must be positive")
        u_hat = self.grid.dealias_hat(self.grid.leray_hat(self.grid.fwd(self.u)))
        self.u_hat = u_hat
        self.u = self.grid.inv(u_hat)


def cfl_dt(u: np.ndarray, grid: SpectralGrid, safety: float, base_dt: float, u_floor: float = 1e-12) -> float:
    """Advective step bound safety * dx / |u|_inf, capped at the base step.

    The cap keeps the flow substeps aligned with the age step; diffusion
    imposes no constraint thanks to the integrating factor.
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety must lie in (0, 1]")
    sup = float(np.max(np.sqrt(u[0] ** 2 + u[1] ** 2)))
    return min(safety * grid.dx / max(sup, u_floor), base_dt)


def kinetic_energy(grid: SpectralGrid, u: np.ndarray) -> float:
    """Half the squared discrete L^2 norm of the velocity."""
    return 0.5 * grid.l2_norm_sq(u)


def _rhs_hat(grid: SpectralGrid, u: np.ndarray, div_tau_hat, forcing, t: float) -> np.ndarray:
    """Projected, dealiased spectral right-hand side: P(div tau - u.grad u + f)."""
    u_hat = grid.fwd(u)
    du = grid.inv(np.stack((grid.d1 * u_hat, grid.d2 * u_hat)))  # du[i, c] = d_i u_c
    adv = np.stack(
        (
            u[0] * du[0, 0] + u[1] * du[1, 0],
            u[0] * du[0, 1] + u[1] * du[1, 1],
        )
    )
    rhs = -grid.fwd(adv)
    if div_tau_hat is not None:
        rhs = rhs + div_tau_hat
    if forcing is not None:
        rhs = rhs + grid.fwd(forcing(t, grid))
    return grid.leray_hat(grid.dealias_hat(rhs))


def divergence_of_tensor_hat(grid: SpectralGrid, tau: np.ndarray) -> np.ndarray:
    """(div tau)_k = d_j tau_{jk}, as a spectral vector field."""
    tau_hat = grid.fwd(tau)
    return np.stack(
        (
            grid.d1 * tau_hat[0, 0] + grid.d2 * tau_hat[1, 0],
            grid.d1 * tau_hat[0, 1] + grid.d2 * tau_hat[1, 1],
        )
    )


def step_velocity(state: FlowState, tau: np.ndarray | None, dt: float, forcing=None) -> FlowState:
    """One substep of the momentum equation with the stress frozen.

    Heun stages for the nonlinear part, exact exponential factor for the
    diffusion (a Lawson scheme); the output stays divergence-free to
    spectral accuracy because both stage increments are projected.
    """
    grid = state.grid
    div_tau_hat = None if tau is None else divergence_of_tensor_hat(grid, tau)
    e = grid.viscous_factor(state.eta, dt)
    n1 = _rhs_hat(grid, state.u, div_tau_hat, forcing, state.t)
    u_star_hat = e * (state.u_hat + dt * n1)
    u_star = grid.inv(u_star_hat)
    n2 = _rhs_hat(grid, u_star, div_tau_hat, forcing, state.t + dt)
    state.u_hat = e * state.u_hat + 0.5 * dt * (e * n1 + n2)
    state.u = grid.inv(state.u_hat)
    state.t += dt
    if not np.isfinite(state.u).all():
        raise FlowNaNError(f"non-finite velocity at t = {state.t:.6g}")
    return state


def advance_flow(
    state: FlowState,
    tau: np.ndarray | None,
    base_dt: float,
    safety: float,
    forcing=None,
) -> int:
    """Advance one base step, substepping under the advective CFL bound.

    The stress is held frozen across substeps.  Returns the substep count.
    """
    grid = state.grid
    div_tau_hat = None if tau is None else divergence_of_tensor_hat(grid, tau)
    remaining = base_dt
    n_sub = 0
    while remaining > 1e-14 * base_dt:
        h = min(cfl_dt(state.u, grid, safety, base_dt), remaining)
        e = grid.viscous_factor(state.eta, h)
        n1 = _rhs_hat(grid, state.u, div_tau_hat, forcing, state.t)
        u_star = grid.inv(e * (state.u_hat + h * n1))
        n2 = _rhs_hat(grid, u_star, div_tau_hat, forcing, state.t + h)
        state.u_hat = e * state.u_hat + 0.5 * h * (e * n1 + n2)
        state.u = grid.inv(state.u_hat)
        state.t += h
        remaining -= h
        n_sub += 1
        if not np.isfinite(state.u).all():
            raise FlowNaNError(f"non-finite velocity at t = {state.t:.6g}")
    return n_sub
