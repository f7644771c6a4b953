"""Evolution of the age-structured deformation history.

The history holds one 2-tensor field per age node.  One full time step
advances every slice by the react-advect stage of

    dG/dt = -u . grad G + G . grad u

and then shifts the stack by one age index, injecting the identity at age
zero.  Because the react-advect operator acts identically on every slice it
commutes exactly with the shift; reacting first keeps the age-zero slice
equal to the identity at the end of every full step, and the shift itself is
an O(1) rotation of a circular buffer (slice-major layout, age outermost).

Determinants are transported exactly by the continuum equations for
divergence-free velocities, so their discrete drift is left uncorrected as a
visible diagnostic of discretization quality.
"""

from __future__ import annotations

import warnings

import numpy as np

from .agegrid import AgeGrid
from .spectral import SpectralGrid

CHUNK_SLICES = 48  # bounds transient FFT buffers during stack updates


class DegenerateHistoryError(ValueError):
    """Initial deformation data violates the determinant floor."""


class HistoryNaNError(FloatingPointError):
    """Non-finite entries appeared in the deformation stack."""


class DeformationHistory:
    """Circular-buffer stack of 2-tensor fields, one per age node.

    ``payload`` has shape ``(n_nodes, 2, 2, n, n)``; logical age index j
    lives at physical row ``(head + j) % n_nodes``.  ``generation`` counts
    completed steps.  Single-writer: one stepper mutates the stack, readers
    see a consistent snapshot between steps.
    """

    def __init__(self, payload: np.ndarray, age_grid: AgeGrid, head: int = 0, generation: int = 0):
        if payload.shape[0] != age_grid.n_nodes or payload.shape[1:3] != (2, 2):
            raise ValueError("payload shape does not match the age grid")
        self.payload = payload
        self.age_grid = age_grid
        self.head = head % age_grid.n_nodes
        self.generation = generation

    @property
    def n_slices(self) -> int:
        return self.payload.shape[0]

    @property
    def grid_n(self) -> int:
        return self.payload.shape[-1]

    def slice(self, j: int) -> np.ndarray:
        """View of the age-j tensor field."""
        return self.payload[(self.head + j) % self.n_slices]

    def logical_payload(self) -> np.ndarray:
        """Copy of the stack in increasing-age order."""
        idx = (self.head + np.arange(self.n_slices)) % self.n_slices
        return self.payload[idx]

    def coeffs_physical(self, coeffs: np.ndarray) -> np.ndarray:
        """Reorder per-age coefficients to match the physical row order."""
        return np.roll(np.asarray(coeffs), self.head)


def identity_stack(n_slices: int, n: int) -> np.ndarray:
    out = np.zeros((n_slices, 2, 2, n, n))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0
    return out


def init_history(spec, grid: SpectralGrid, age_grid: AgeGrid, mu: float = 1.0) -> DeformationHistory:
    """Build the initial history.

    ``spec`` is either the string ``"identity"`` (quiescent past: every
    slice is the identity) or an explicit array of per-age tensor fields in
    increasing-age order.  Explicit data must keep ``det G >= mu > 0`` at
    every node; data whose age-zero slice differs from the identity is
    accepted with a warning (the boundary condition overwrites it after the
    first step).
    """
    if isinstance(spec, str):
        if spec != "identity":
            raise ValueError(f"unknown history spec {spec!r}")
        return DeformationHistory(identity_stack(age_grid.n_nodes, grid.n), age_grid)
    data = np.array(spec, dtype=float)
    expected = (age_grid.n_nodes, 2, 2, grid.n, grid.n)
    if data.shape != expected:
        raise ValueError(f"explicit history must have shape {expected}, got {data.shape}")
    if mu <= 0:
        raise ValueError("determinant floor mu must be positive")
    det = det_field(data)
    min_det = float(det.min())
    if min_det < mu:
        raise DegenerateHistoryError(
            f"initial history has min det G = {min_det:.6g}, below the floor mu = {mu:.6g}"
        )
    eye = identity_stack(1, grid.n)[0]
    if not np.allclose(data[0], eye, atol=1e-12):
        warnings.warn("age-zero slice of the supplied history differs from the identity", stacklevel=2)
    return DeformationHistory(data, age_grid)


def det_field(g: np.ndarray) -> np.ndarray:
    """Pointwise determinant for arrays shaped (..., 2, 2, n, n)."""
    return g[..., 0, 0, :, :] * g[..., 1, 1, :, :] - g[..., 0, 1, :, :] * g[..., 1, 0, :, :]


def norm_field(g: np.ndarray) -> np.ndarray:
    """Pointwise Frobenius norm for arrays shaped (..., 2, 2, n, n)."""
    return np.sqrt(
        g[..., 0, 0, :, :] ** 2
        + g[..., 0, 1, :, :] ** 2
        + g[..., 1, 0, :, :] ** 2
        + g[..., 1, 1, :, :] ** 2
    )


def history_min_det(history: DeformationHistory) -> float:
    return min(
        float(det_field(chunk).min()) for chunk in _chunks(history.payload)
    )


def history_min_norm(history: DeformationHistory) -> float:
    return min(
        float(norm_field(chunk).min()) for chunk in _chunks(history.payload)
    )


def _chunks(stack: np.ndarray, size: int = CHUNK_SLICES):
    for lo in range(0, stack.shape[0], size):
        yield stack[lo : lo + size]


def age_shift(history: DeformationHistory) -> DeformationHistory:
    """Advance every slice one age index and inject the identity at age zero.

    The oldest slice is overwritten; its kernel mass is below the grid's
    tail tolerance by construction.
    """
    history.head = (history.head - 1) % history.n_slices
    newborn = history.payload[history.head]
    newborn[:] = 0.0
    newborn[0, 0] = 1.0
    newborn[1, 1] = 1.0
    return history


def _mat_times_gradu(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    """(G . grad u)_{jk} = G_{jl} a_{lk} for stacks g ~ (c,2,2,n,n), a ~ (2,2,n,n)."""
    out = np.empty_like(g)
    for j in range(2):
        for k in range(2):
            out[:, j, k] = g[:, j, 0] * a[0, k] + g[:, j, 1] * a[1, k]
    return out


def _react_rhs_hat(
    grid: SpectralGrid,
    g_phys: np.ndarray,
    u: np.ndarray,
    grad_u: np.ndarray,
) -> np.ndarray:
    """Dealiased spectral right-hand side of the react-advect stage.

    Advection uses the conservative form u . grad G = div(u G), exact for
    divergence-free u; it needs only forward transforms of physical
    products, which is the cheaper direction for this stack size.
    """
    rhs_hat = grid.fwd(_mat_times_gradu(g_phys, grad_u))
    rhs_hat -= grid.d1 * grid.fwd(u[0] * g_phys)
    rhs_hat -= grid.d2 * grid.fwd(u[1] * g_phys)
    return grid.dealias_hat_inplace(rhs_hat)


def stretch_advect_step(
    history: DeformationHistory,
    grid: SpectralGrid,
    u_old: np.ndarray,
    u_new: np.ndarray,
    dt: float,
) -> DeformationHistory:
    """One full history step: Heun react-advect of every slice, then age shift.

    The two Heun stages sample the velocity at the old and new time levels,
    which keeps the stage second-order accurate; the exact shift and the
    identity injection make the age-zero boundary condition exact.  Slices
    are updated independently (data-parallel over age), and a non-finite
    result aborts with the offending slice located.
    """
    a_old = grid.gradient(u_old)  # a[l, k] = d_l u_k
    a_new = a_old if u_new is u_old else grid.gradient(u_new)
    stack = history.payload
    for lo in range(0, stack.shape[0], CHUNK_SLICES):
        g = stack[lo : lo + CHUNK_SLICES]
        g_hat = grid.fwd(g)
        r1 = _react_rhs_hat(grid, g, u_old, a_old)
        g_star = grid.inv(g_hat + dt * r1)
        r2 = _react_rhs_hat(grid, g_star, u_new, a_new)
        r1 += r2
        r1 *= 0.5 * dt
        r1 += g_hat
        g_new = grid.inv(r1)
        if not np.isfinite(g_new).all():
            bad = np.argwhere(~np.isfinite(g_new))
            phys = lo + int(bad[0, 0])
            age_j = (phys - history.head) % history.n_slices
            raise HistoryNaNError(
                f"non-finite deformation at step {history.generation + 1}, age slice {age_j}"
            )
        g[:] = g_new
    age_shift(history)
    history.generation += 1
    return history
