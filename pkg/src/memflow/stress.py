"""Assembly of the extra-stress from the deformation history.

The stress is the age integral of the strain measure against the memory
kernel, evaluated per grid node with compensated summation over the age
axis.  The gradient-control quantities live here too: the kernel-weighted
age integral of the normalized deformation-gradient norm (the integrand of
the cumulative functional bounding the stress gradient), and the discrete
L^q norm of the spectral stress gradient.  The gradient of the assembled
stress is computed directly (one spectral gradient) rather than as an age
integral of chain-rule terms; the two agree to quadrature tolerance.
"""

from __future__ import annotations

import numpy as np

from .agegrid import AgeGrid
from .constitutive import AgeDependentStrainMeasure, StrainMeasure
from .spectral import SpectralGrid
from .transport import CHUNK_SLICES, DeformationHistory, det_field, norm_field


class DegenerateDeformationError(FloatingPointError):
    """A deformation norm fell below half its proven lower bound.

    The transported determinant keeps |G| bounded away from zero in the
    continuum, so reaching this signals discretization blow-up.
    """


def assemble_stress(
    history: DeformationHistory,
    measure,
    age_grid: AgeGrid | None = None,
) -> np.ndarray:
    """Age-integrate the strain measure over the history stack.

    Returns the 2-tensor stress field, shape ``(2, 2, n, n)``.  Summation is
    compensated (Kahan) over the age axis in a fixed order, so the result is
    deterministic regardless of chunking or FFT worker counts.
    """
    grid_ages = history.age_grid if age_grid is None else age_grid
    if grid_ages.n_nodes != history.n_slices:
        raise ValueError("history and age grid disagree on the number of age nodes")
    n = history.grid_n
    stack = history.payload
    separable = isinstance(measure, StrainMeasure)
    if separable:
        coeffs = history.coeffs_physical(grid_ages.node_mass)
    elif isinstance(measure, AgeDependentStrainMeasure):
        coeffs = history.coeffs_physical(grid_ages.weights)
        ages = history.coeffs_physical(grid_ages.nodes)
    else:
        raise TypeError(f"unsupported strain measure type {type(measure).__name__}")

    total = np.zeros((2, 2, n, n))
    comp = np.zeros_like(total)
    for lo in range(0, stack.shape[0], CHUNK_SLICES):
        g = stack[lo : lo + CHUNK_SLICES]
        if separable:
            integrand = measure.stress_stack(g)
        else:
            integrand = np.stack(
                [measure.integrand_stack(ages[lo + i], g[i]) for i in range(g.shape[0])]
            )
        for i in range(g.shape[0]):
            y = coeffs[lo + i] * integrand[i] - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return total


def history_scan(
    history: DeformationHistory,
    grid: SpectralGrid,
    q: float,
    r: float,
    mu: float = 1.0,
    age_grid: AgeGrid | None = None,
) -> tuple[float, float, float]:
    """One sweep over the stack: (y integrand, min det G, min |G|).

    The integrand is the kernel-weighted age integral of
    || |grad G| / |G| ||_{L^q}^r at the current time, summed with
    compensation in age order.  Raises
    :class:`DegenerateDeformationError` if any node's deformation norm
    falls below ``sqrt(2 min(mu, 1)) / 2``.
    """
    grid_ages = history.age_grid if age_grid is None else age_grid
    coeffs = history.coeffs_physical(grid_ages.node_mass)
    floor = np.sqrt(2.0 * min(mu, 1.0)) / 2.0
    stack = history.payload
    vals = np.empty(stack.shape[0])
    min_det = np.inf
    min_abs = np.inf
    for lo in range(0, stack.shape[0], CHUNK_SLICES):
        g = stack[lo : lo + CHUNK_SLICES]
        dg = grid.inv(grid.deriv_pair_hat(grid.fwd(g)))
        dg *= dg
        grad_sq = dg.sum(axis=(0, 2, 3))
        g_mag = norm_field(g)
        chunk_min = float(g_mag.min())
        min_abs = min(min_abs, chunk_min)
        min_det = min(min_det, float(det_field(g).min()))
        if chunk_min < floor:
            raise DegenerateDeformationError(
                f"deformation norm {chunk_min:.4g} fell below {floor:.4g}"
            )
        ratio = np.sqrt(grad_sq)
        ratio /= g_mag
        for i in range(g.shape[0]):
            vals[lo + i] = grid.lq_norm(ratio[i], q) ** r
    # compensated scalar reduction over the age axis
    total = 0.0
    comp = 0.0
    for c, v in zip(coeffs, vals):
        y = c * v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total, min_det, min_abs


def y_integrand_now(
    history: DeformationHistory,
    grid: SpectralGrid,
    q: float,
    r: float,
    mu: float = 1.0,
    age_grid: AgeGrid | None = None,
) -> float:
    """Kernel-weighted age integral of || |grad G| / |G| ||_{L^q}^r; see history_scan."""
    return history_scan(history, grid, q, r, mu, age_grid)[0]


def stress_gradient_norm(tau: np.ndarray, grid: SpectralGrid, q: float) -> float:
    """Discrete L^q norm of the pointwise Frobenius norm of grad tau."""
    dtau = grid.gradient(tau)  # (2, 2, 2, n, n): derivative axis first
    mag = np.sqrt(np.einsum("djkyx,djkyx->yx", dtau, dtau))
    return grid.lq_norm(mag, q)
