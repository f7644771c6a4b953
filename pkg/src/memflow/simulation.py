"""End-to-end simulation driver.

Per base step: assemble the stress from the history, advance the velocity
(substepping under the advective CFL bound with the stress frozen), advance
the history and, when enabled, the differential oracle with the same pair of
velocity samples, then monitor.  The loop is single-writer; all reductions
run in fixed order, so identical configurations produce byte-identical
diagnostics regardless of the FFT worker count.

Exit codes: 0 clean, 2 non-finite state (the last periodic checkpoint is
left on disk), 3 monitored-bound violation when configured fatal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agegrid import build_age_grid
from .config import ConfigError, SimulationConfig
from .constitutive import model_catalog
from .diagnostics import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    MonitorConfig,
    OracleState,
    monitor,
    oldroyd_differential_step,
)
from .snapshots import read_checkpoint, read_field, write_checkpoint, write_field
from .spectral import SpectralGrid, random_band_limited_velocity, taylor_green
from .stepper import FlowNaNError, FlowState, advance_flow
from .stress import assemble_stress
from .transport import DeformationHistory, HistoryNaNError, init_history, stretch_advect_step

EXIT_OK = 0
EXIT_NAN = 2
EXIT_VIOLATION = 3


@dataclass
class RunResult:
    exit_code: int
    records: list[DiagnosticsRecord]
    message: str = ""
    state: FlowState | None = None
    history: DeformationHistory | None = None
    oracle: OracleState | None = None
    tau: np.ndarray | None = None
    measure: object = None
    kernel: object = None
    oracle_gap: float | None = field(default=None)

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def initial_velocity(cfg: SimulationConfig, grid: SpectralGrid) -> np.ndarray:
    kind = cfg.velocity_kind
    if kind == "taylor-green":
        return taylor_green(grid, cfg.velocity_amplitude)
    if kind == "random-band":
        return random_band_limited_velocity(grid, cfg.velocity_seed, cfg.velocity_band, cfg.velocity_amplitude)
    if kind == "snapshot":
        u = read_field(cfg.velocity_path)
        if u.shape != (2, grid.n, grid.n):
            raise ConfigError(f"velocity snapshot shape {u.shape} does not match grid {grid.n}")
        return u
    if kind == "zero":
        return np.zeros((2, grid.n, grid.n))
    raise ConfigError(f"unknown velocity kind {kind!r}")


def _relative_l2_gap(grid: SpectralGrid, a: np.ndarray, b: np.ndarray) -> float:
    num = np.sqrt(grid.l2_norm_sq(a - b))
    den = np.sqrt(grid.l2_norm_sq(b))
    return float(num / max(den, 1e-300))


def run(cfg: SimulationConfig, restart_from=None, progress=None) -> RunResult:
    """Execute the configured simulation; never raises for solver failures."""
    if cfg.oracle and cfg.model_name != "oldroyd-b":
        raise ConfigError("the differential oracle requires model.name = oldroyd-b")

    grid = SpectralGrid(cfg.n)
    params = {k: v for k, v in cfg.model_params.items() if v is not None}
    kernel, measure = model_catalog(cfg.model_name, **params)
    max_nodes = int(cfg.memory_cap_mb * 2**20 // (4 * cfg.n * cfg.n * 8))
    age_grid = build_age_grid(kernel, cfg.dt, cfg.eps_tail, max_nodes=max_nodes)

    state = FlowState(grid, initial_velocity(cfg, grid), cfg.viscosity)
    if cfg.initial_history.startswith("snapshot:"):
        stack = read_field(cfg.initial_history.split(":", 1)[1])
        history = init_history(stack, grid, age_grid, mu=cfg.mu_min)
    else:
        history = init_history(cfg.initial_history, grid, age_grid, mu=cfg.mu_min)
    oracle = OracleState(
        np.zeros((2, 2, grid.n, grid.n)),
        lam=float(params.get("lam", 1.0)),
        mu_p=float(params.get("mu_p", 1.0)),
    ) if cfg.oracle else None

    mcfg = MonitorConfig(
        q=cfg.q, r=cfg.r, mu=cfg.mu_min, det_tol=cfg.det_tol, stress_tol=cfg.stress_tol
    )

    step0 = 0
    y_value = 0.0
    yi_prev = None
    if restart_from is not None:
        chk = read_checkpoint(restart_from)
        step0 = chk["step"]
        y_value = chk["y_value"]
        yi_prev = chk["y_integrand"]
        state = FlowState(grid, chk["u"], cfg.viscosity, t=chk["t"])
        history = DeformationHistory(chk["history"], age_grid, head=chk["head"], generation=step0)
        if oracle is not None and chk["oracle_tau"] is not None:
            oracle.tau = chk["oracle_tau"]

    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    csv_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_fh = open(out_dir / "diagnostics.csv", "w")
        csv_fh.write(",".join(CSV_COLUMNS) + "\n")

    records: list[DiagnosticsRecord] = []

    def log(rec: DiagnosticsRecord):
        records.append(rec)
        if csv_fh is not None:
            csv_fh.write(rec.csv_row() + "\n")

    def close(code: int, message: str, tau) -> RunResult:
        if csv_fh is not None:
            csv_fh.close()
        gap = None
        if oracle is not None and tau is not None:
            gap = _relative_l2_gap(grid, tau, oracle.tau)
        return RunResult(
            exit_code=code,
            records=records,
            message=message,
            state=state,
            history=history,
            oracle=oracle,
            tau=tau,
            measure=measure,
            kernel=kernel,
            oracle_gap=gap,
        )

    tau = assemble_stress(history, measure)
    rec = monitor(state, history, tau, measure, mcfg, y_value)
    if yi_prev is None:
        yi_prev = rec.y_integrand
    log(rec)
    if cfg.fatal_on_violation and rec.flags:
        return close(EXIT_VIOLATION, f"initial state violates bounds: {rec.flags}", tau)

    n_steps = cfg.n_steps
    log_dt = cfg.cadence * cfg.dt
    for step in range(step0 + 1, n_steps + 1):
        u_old = state.u
        try:
            advance_flow(state, tau, cfg.dt, cfg.cfl_safety)
            state.t = step * cfg.dt  # re-pin against substep roundoff drift
            stretch_advect_step(history, grid, u_old, state.u, cfg.dt)
            if oracle is not None:
                oldroyd_differential_step(oracle, grid, u_old, state.u, cfg.dt)
            tau = assemble_stress(history, measure)
        except (FlowNaNError, HistoryNaNError, FloatingPointError) as exc:
            return close(EXIT_NAN, str(exc), None)

        if step % cfg.cadence == 0 or step == n_steps:
            rec = monitor(state, history, tau, measure, mcfg, y_value)
            y_value += 0.5 * log_dt * (yi_prev + rec.y_integrand)
            yi_prev = rec.y_integrand
            rec.y_value = y_value
            log(rec)
            if progress is not None:
                progress(step, n_steps, rec)
            if cfg.fatal_on_violation and rec.flags:
                return close(EXIT_VIOLATION, f"bounds violated at t = {state.t:.6g}: {rec.flags}", tau)

        if out_dir is not None and cfg.snapshot_every and step % cfg.snapshot_every == 0:
            _write_snapshots(out_dir, step, state, tau, history, cfg)
            if cfg.checkpoint:
                write_checkpoint(
                    out_dir / "checkpoint",
                    step=step,
                    t=state.t,
                    y_value=y_value,
                    y_integrand=yi_prev,
                    u=state.u,
                    history=history.payload,
                    head=history.head,
                    oracle_tau=None if oracle is None else oracle.tau,
                )

    if out_dir is not None and cfg.checkpoint:
        write_checkpoint(
            out_dir / "checkpoint",
            step=n_steps,
            t=state.t,
            y_value=y_value,
            y_integrand=yi_prev,
            u=state.u,
            history=history.payload,
            head=history.head,
            oracle_tau=None if oracle is None else oracle.tau,
        )
    return close(EXIT_OK, "completed", tau)


def _write_snapshots(out_dir: Path, step: int, state: FlowState, tau, history, cfg: SimulationConfig):
    d = out_dir / f"snap_{step:06d}"
    d.mkdir(parents=True, exist_ok=True)
    write_field(d / "u.fld", state.u)
    write_field(d / "tau.fld", tau)
    for j in cfg.history_slices:
        if 0 <= j < history.n_slices:
            write_field(d / f"g_{j:05d}.fld", history.slice(j))
