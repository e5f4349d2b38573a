"""Stochastic detector records for the cascade model.

Jump times are drawn continuously (exact exponential stage increments) and
only then projected onto detector bins by time-weighted averaging of the
level sequence, so the jump-time statistics carry no discretization bias.
Bin noise is Gaussian with variance 1/(R dt), the white-noise average over
a bin.

Randomness is counter-based: every trial owns a Philox stream keyed by
(seed, stream index), so trials can be generated in any order, on any
number of workers, and reproduce bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import STATE_MINUS, STATE_PLUS, CascadeModel

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream addressed by (seed, index)."""

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        # 128-bit Philox key: seed in the low word, stream index in the high
        # word; distinct (seed, index) pairs give independent streams.
        key = (self.seed & _MASK64) | ((self.index & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Trajectory:
    """One discretized detector record.

    ``samples[k]`` is the bin-averaged signal over [k dt, (k+1) dt);
    ``jump_times`` holds the cumulative stage-transition times (empty for a
    ground-state record). ``seed``/``stream_index`` identify the stream that
    produced the record.
    """

    dt: float
    samples: np.ndarray
    initial_state: str
    jump_times: np.ndarray
    seed: int
    stream_index: int = 0

    @property
    def n_bins(self) -> int:
        return len(self.samples)

    @property
    def total_time(self) -> float:
        return self.n_bins * self.dt


def max_dt(model: CascadeModel) -> float:
    """Coarsest bin width the simulator accepts: 1/(10 max(r, stage rates))."""
    return 1.0 / (10.0 * max(model.snr_rate, max(model.stage_rates)))


def default_dt(model: CascadeModel) -> float:
    """Default bin width resolving both noise averaging and the fastest stage."""
    return 1.0 / (20.0 * max(model.snr_rate, max(model.stage_rates)))


def sample_jump_times(model: CascadeModel, rng: RngStream) -> np.ndarray:
    """Cumulative stage-transition times: N+1 independent exponential legs."""
    gen = rng.generator()
    increments = np.array([gen.exponential(1.0 / g) for g in model.stage_rates])
    return np.cumsum(increments)


def _bin_mean_levels(levels: np.ndarray, boundaries: np.ndarray,
                     n_bins: int, dt: float) -> np.ndarray:
    """Time-weighted mean level per bin for a piecewise-constant signal.

    ``boundaries`` are the strictly increasing times at which the level
    switches from levels[i] to levels[i+1].
    """
    edges_lo = np.arange(n_bins) * dt
    edges_hi = edges_lo + dt
    seg_start = np.concatenate([[0.0], boundaries])
    seg_end = np.concatenate([boundaries, [np.inf]])
    mean = np.zeros(n_bins)
    for lv, a, b in zip(levels, seg_start, seg_end):
        if a >= n_bins * dt or b <= 0:
            continue
        overlap = np.clip(np.minimum(b, edges_hi) - np.maximum(a, edges_lo), 0.0, dt)
        mean += lv * overlap
    return mean / dt


def _compose_samples(model: CascadeModel, z: np.ndarray, jumps,
                     n_bins: int, dt: float) -> np.ndarray:
    """Record from unit noise z and jump times; shared by both entry points.

    The bin mean of the piecewise-constant level sequence is the ground
    level plus, for each contrast-carrying stage boundary, the step height
    times the fraction of the bin spent before that jump (a clipped ramp).
    Works on a single record (z of shape (n_bins,)) or a batch
    ((n_trials, n_bins) with jumps (n_trials, N+1)); the arithmetic is
    elementwise so both paths produce bit-identical values.
    """
    out = z * np.sqrt(1.0 / (model.noise_inv_psd * dt))
    out += model.levels[-1]
    if jumps is not None:
        edges_lo = np.arange(n_bins) * dt
        if out.ndim == 2:
            edges_lo = edges_lo[None, :]
        for i in range(model.n_intermediate + 1):
            step = model.levels[i] - model.levels[i + 1]
            if step != 0.0:
                tau_i = jumps[..., i, None] if out.ndim == 2 else jumps[i]
                out += step * np.clip((tau_i - edges_lo) / dt, 0.0, 1.0)
    return out


def simulate_trajectory(model: CascadeModel, initial_state: str, t: float,
                        dt: float, rng: RngStream) -> Trajectory:
    """Generate one detector record of duration t with bin width dt."""
    if t <= 0:
        raise ValueError("t must be positive")
    if dt <= 0 or dt > t:
        raise ValueError("dt must satisfy 0 < dt <= t")
    if dt > max_dt(model) * (1 + 1e-12):
        raise ValueError(
            f"dt={dt:.3g} too coarse: must not exceed 1/(10 max(r, stage rates))"
            f" = {max_dt(model):.3g}")
    n_bins = int(round(t / dt))
    if abs(n_bins * dt - t) > 1e-9 * t:
        raise ValueError("t must be an integer number of bins")
    if initial_state not in (STATE_PLUS, STATE_MINUS):
        raise ValueError(f"unknown initial state {initial_state!r}")

    gen = rng.generator()
    if initial_state == STATE_PLUS:
        increments = np.array([gen.exponential(1.0 / g) for g in model.stage_rates])
        jumps = np.cumsum(increments)
    else:
        jumps = None
    z = gen.standard_normal(n_bins)
    samples = _compose_samples(model, z, jumps, n_bins, dt)
    return Trajectory(dt=dt, samples=samples, initial_state=initial_state,
                      jump_times=jumps if jumps is not None else np.array([]),
                      seed=rng.seed, stream_index=rng.index)


def simulate_samples_batch(model: CascadeModel, initial_state: str, n_bins: int,
                           dt: float, seed: int, stream_indices) -> np.ndarray:
    """Sample matrix (n_trials, n_bins) for a block of per-trial streams.

    Draw-for-draw identical to stacking ``simulate_trajectory`` outputs;
    the level projection is batched across trials (one clipped-ramp term
    per contrast-carrying stage boundary) to keep Monte Carlo fast.
    """
    stream_indices = list(stream_indices)
    n = len(stream_indices)
    z = np.empty((n, n_bins))
    excited = initial_state == STATE_PLUS
    jumps = np.empty((n, model.n_intermediate + 1)) if excited else None
    for row, idx in enumerate(stream_indices):
        gen = RngStream(seed, idx).generator()
        if excited:
            increments = np.array([gen.exponential(1.0 / g) for g in model.stage_rates])
            jumps[row] = np.cumsum(increments)
        z[row] = gen.standard_normal(n_bins)
    return _compose_samples(model, z, jumps, n_bins, dt)


def time_average(traj: Trajectory) -> float:
    """Mean of the bin values, i.e. (1/t) integral of the record."""
    if traj.n_bins == 0:
        raise ValueError("cannot average an empty trajectory")
    return float(np.mean(traj.samples))
