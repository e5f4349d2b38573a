"""Monte Carlo estimation of readout error rates.

Trials are sharded by index: trial ``i`` for a given initial state owns the
counter-based stream ``(base_seed, 2 i + state_code)``, so estimates are
reproducible bit-for-bit regardless of chunking or worker count, and
aggregation is a plain sum of error counts.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .filtering import filter_log_ratio_batch
from .model import STATE_MINUS, STATE_PLUS, CascadeModel
from .simulate import default_dt, max_dt, simulate_samples_batch
from .statistics import ErrorRates

_STATE_CODE = {STATE_PLUS: 0, STATE_MINUS: 1}
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def derive_seed(base_seed: int, salt: int) -> int:
    """Stable 64-bit mix of a base seed and a salt (splitmix64 finalizer)."""
    z = (base_seed ^ ((salt * _GOLDEN) & _MASK64)) & _MASK64
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run description.

    ``decision`` is "filter" (likelihood ratio against 1) or "threshold"
    (time average against ``threshold``). ``t`` and ``dt`` default to the
    plateau horizon 5/gamma and the simulator's default bin width for the
    model at hand. ``rk4_substeps`` is the filter's RK4 refinement per bin.
    """

    trials_per_state: int
    t: float | None = None
    dt: float | None = None
    decision: str = "filter"
    threshold: float | None = None
    base_seed: int = 0
    rk4_substeps: int = 2
    chunk_bytes: int = 1 << 26

    def __post_init__(self):
        if self.trials_per_state < 1:
            raise ValueError("trials_per_state must be >= 1")
        if self.decision not in ("filter", "threshold"):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision == "threshold" and self.threshold is None:
            raise ValueError("threshold decision requires a threshold value")

    def resolve(self, model: CascadeModel) -> "McConfig":
        """Fill t/dt defaults and snap t to a whole number of bins."""
        dt = self.dt if self.dt is not None else default_dt(model)
        if dt > max_dt(model) * (1 + 1e-12):
            raise ValueError(f"dt={dt:.3g} violates the simulator bound {max_dt(model):.3g}")
        t = self.t if self.t is not None else 5.0 / model.gamma
        n_bins = max(1, int(round(t / dt)))
        return replace(self, t=n_bins * dt, dt=dt)


@dataclass(frozen=True)
class McResult:
    rates: ErrorRates
    errors_plus: int
    errors_minus: int
    trials_per_state: int
    elapsed_s: float


def binomial_stderr(errors: int, trials: int) -> float:
    """Binomial standard error of an error-rate estimate.

    For degenerate counts (0 or all trials) the plain formula collapses to
    zero, so the Wilson-score half-width at one sigma, 1/(2 (n + 1)), is
    returned instead to keep error bars meaningful.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= errors <= trials:
        raise ValueError("errors must lie in [0, trials]")
    if errors == 0 or errors == trials:
        return 1.0 / (2.0 * (trials + 1))
    p = errors / trials
    return math.sqrt(p * (1.0 - p) / trials)


def _chunk_error_count(model: CascadeModel, cfg: McConfig, state: str,
                       lo: int, hi: int) -> int:
    """Errors among trials [lo, hi) for one initial state."""
    n_bins = int(round(cfg.t / cfg.dt))
    code = _STATE_CODE[state]
    indices = [2 * trial + code for trial in range(lo, hi)]
    samples = simulate_samples_batch(model, state, n_bins, cfg.dt,
                                     cfg.base_seed, indices)
    if cfg.decision == "filter":
        log_lambda = filter_log_ratio_batch(model, samples, cfg.dt,
                                            substeps=cfg.rk4_substeps)
        decided_plus = log_lambda > 0.0
    else:
        decided_plus = samples.mean(axis=1) > cfg.threshold
    wrong = ~decided_plus if state == STATE_PLUS else decided_plus
    return int(np.count_nonzero(wrong))


def estimate_error(model: CascadeModel, cfg: McConfig, *,
                   threads: int | None = None) -> McResult:
    """Estimate conditional and average error rates by repeated simulation.

    Runs ``cfg.trials_per_state`` records per initial state, applies the
    configured decision, and attaches binomial standard errors. The counts
    depend only on (model, cfg); ``threads`` distributes chunks over worker
    processes without changing the result.
    """
    cfg = cfg.resolve(model)
    threads = 1 if threads is None else max(1, threads)
    n_bins = int(round(cfg.t / cfg.dt))
    chunk = max(64, min(cfg.trials_per_state,
                        int(cfg.chunk_bytes / (8 * max(1, n_bins)))))

    tasks = []
    for state in (STATE_PLUS, STATE_MINUS):
        for lo in range(0, cfg.trials_per_state, chunk):
            tasks.append((state, lo, min(lo + chunk, cfg.trials_per_state)))

    start = time.perf_counter()
    counts = {STATE_PLUS: 0, STATE_MINUS: 0}
    if threads == 1:
        for state, lo, hi in tasks:
            counts[state] += _chunk_error_count(model, cfg, state, lo, hi)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [(state, pool.submit(_chunk_error_count, model, cfg, state, lo, hi))
                       for state, lo, hi in tasks]
            for state, fut in futures:
                counts[state] += fut.result()
    elapsed = time.perf_counter() - start

    n = cfg.trials_per_state
    se_p = binomial_stderr(counts[STATE_PLUS], n)
    se_m = binomial_stderr(counts[STATE_MINUS], n)
    rates = ErrorRates(counts[STATE_PLUS] / n, counts[STATE_MINUS] / n,
                       stderr=0.5 * math.hypot(se_p, se_m))
    return McResult(rates=rates, errors_plus=counts[STATE_PLUS],
                    errors_minus=counts[STATE_MINUS], trials_per_state=n,
                    elapsed_s=elapsed)


def plateau_check(model: CascadeModel, cfg: McConfig, horizons,
                  *, threads: int | None = None) -> float:
    """Smallest horizon whose error rate matches the longest one within 1 sigma.

    Reuses the same per-trial streams at every horizon, so longer windows
    extend the shorter ones and the comparison benefits from common random
    numbers.
    """
    horizons = [float(h) for h in horizons]
    if len(horizons) < 2 or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("need at least two strictly increasing horizons")
    results = [estimate_error(model, replace(cfg, t=h), threads=threads)
               for h in horizons]
    ref = results[-1]
    for h, res in zip(horizons, results):
        combined = math.hypot(res.rates.stderr, ref.rates.stderr)
        if abs(res.rates.eps_avg - ref.rates.eps_avg) <= combined:
            return h
    return horizons[-1]
