"""Cascade readout model: level diagram, transition rates, detector noise.

The readout signal starts at the excited-state level and relaxes to the
ground-state level through ``N`` intermediate states, each stage ``i``
carrying a transition rate ``stage_rates[i]`` and a contrast step
``levels[i] - levels[i+1]``. The detector adds white noise with inverse
power spectral density ``noise_inv_psd``.

Everything downstream depends only on dimensionless combinations, so the
constructors below build models in normalized units: unit signal lifetime,
ground level 0 and total contrast 1. Physical models can be normalized and
denormalized losslessly through :class:`NormalizedModel`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_PLUS = "+"
STATE_MINUS = "-"


@dataclass(frozen=True)
class CascadeModel:
    """Relaxation cascade with per-stage rates and detector levels.

    Attributes:
        n_intermediate: number N >= 0 of intermediate states.
        gamma: inverse readout-signal lifetime (sets the time unit).
        stage_rates: N+1 transition rates, stage i taking state i to i+1.
        levels: N+2 mean detector signals, state 0 first, ground state last.
        noise_inv_psd: R, inverse noise power spectral density.
    """

    n_intermediate: int
    gamma: float
    stage_rates: tuple[float, ...]
    levels: tuple[float, ...]
    noise_inv_psd: float

    def __post_init__(self):
        n = self.n_intermediate
        if n < 0:
            raise ValueError("n_intermediate must be >= 0")
        object.__setattr__(self, "stage_rates", tuple(float(g) for g in self.stage_rates))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if len(self.stage_rates) != n + 1:
            raise ValueError(f"expected {n + 1} stage rates, got {len(self.stage_rates)}")
        if len(self.levels) != n + 2:
            raise ValueError(f"expected {n + 2} levels, got {len(self.levels)}")
        if any(g <= 0 for g in self.stage_rates):
            raise ValueError("all stage rates must be positive")
        if self.noise_inv_psd <= 0:
            raise ValueError("noise_inv_psd must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not self.levels[0] > self.levels[-1]:
            raise ValueError("excited level must exceed ground level")

    @property
    def n_states(self) -> int:
        return self.n_intermediate + 2

    @property
    def contrast(self) -> float:
        """Total readout contrast between excited and ground levels."""
        return self.levels[0] - self.levels[-1]

    @property
    def snr_rate(self) -> float:
        """r = R (contrast/2)^2, the rate at which power SNR accumulates."""
        return self.noise_inv_psd * (self.contrast / 2.0) ** 2

    @property
    def snr_lifetime(self) -> float:
        """SNR gathered over one signal lifetime, r / gamma."""
        return self.snr_rate / self.gamma

    @property
    def snr_partial_sum(self) -> float:
        """Total SNR as the sum of the per-stage partial SNRs."""
        return sum(partial_snr(self, i) for i in range(self.n_intermediate + 1))


def symmetric_model(n_intermediate: int, snr: float) -> CascadeModel:
    """Cascade with all pre-ground levels at the excited value.

    Every stage fires at rate (N+1) * gamma so the signal lifetime stays at
    1/gamma regardless of N, and only the last transition is visible to the
    detector. ``snr`` is the lifetime-averaged value r / gamma.
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    n = int(n_intermediate)
    return CascadeModel(
        n_intermediate=n,
        gamma=1.0,
        stage_rates=(float(n + 1),) * (n + 1),
        levels=(1.0,) * (n + 1) + (0.0,),
        noise_inv_psd=4.0 * snr,
    )


def rate_matrix(model: CascadeModel) -> np.ndarray:
    """Generator L of the cascade, acting on column probability vectors.

    Column i carries -stage_rates[i] on the diagonal and +stage_rates[i]
    just below; the last column is zero (the ground state absorbs). Every
    column sums to zero.
    """
    d = model.n_states
    L = np.zeros((d, d))
    for i, g in enumerate(model.stage_rates):
        L[i, i] = -g
        L[i + 1, i] = g
    return L


def partial_snr(model: CascadeModel, i: int) -> float:
    """Per-stage SNR contribution R (contrast step)^2 / (4 rate)."""
    n = model.n_intermediate
    if not 0 <= i <= n:
        raise IndexError(f"stage index {i} out of range for N={n}")
    step = model.levels[i] - model.levels[i + 1]
    return model.noise_inv_psd * step * step / (4.0 * model.stage_rates[i])


def asymmetric_model(n_intermediate: int, snr: float, ratios,
                     mode: str = "contrast") -> CascadeModel:
    """Cascade whose partial SNRs are proportional to ``ratios`` and sum to ``snr``.

    In ``contrast`` mode all stages fire at rate (N+1) * gamma and the level
    steps are adjusted; in ``rates`` mode all level steps are equal and the
    stage rates are adjusted. Levels decrease monotonically from 1 to 0; the
    noise PSD is chosen so the partial-SNR targets hold with total contrast 1.
    With equal ratios the two modes construct the same model, and in both
    conventions the mean total jump time is exactly 1/gamma.
    """
    n = int(n_intermediate)
    ratios = tuple(float(x) for x in ratios)
    if len(ratios) != n + 1:
        raise ValueError(f"expected {n + 1} ratios, got {len(ratios)}")
    if not ratios:
        raise ValueError("ratios must be non-empty")
    if any(x <= 0 for x in ratios):
        raise ValueError("all ratios must be positive")
    if snr <= 0:
        raise ValueError("snr must be positive")

    w = np.asarray(ratios) / sum(ratios)
    if mode == "contrast":
        rates = (float(n + 1),) * (n + 1)
        steps = np.sqrt(w) / np.sqrt(w).sum()
        noise_inv_psd = 4.0 * (n + 1) * snr * np.sqrt(w).sum() ** 2
    elif mode == "rates":
        rates = tuple(1.0 / wi for wi in w)
        steps = np.full(n + 1, 1.0 / (n + 1))
        noise_inv_psd = 4.0 * snr * (n + 1) ** 2
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'contrast' or 'rates'")

    levels = tuple(np.concatenate([[1.0], 1.0 - np.cumsum(steps)]))
    return CascadeModel(
        n_intermediate=n,
        gamma=1.0,
        stage_rates=rates,
        levels=levels,
        noise_inv_psd=float(noise_inv_psd),
    )


@dataclass(frozen=True)
class NormalizedModel:
    """Dimensionless image of a cascade: unit lifetime, unit contrast, ground 0.

    ``snr`` is the sum of the partial SNRs; together with the normalized
    stage rates, contrast steps and noise PSD it pins the model up to units.
    """

    n_intermediate: int
    snr: float
    partial_snrs: tuple[float, ...]
    stage_rates: tuple[float, ...]
    stage_contrasts: tuple[float, ...]
    noise_inv_psd: float


def normalize(model: CascadeModel) -> NormalizedModel:
    """Strip units: time in 1/gamma, signal measured in total-contrast units."""
    n = model.n_intermediate
    dI = model.contrast
    partials = tuple(partial_snr(model, i) for i in range(n + 1))
    return NormalizedModel(
        n_intermediate=n,
        snr=sum(partials),
        partial_snrs=partials,
        stage_rates=tuple(g / model.gamma for g in model.stage_rates),
        stage_contrasts=tuple((model.levels[i] - model.levels[i + 1]) / dI
                              for i in range(n + 1)),
        noise_inv_psd=model.noise_inv_psd * dI ** 2 / model.gamma,
    )


def denormalize(nm: NormalizedModel, gamma: float = 1.0, contrast: float = 1.0,
                ground_level: float = 0.0) -> CascadeModel:
    """Rebuild a physical model from its dimensionless image."""
    steps = np.asarray(nm.stage_contrasts) * contrast
    levels = tuple(np.concatenate([[ground_level + contrast],
                                   ground_level + contrast - np.cumsum(steps)]))
    return CascadeModel(
        n_intermediate=nm.n_intermediate,
        gamma=gamma,
        stage_rates=tuple(g * gamma for g in nm.stage_rates),
        levels=levels,
        noise_inv_psd=nm.noise_inv_psd * gamma / contrast ** 2,
    )
