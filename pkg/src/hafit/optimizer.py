"""Gradient-based optimization of the six insertion gains.

The pipeline is degraded speech -> hearing aid -> hearing-impaired model,
compared with clean speech -> normal-hearing model. Exact gradients are
computed in forward mode: the six gain tangents travel through the FIR
design, the ear filters, spectral smearing and loudness recruitment next to
the primal signal. A central finite-difference mode serves as the oracle.

Losses are evaluated on signals expressed in units of 20 uPa (the
calibration reference), so the level term switches on when the aided
output exceeds the reference by at least that RMS pressure.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from hafit.ha_processor import (
    DEFAULT_GAIN_BOUNDS,
    DEFAULT_TAPS,
    Fitting,
    process,
    process_jvp,
    project_gains,
)
from hafit.hearing_loss import Audiogram, HearingLossModel
from hafit.noise_suppression import WienerConfig, wiener_enhance
from hafit.objective import DEFAULT_ALPHA, LossBreakdown, total_loss, total_loss_jvp
from hafit.prescriptions import nal_r
from hafit.signal_core import (
    DEFAULT_CALIBRATION,
    HAMMING_STFT,
    HANN_STFT,
    PRESENTATION_LEVEL_DB,
    SAMPLE_RATE,
    Calibration,
    StftConfig,
    normalize_spl,
)
from hafit.synthetic import Utterance

log = logging.getLogger(__name__)

GRADIENT_MODES = ("exact", "finite_difference")
FD_STEP_DB = 1e-3


class NonFiniteLossError(FloatingPointError):
    def __init__(self, utterance_id: str, detail: str = ""):
        super().__init__(f"non-finite loss for utterance {utterance_id!r} {detail}".strip())
        self.utterance_id = utterance_id


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 500
    learning_rate: float = 1e-2
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    gradient_mode: str = "exact"
    gain_bounds: tuple[float, float] = DEFAULT_GAIN_BOUNDS
    train_seconds: float | None = 3.0
    val_every: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    fd_step: float = FD_STEP_DB
    taps: int = DEFAULT_TAPS

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.val_every < 1:
            raise ValueError("val_every must be positive")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        lo, hi = self.gain_bounds
        if not lo < hi:
            raise ValueError("gain bounds must be increasing")
        if self.train_seconds is not None and self.train_seconds <= 0:
            raise ValueError("train_seconds must be positive")
        object.__setattr__(self, "gain_bounds", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gain_bounds"] = list(self.gain_bounds)
        return d


@dataclass(frozen=True)
class AdamState:
    m: NDArray[np.float64]
    v: NDArray[np.float64]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int = 6, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, beta1, beta2, eps)


def adam_step(
    s: AdamState, g: ArrayLike, f: Fitting, lr: float, bounds: tuple[float, float] | None = None
) -> tuple[AdamState, Fitting]:
    """One bias-corrected Adam update followed by projection onto the bounds."""
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    m = s.beta1 * s.m + (1.0 - s.beta1) * g
    v = s.beta2 * s.v + (1.0 - s.beta2) * g * g
    t = s.step + 1
    m_hat = m / (1.0 - s.beta1**t)
    v_hat = v / (1.0 - s.beta2**t)
    gains = f.gains - lr * m_hat / (np.sqrt(v_hat) + s.eps)
    gains = project_gains(gains, bounds or f.bounds)
    return AdamState(m, v, t, s.beta1, s.beta2, s.eps), f.replace(gains_db=gains)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Example:
    """A degraded input paired with its normal-hearing reference output."""

    id: str
    degraded: NDArray[np.float64]
    reference: NDArray[np.float64]


class FittingProblem:
    """Loss and gradient of the fitting pipeline for one audiogram."""

    def __init__(
        self,
        audiogram: Audiogram,
        alpha: float = DEFAULT_ALPHA,
        calibration: Calibration = DEFAULT_CALIBRATION,
        taps: int = DEFAULT_TAPS,
        loss_config: StftConfig = HANN_STFT,
        smearing_config: StftConfig = HAMMING_STFT,
    ):
        self.audiogram = audiogram
        self.alpha = alpha
        self.calibration = calibration
        self.taps = taps
        self.loss_config = loss_config
        self.smearing_config = smearing_config
        self.hi = HearingLossModel.build(audiogram, calibration=calibration, smearing_config=smearing_config)
        self._nh: HearingLossModel | None = None

    @property
    def nh(self) -> HearingLossModel:
        if self._nh is None:
            self._nh = HearingLossModel.build(
                Audiogram.normal(), calibration=self.calibration, smearing_config=self.smearing_config
            )
        return self._nh

    def reference(self, clean: ArrayLike) -> NDArray[np.float64]:
        return self.nh.simulate(clean)

    def example(self, id: str, degraded: ArrayLike, clean: ArrayLike) -> Example:
        d = np.asarray(degraded, dtype=np.float64)
        c = np.asarray(clean, dtype=np.float64)
        if d.shape != c.shape:
            raise ValueError(f"{id}: degraded and clean lengths differ")
        return Example(id, d, self.reference(c))

    def _scaled(self, x):
        return x / self.calibration.ref_rms

    def aided(self, gains: ArrayLike, degraded: ArrayLike) -> NDArray[np.float64]:
        return self.hi.simulate(process(degraded, np.asarray(gains, np.float64), self.taps))

    def loss(self, gains: ArrayLike, ex: Example) -> LossBreakdown:
        out = total_loss(
            self._scaled(self.aided(gains, ex.degraded)), self._scaled(ex.reference), self.alpha, self.loss_config
        )
        if not np.isfinite(out.total):
            raise NonFiniteLossError(ex.id)
        return out

    def loss_and_grad(self, gains: ArrayLike, ex: Example) -> tuple[LossBreakdown, NDArray[np.float64]]:
        y, dy = process_jvp(ex.degraded, gains, self.taps)
        z, dz = self.hi.simulate_jvp(y, dy)
        out, grad = total_loss_jvp(
            self._scaled(z), self._scaled(dz), self._scaled(ex.reference), self.alpha, self.loss_config
        )
        if not (np.isfinite(out.total) and np.all(np.isfinite(grad))):
            raise NonFiniteLossError(ex.id)
        return out, grad

    def fd_grad(self, gains: ArrayLike, ex: Example, step: float = FD_STEP_DB) -> tuple[LossBreakdown, NDArray[np.float64]]:
        """Central differences: 13 pipeline evaluations."""
        g = np.asarray(gains, dtype=np.float64)
        centre = self.loss(g, ex)
        grad = np.empty(len(g))
        for j in range(len(g)):
            e = np.zeros(len(g))
            e[j] = step
            grad[j] = (self.loss(g + e, ex).total - self.loss(g - e, ex).total) / (2.0 * step)
        return centre, grad


def pipeline_loss(
    f: Fitting | ArrayLike,
    degraded: ArrayLike,
    clean: ArrayLike,
    a: Audiogram,
    alpha: float = DEFAULT_ALPHA,
    problem: FittingProblem | None = None,
) -> LossBreakdown:
    """Loss of fitting `f` for one (degraded, clean) pair."""
    problem = problem or FittingProblem(a, alpha)
    gains = f.gains if isinstance(f, Fitting) else np.asarray(f, np.float64)
    return problem.loss(gains, problem.example("pair", degraded, clean))


def _batch_grad(problem: FittingProblem, gains, batch: Sequence[Example], mode: str, step: float):
    if not batch:
        raise ValueError("gradient needs a non-empty batch")
    fn = problem.loss_and_grad if mode == "exact" else (lambda g, ex: problem.fd_grad(g, ex, step))
    losses, grads = [], []
    for ex in batch:
        out, g = fn(gains, ex)
        losses.append(out.total)
        grads.append(g)
    return np.array(losses), np.mean(grads, axis=0)


def gradient(
    f: Fitting | ArrayLike,
    batch: Sequence[Example] | Sequence[tuple],
    a: Audiogram | FittingProblem,
    cfg: TrainConfig = TrainConfig(),
) -> NDArray[np.float64]:
    """Gradient of the mean batch loss with respect to the six gains (dB/dB).

    `batch` holds prepared :class:`Example` objects or ``(degraded, clean)``
    tuples; `a` may be a prebuilt :class:`FittingProblem` to reuse models.
    """
    problem = a if isinstance(a, FittingProblem) else FittingProblem(a, cfg.alpha, taps=cfg.taps)
    examples = [
        item if isinstance(item, Example) else problem.example(f"batch[{i}]", *item) for i, item in enumerate(batch)
    ]
    gains = f.gains if isinstance(f, Fitting) else np.asarray(f, np.float64)
    return _batch_grad(problem, gains, examples, cfg.gradient_mode, cfg.fd_step)[1]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

_LABELS = {("clean", "none"): "G", ("noisy", "none"): "Cn", ("noisy", "wiener"): "Cw"}


def provenance_label(source: str, front_end: str) -> str:
    try:
        return _LABELS[(source, front_end)]
    except KeyError:
        raise ValueError(f"no fitting label for source={source!r}, front_end={front_end!r}") from None


@dataclass(frozen=True, eq=False)
class TrainRun:
    initial: Fitting
    final: Fitting
    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]
    label: str
    config: TrainConfig
    initial_loss: float
    final_loss: float
    history: tuple[Fitting, ...] = field(repr=False)
    best_val: Fitting | None = None

    def loss_csv(self) -> str:
        rows = ["epoch,train_loss,val_loss"]
        for i, (t, v) in enumerate(zip(self.train_loss, self.val_loss), start=1):
            rows.append(f"{i},{t!r},{'' if np.isnan(v) else repr(v)}")
        return "\n".join(rows) + "\n"


def prepare_examples(
    problem: FittingProblem,
    utterances: Iterable[Utterance],
    source: str = "clean",
    front_end: str = "none",
    seconds: float | None = None,
    wiener: WienerConfig = WienerConfig(),
) -> list[Example]:
    """Crop, enhance and level-normalize utterances; cache NH references.

    Cropping keeps the start of the utterance so the noise-only lead-in
    remains available to the Wiener front end.
    """
    if source not in ("clean", "noisy"):
        raise ValueError(f"unknown source {source!r}")
    if front_end not in ("none", "wiener"):
        raise ValueError(f"unknown front end {front_end!r}")
    out = []
    for u in utterances:
        clean = np.asarray(u.clean, np.float64)
        degraded = np.asarray(u.clean if source == "clean" else u.noisy, np.float64)
        if seconds is not None:
            n = int(round(seconds * SAMPLE_RATE))
            clean = _fit_length(clean, n)
            degraded = _fit_length(degraded, n)
        if front_end == "wiener":
            degraded = wiener_enhance(degraded, wiener)
        clean = normalize_spl(clean, PRESENTATION_LEVEL_DB, problem.calibration)
        degraded = normalize_spl(degraded, PRESENTATION_LEVEL_DB, problem.calibration)
        out.append(problem.example(u.id, degraded, clean))
    return out


def _fit_length(x: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    return x[:n] if len(x) >= n else np.pad(x, (0, n - len(x)))


def _mean_loss(problem: FittingProblem, gains, examples: Sequence[Example]) -> float:
    return float(np.mean([problem.loss(gains, ex).total for ex in examples]))


def train(
    dataset: Sequence[Utterance],
    a: Audiogram,
    cfg: TrainConfig = TrainConfig(),
    front_end: str = "none",
    source: str = "clean",
    validation: Sequence[Utterance] = (),
    problem: FittingProblem | None = None,
    progress: Callable[[int, float], None] | None = None,
) -> TrainRun:
    """Adam optimization from the NAL-R prescription.

    Each epoch shuffles the training set with a generator seeded from
    ``cfg.seed``, and takes one projected Adam step per batch. The epoch's
    training loss is the mean of the per-utterance losses seen during it.
    Validation loss is recorded every ``cfg.val_every`` epochs and at the
    last epoch (NaN elsewhere).
    """
    label = provenance_label(source, front_end)
    if len(dataset) == 0:
        raise ValueError("training needs at least one utterance")
    problem = problem or FittingProblem(a, cfg.alpha, taps=cfg.taps)
    if problem.audiogram != a or problem.alpha != cfg.alpha:
        raise ValueError("problem does not match the audiogram/alpha of this run")
    train_ex = prepare_examples(problem, dataset, source, front_end, cfg.train_seconds)
    val_ex = prepare_examples(problem, validation, source, front_end, cfg.train_seconds)

    init = nal_r(a)
    fitting = Fitting(project_gains(init.gains, cfg.gain_bounds), label, cfg.gain_bounds)
    state = AdamState.zeros(len(init.gains), cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    initial_loss = _mean_loss(problem, fitting.gains, train_ex)

    train_loss, val_loss, history = [], [], [fitting]
    best_val, best = None, np.inf
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_ex))
        seen = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_ex[i] for i in order[start:start + cfg.batch_size]]
            losses, g = _batch_grad(problem, fitting.gains, batch, cfg.gradient_mode, cfg.fd_step)
            seen.extend(losses)
            state, fitting = adam_step(state, g, fitting, cfg.learning_rate, cfg.gain_bounds)
        train_loss.append(float(np.mean(seen)))
        history.append(fitting)
        v = np.nan
        if val_ex and (epoch % cfg.val_every == 0 or epoch == cfg.epochs):
            v = _mean_loss(problem, fitting.gains, val_ex)
            if v < best:
                best, best_val = v, fitting
        val_loss.append(v)
        log.info("epoch %d train %.4f val %s gains %s", epoch, train_loss[-1], v, np.round(fitting.gains, 3))
        if progress is not None:
            progress(epoch, train_loss[-1])

    final_loss = _mean_loss(problem, fitting.gains, train_ex) if cfg.epochs else initial_loss
    return TrainRun(
        initial=init,
        final=fitting,
        train_loss=tuple(train_loss),
        val_loss=tuple(val_loss),
        label=label,
        config=cfg,
        initial_loss=initial_loss,
        final_loss=final_loss,
        history=tuple(history),
        best_val=best_val,
    )
