"""Black-box grid search for attack parameters, plus success-rate metrics.

Two objectives are supported. The detector objective scores a candidate
fringe by ``(y - label)^2`` against a true label ``y`` (1 in practice), so
any candidate that blinds the detector scores 1. The dodging objective
scores the Euclidean distance between the embeddings of two faces carrying
the same perturbation; a candidate succeeds when that distance drops to the
verification threshold or below.

The search itself is a greedy exhaustive sweep of the integer fringe grid,
width outermost, interval next, tilt innermost, with an optional early exit
on the first success. Candidates whose realized drive would flicker
visibly are never evaluated; they are reported separately.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .bridge import AdapterError
from .detectors import (
    DetectorVerdict,
    Embedding,
    feature_distance,
    oracle_embedding,
    oracle_label,
)
from .perturb import PerturbationParams, theta_to_signal
from .sensor import SensorConfig, expose, render_pattern
from .signal import PulseParams, check_imperceptible
from .validation import as_rng, check_image

MODE_FIRST_HIT = "first-hit"
MODE_COLLECT_ALL = "collect-all"


@dataclass(frozen=True)
class SearchSpace:
    """Grid bounds and traversal settings for the parameter search."""

    b_max: int
    s_max: int
    alpha_max: float = 0.0
    b_step: int = 1
    s_step: int = 1
    alpha_step: float = 45.0
    max_iters: int = 1
    mode: str = MODE_FIRST_HIT

    def __post_init__(self):
        if self.b_max < 1 or self.s_max < 1:
            raise ValueError("b_max and s_max must be >= 1")
        if self.alpha_max < 0:
            raise ValueError("alpha_max must be >= 0")
        if self.b_step < 1 or self.s_step < 1 or self.alpha_step <= 0:
            raise ValueError("steps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.mode not in (MODE_FIRST_HIT, MODE_COLLECT_ALL):
            raise ValueError(f"mode must be '{MODE_FIRST_HIT}' or '{MODE_COLLECT_ALL}'")

    def width_values(self) -> list[int]:
        return list(range(1, self.b_max + 1, self.b_step))

    def interval_values(self) -> list[int]:
        return list(range(1, self.s_max + 1, self.s_step))

    def tilt_values(self) -> list[float]:
        return [float(a) for a in np.arange(0.0, self.alpha_max + self.alpha_step / 2, self.alpha_step)]

    def thetas(self) -> list[PerturbationParams]:
        """Grid points in traversal order: width outer, interval, tilt inner."""
        return [
            PerturbationParams(b, s, a)
            for b in self.width_values()
            for s in self.interval_values()
            for a in self.tilt_values()
        ]

    def grid_size(self) -> int:
        return len(self.width_values()) * len(self.interval_values()) * len(self.tilt_values())

    def to_json(self) -> dict:
        return {
            "b_max": self.b_max,
            "s_max": self.s_max,
            "alpha_max": self.alpha_max,
            "b_step": self.b_step,
            "s_step": self.s_step,
            "alpha_step": self.alpha_step,
            "max_iters": self.max_iters,
            "mode": self.mode,
        }


@dataclass
class AttackResult:
    """Satisfying parameters found by one search, with bookkeeping."""

    mode: str
    space: SearchSpace
    thetas: list[PerturbationParams] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    phases: list[float] = field(default_factory=list)
    evaluations: int = 0
    skipped_perceptible: list[PerturbationParams] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.thetas) == len(self.losses) == len(self.phases)):
            raise ValueError("thetas, losses, and phases must have equal length")

    @property
    def found(self) -> bool:
        return bool(self.thetas)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "space": self.space.to_json(),
            "thetas": [
                {
                    "b": t.width_rows,
                    "s": t.interval_rows,
                    "alpha": t.tilt_deg,
                    "loss": loss,
                    "phase_us": phase,
                }
                for t, loss, phase in zip(self.thetas, self.losses, self.phases)
            ],
            "evaluations": self.evaluations,
            "skipped_perceptible": [
                {"b": t.width_rows, "s": t.interval_rows, "alpha": t.tilt_deg}
                for t in self.skipped_perceptible
            ],
        }

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(("b", "s", "alpha_deg", "loss"))
        for t, loss in zip(self.thetas, self.losses):
            writer.writerow((t.width_rows, t.interval_rows, t.tilt_deg, loss))


class OracleError(RuntimeError):
    """An external oracle failed mid-search; carries the partial result."""

    def __init__(self, message: str, theta: PerturbationParams, partial: AttackResult):
        super().__init__(message)
        self.theta = theta
        self.partial = partial


def dos_loss(verdict: DetectorVerdict, y: int = 1) -> float:
    """Squared difference between the true label and the detector output."""
    if y not in (0, 1):
        raise ValueError(f"true label y must be 0 or 1, got {y}")
    return float((y - verdict.label) ** 2)


def dodging_loss(ea: Embedding, eb: Embedding) -> float:
    """Embedding distance of two perturbed faces; success means <= threshold."""
    return feature_distance(ea, eb)


def success_rate_dos(n_a: int, n_b: int) -> float:
    """Fraction of pre-attack-detectable samples the attack blinded."""
    if n_b <= 0:
        raise ValueError("n_b must be > 0")
    if not 0 <= n_a <= n_b:
        raise ValueError(f"need 0 <= n_a <= n_b, got n_a={n_a} n_b={n_b}")
    return n_a / n_b


def success_rate_dodging(m_a: int, m_b: int) -> float:
    """Fraction of pre-attack-matchable pairs the attack confused."""
    if m_b <= 0:
        raise ValueError("m_b must be > 0")
    if not 0 <= m_a <= m_b:
        raise ValueError(f"need 0 <= m_a <= m_b, got m_a={m_a} m_b={m_b}")
    return m_a / m_b


def _search_grid(space, cfg, levels, phase_us, randomize_phase, rng, evaluate, succeeded, n_jobs, oracle, oracle_pool):
    """Shared grid driver.

    ``evaluate(theta, pulse, oracle) -> loss``. Gate-skipped candidates are
    recorded once and never evaluated. Returns an AttackResult; raises
    OracleError on adapter failure with everything found so far attached.
    """
    rng = as_rng(rng)
    grid = space.thetas()
    iterations = space.max_iters if randomize_phase else 1
    result = AttackResult(mode=space.mode, space=space)
    skipped_keys: set[tuple] = set()
    hit_keys: set[tuple] = set()

    def pulse_for(theta: PerturbationParams, phase: float) -> PulseParams:
        return theta_to_signal(theta, cfg, levels=levels, phase_us=phase)

    def record_hit(theta, loss, phase):
        key = (theta.width_rows, theta.interval_rows, theta.tilt_deg)
        if key not in hit_keys:
            hit_keys.add(key)
            result.thetas.append(theta)
            result.losses.append(loss)
            result.phases.append(phase)

    for _ in range(iterations):
        # draw phases in grid order so results are scheduler-independent
        tasks = []
        for theta in grid:
            period_us = (theta.width_rows + theta.interval_rows) * cfg.interline_delay_us
            phase = float(rng.uniform(0.0, period_us)) if randomize_phase else phase_us
            pulse = pulse_for(theta, phase)
            if not check_imperceptible(pulse):
                key = (theta.width_rows, theta.interval_rows, theta.tilt_deg)
                if key not in skipped_keys:
                    skipped_keys.add(key)
                    result.skipped_perceptible.append(theta)
                continue
            tasks.append((theta, pulse, phase))

        if space.mode == MODE_FIRST_HIT or n_jobs <= 1:
            for theta, pulse, phase in tasks:
                try:
                    loss = evaluate(theta, pulse, oracle)
                except AdapterError as exc:
                    raise OracleError(str(exc), theta, result) from exc
                result.evaluations += 1
                if succeeded(loss):
                    record_hit(theta, loss, phase)
                    if space.mode == MODE_FIRST_HIT:
                        return result
        else:
            pool = list(oracle_pool) if oracle_pool else [oracle] * n_jobs
            shards = [tasks[w::len(pool)] for w in range(len(pool))]

            def run_shard(args):
                worker_oracle, shard = args
                out = []
                for theta, pulse, phase in shard:
                    try:
                        out.append((theta, pulse, phase, evaluate(theta, pulse, worker_oracle)))
                    except AdapterError as exc:
                        return out, (theta, exc)
                return out, None

            with ThreadPoolExecutor(max_workers=len(pool)) as ex:
                shard_results = list(ex.map(run_shard, zip(pool, shards)))
            failure = None
            evaluated = {}
            for out, fail in shard_results:
                for theta, pulse, phase, loss in out:
                    evaluated[(theta.width_rows, theta.interval_rows, theta.tilt_deg)] = (theta, phase, loss)
                if fail is not None and failure is None:
                    failure = fail
            # normalize back to grid order so scheduling never shows
            for theta, pulse, phase in tasks:
                key = (theta.width_rows, theta.interval_rows, theta.tilt_deg)
                if key in evaluated:
                    t, ph, loss = evaluated[key]
                    result.evaluations += 1
                    if succeeded(loss):
                        record_hit(t, loss, ph)
            if failure is not None:
                theta, exc = failure
                raise OracleError(str(exc), theta, result) from exc
    return result


def grid_search_dos(
    image,
    space: SearchSpace,
    detector,
    cfg: SensorConfig,
    y: int = 1,
    levels: tuple[float, float] = (1.0, 0.0),
    phase_us: float = 0.0,
    randomize_phase: bool = False,
    rng=None,
    n_jobs: int = 1,
    detector_pool=None,
) -> AttackResult:
    """Search fringe parameters that blind the detector on ``image``.

    The target must be detectable under unmodulated light, otherwise there
    is nothing to attack and a ValueError is raised.
    """
    img = check_image(image)
    cfg = _with_shape(cfg, img)
    if y not in (0, 1):
        raise ValueError(f"true label y must be 0 or 1, got {y}")
    baseline = _baseline_exposure(img, cfg, levels)
    if oracle_label(detector, baseline) != 1:
        raise ValueError("precondition failed: detector does not see a face under unmodulated light")

    def evaluate(theta, pulse, oracle) -> float:
        pattern = render_pattern(cfg, pulse, theta.tilt_deg)
        adv = expose(img, pattern)
        return dos_loss(DetectorVerdict(oracle_label(oracle, adv)), y)

    return _search_grid(
        space, cfg, levels, phase_us, randomize_phase, rng,
        evaluate, lambda loss: loss > 0, n_jobs, detector, detector_pool,
    )


def grid_search_dodging(
    image,
    user_image,
    space: SearchSpace,
    embedder,
    delta: float,
    cfg: SensorConfig,
    levels: tuple[float, float] = (1.0, 0.0),
    phase_us: float = 0.0,
    randomize_phase: bool = False,
    rng=None,
    n_jobs: int = 1,
    embedder_pool=None,
) -> AttackResult:
    """Search fringe parameters that confuse two different faces.

    Both faces receive the same perturbation each step; success is an
    embedding distance at or below ``delta``. The unperturbed pair must not
    already be confusable.
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    img_x = check_image(image, "image")
    img_u = check_image(user_image, "user_image")
    base = dodging_loss(oracle_embedding(embedder, img_x), oracle_embedding(embedder, img_u))
    if base <= delta:
        raise ValueError(
            f"precondition failed: pair is already confusable (distance {base:.6g} <= delta {delta:.6g})"
        )

    def evaluate(theta, pulse, oracle) -> float:
        pattern_x = render_pattern(_with_shape(cfg, img_x), pulse, theta.tilt_deg)
        pattern_u = render_pattern(_with_shape(cfg, img_u), pulse, theta.tilt_deg)
        ex = oracle_embedding(oracle, expose(img_x, pattern_x))
        eu = oracle_embedding(oracle, expose(img_u, pattern_u))
        return dodging_loss(ex, eu)

    return _search_grid(
        space, cfg, levels, phase_us, randomize_phase, rng,
        evaluate, lambda loss: loss <= delta, n_jobs, embedder, embedder_pool,
    )


def _baseline_exposure(image, cfg: SensorConfig, levels) -> np.ndarray:
    pulse = PulseParams(
        period_us=cfg.exposure_us, duty=1.0, level_on=levels[0], level_off=levels[0]
    )
    return expose(image, render_pattern(_with_shape(cfg, image), pulse, 0.0))


def _with_shape(cfg: SensorConfig, image) -> SensorConfig:
    if cfg.rows == image.shape[0] and cfg.cols == image.shape[1]:
        return cfg
    return SensorConfig(
        interline_delay_us=cfg.interline_delay_us,
        exposure_us=cfg.exposure_us,
        gain=cfg.gain,
        rows=image.shape[0],
        cols=image.shape[1],
        start_us=cfg.start_us,
    )


class DosAttackSearch(BaseEstimator):
    """Estimator interface to the detector-blinding search.

    ``fit(X)`` runs the grid search against a single image and stores the
    outcome in ``result_``, ``thetas_``, ``losses_``, ``evaluations_``.
    """

    def __init__(
        self,
        detector=None,
        sensor=None,
        b_max=40,
        s_max=40,
        alpha_max=0.0,
        b_step=1,
        s_step=1,
        alpha_step=45.0,
        max_iters=1,
        mode=MODE_FIRST_HIT,
        level_on=1.0,
        level_off=0.0,
        phase_us=0.0,
        randomize_phase=False,
        random_state=None,
        n_jobs=1,
        y=1,
    ):
        self.detector = detector
        self.sensor = sensor
        self.b_max = b_max
        self.s_max = s_max
        self.alpha_max = alpha_max
        self.b_step = b_step
        self.s_step = s_step
        self.alpha_step = alpha_step
        self.max_iters = max_iters
        self.mode = mode
        self.level_on = level_on
        self.level_off = level_off
        self.phase_us = phase_us
        self.randomize_phase = randomize_phase
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.y = y

    def _space(self) -> SearchSpace:
        return SearchSpace(
            b_max=self.b_max,
            s_max=self.s_max,
            alpha_max=self.alpha_max,
            b_step=self.b_step,
            s_step=self.s_step,
            alpha_step=self.alpha_step,
            max_iters=self.max_iters,
            mode=self.mode,
        )

    def fit(self, X, y=None):
        if self.detector is None or self.sensor is None:
            raise ValueError("detector and sensor are required")
        self.result_ = grid_search_dos(
            X,
            self._space(),
            self.detector,
            _with_shape(self.sensor, np.asarray(X)),
            y=self.y,
            levels=(self.level_on, self.level_off),
            phase_us=self.phase_us,
            randomize_phase=self.randomize_phase,
            rng=self.random_state,
            n_jobs=self.n_jobs,
        )
        self.thetas_ = self.result_.thetas
        self.losses_ = self.result_.losses
        self.evaluations_ = self.result_.evaluations
        return self


class DodgingAttackSearch(BaseEstimator):
    """Estimator interface to the pair-confusion search; ``fit(X, U)``."""

    def __init__(
        self,
        embedder=None,
        sensor=None,
        delta=None,
        b_max=40,
        s_max=40,
        alpha_max=0.0,
        b_step=1,
        s_step=1,
        alpha_step=45.0,
        max_iters=1,
        mode=MODE_FIRST_HIT,
        level_on=1.0,
        level_off=0.0,
        phase_us=0.0,
        randomize_phase=False,
        random_state=None,
        n_jobs=1,
    ):
        self.embedder = embedder
        self.sensor = sensor
        self.delta = delta
        self.b_max = b_max
        self.s_max = s_max
        self.alpha_max = alpha_max
        self.b_step = b_step
        self.s_step = s_step
        self.alpha_step = alpha_step
        self.max_iters = max_iters
        self.mode = mode
        self.level_on = level_on
        self.level_off = level_off
        self.phase_us = phase_us
        self.randomize_phase = randomize_phase
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _space(self) -> SearchSpace:
        return SearchSpace(
            b_max=self.b_max,
            s_max=self.s_max,
            alpha_max=self.alpha_max,
            b_step=self.b_step,
            s_step=self.s_step,
            alpha_step=self.alpha_step,
            max_iters=self.max_iters,
            mode=self.mode,
        )

    def fit(self, X, U):
        if self.embedder is None or self.sensor is None or self.delta is None:
            raise ValueError("embedder, sensor, and delta are required")
        self.result_ = grid_search_dodging(
            X,
            U,
            self._space(),
            self.embedder,
            self.delta,
            _with_shape(self.sensor, np.asarray(X)),
            levels=(self.level_on, self.level_off),
            phase_us=self.phase_us,
            randomize_phase=self.randomize_phase,
            rng=self.random_state,
            n_jobs=self.n_jobs,
        )
        self.thetas_ = self.result_.thetas
        self.losses_ = self.result_.losses
        self.evaluations_ = self.result_.evaluations
        return self
