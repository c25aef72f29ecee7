"""Simulated perception: binary hazard vision, scene classifier and VOC nose.

The real detectors are replaced by generative surrogates parameterized by
measured deployment accuracies: a surrogate reports the world's ground truth
and flips it with probability 1 - accuracy. The olfactory model produces PPM
readings from per-chemical source emissions with containment damping,
inverse-square attenuation, response latency and sensor noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import config
from .world import HazardEntity, WorldState


class SensorError(Exception):
    pass


class DimensionMismatchError(SensorError):
    pass


@dataclass
class ModalityFrame:
    x1: int
    x2: int
    quality: float
    timestamp: float
    x3: Optional[tuple[str, float]] = None
    extra_channels: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class LabelSet:
    labels: frozenset[str]
    safe: frozenset[str]

    def __post_init__(self):
        if not self.safe <= self.labels:
            raise SensorError("safe labels must be a subset of the label set")
        if "no_problem_detected" not in self.safe:
            raise SensorError("'no_problem_detected' must be a safe label")

    @property
    def unsafe(self) -> frozenset[str]:
        return self.labels - self.safe

    @staticmethod
    def default() -> "LabelSet":
        return LabelSet(labels=frozenset(config.ALL_LABELS), safe=frozenset(config.SAFE_LABELS))


@dataclass
class VisionBinaryModel:
    accuracy: float = 1.0
    detection_range: float = config.NAV_VISION_AHEAD_M
    halfwidth: float = config.NAV_VISION_HALFWIDTH_M
    region: str = "ahead"          # ahead (base camera) | check (arm camera)
    check_radius: float = config.CHECK_VISION_RADIUS_M
    min_quality: float = config.MIN_FRAME_QUALITY
    blur_prob: float = config.BLUR_EVENT_PROB

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise SensorError("accuracy must lie in [0, 1]")
        if self.detection_range <= 0:
            raise SensorError("detection range must be positive")


@dataclass
class ClassifierModel:
    mode: str = "fine_tuned"       # fine_tuned | zero_shot
    accuracy: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise SensorError("accuracy must lie in [0, 1]")


@dataclass
class OlfactoryModel:
    emissions: dict[str, float] = field(default_factory=lambda: dict(config.EMISSION_PPM))
    containment: dict[str, float] = field(default_factory=lambda: dict(config.CONTAINMENT_FACTOR))
    noise_std: float = config.VOC_NOISE_STD_PPM
    latency: float = config.VOC_RESPONSE_LATENCY_S

    def source_ppm(self, hazard: HazardEntity, position: tuple[float, float], now: float) -> float:
        """Noise-free contribution of one source at a sensing position."""
        if not hazard.emits_voc():
            return 0.0
        emission = self.emissions[hazard.chemical] * hazard.emission_scale
        damping = self.containment[hazard.containment]
        d = math.hypot(hazard.x - position[0], hazard.y - position[1])
        level = emission * damping / (1.0 + d * d)
        age = now - hazard.appears_at
        if self.latency > 0 and age < self.latency:
            level *= max(0.0, age) / self.latency
        return level


@dataclass
class SensorSuite:
    """The per-run bundle of models plus an owned random stream."""
    nav_vision: VisionBinaryModel
    check_vision: VisionBinaryModel
    classifier: ClassifierModel
    olfactory: OlfactoryModel
    labels: LabelSet
    t_safe: float
    rng: np.random.Generator

    @staticmethod
    def deterministic(seed: int = 0) -> "SensorSuite":
        """Ground-truth sensing: accuracies pinned to 1, noise removed."""
        return SensorSuite(
            nav_vision=VisionBinaryModel(accuracy=1.0, blur_prob=0.0),
            check_vision=VisionBinaryModel(accuracy=1.0, region="check", blur_prob=0.0),
            classifier=ClassifierModel(accuracy=1.0),
            olfactory=OlfactoryModel(noise_std=0.0),
            labels=LabelSet.default(),
            t_safe=config.T_SAFE_DEFAULT_PPM,
            rng=np.random.default_rng(seed),
        )

    @staticmethod
    def stochastic(task: str, seed: int, accuracies: Optional[dict[str, float]] = None) -> "SensorSuite":
        """Accuracy-parameterized surrogates for a task (t1, t2 or t3)."""
        table = accuracies or config.load_accuracy_table()
        return SensorSuite(
            nav_vision=VisionBinaryModel(accuracy=table[f"table1.resnet18_ft.{task}"]),
            check_vision=VisionBinaryModel(
                accuracy=table[f"table1.resnet18_ft.{task}"], region="check"
            ),
            classifier=ClassifierModel(accuracy=table[f"table1.vit_l14_ft.{task}"]),
            olfactory=OlfactoryModel(),
            labels=LabelSet.default(),
            t_safe=config.T_SAFE_DEFAULT_PPM,
            rng=np.random.default_rng(seed),
        )


def _visible_ground_truth(world: WorldState, pose: tuple[float, float],
                          model: VisionBinaryModel,
                          exclude: Optional[set[int]] = None) -> list[HazardEntity]:
    exclude = exclude or set()
    if model.region == "ahead":
        candidates = world.hazards_ahead(model.detection_range, model.halfwidth)
    else:
        candidates = world.hazards_in_radius(pose, model.check_radius)
    return [h for h in candidates if h.hazard_id not in exclude]


def sample_frame_quality(model: VisionBinaryModel, rng: np.random.Generator) -> float:
    if model.blur_prob > 0 and rng.random() < model.blur_prob:
        return float(model.min_quality * rng.beta(2.0, 5.0))
    return float(model.min_quality + (1.0 - model.min_quality) * rng.beta(5.0, 2.0))


def sample_vision_binary(world: WorldState, pose: tuple[float, float],
                         model: VisionBinaryModel, rng: np.random.Generator,
                         exclude: Optional[set[int]] = None) -> tuple[int, float]:
    """One binary frame: (x1, quality). Callers re-sample once when the
    quality lands under the model's floor."""
    truth = 1 if _visible_ground_truth(world, pose, model, exclude) else 0
    flip = rng.random() >= model.accuracy
    x1 = truth ^ int(flip)
    return x1, sample_frame_quality(model, rng)


def sample_classifier(world: WorldState, pose: tuple[float, float],
                      model: ClassifierModel, labels: LabelSet,
                      rng: np.random.Generator,
                      truth_label: Optional[str] = None) -> tuple[str, float]:
    """Scene classification after a trigger. Ground truth defaults to the
    label of the most hazardous entity near the pose."""
    if truth_label is None:
        truth_label = scene_truth_label(world, pose)
    if rng.random() < model.accuracy:
        return truth_label, float(0.5 + 0.5 * rng.random())
    others = sorted(labels.labels - {truth_label})
    wrong = others[int(rng.integers(len(others)))]
    return wrong, float(0.5 * rng.random())


def scene_truth_label(world: WorldState, pose: tuple[float, float],
                      exclude: Optional[set[int]] = None) -> str:
    """Label of the most relevant active hazard near a pose."""
    exclude = exclude or set()
    candidates = [
        h for h in world.active_hazards()
        if h.hazard_id not in exclude
        and math.hypot(h.x - pose[0], h.y - pose[1]) <= 5.0
    ]
    if not candidates:
        return "no_problem_detected"
    candidates.sort(
        key=lambda h: (h.unsafe_ground_truth, -math.hypot(h.x - pose[0], h.y - pose[1])),
        reverse=True,
    )
    return candidates[0].label


def sample_voc(world: WorldState, position: tuple[float, float],
               model: OlfactoryModel, rng: np.random.Generator,
               exclude: Optional[set[int]] = None) -> int:
    """Integer VOC index at a position, in PPM."""
    exclude = exclude or set()
    level = sum(
        model.source_ppm(h, position, world.clock)
        for h in world.active_hazards()
        if h.hazard_id not in exclude
    )
    if model.noise_std > 0:
        level += float(rng.normal(0.0, model.noise_std))
    return max(0, round(level))


def voc_contributors(world: WorldState, position: tuple[float, float],
                     model: OlfactoryModel, floor_ppm: float = 0.5) -> list[HazardEntity]:
    """Sources individually contributing at least floor_ppm at a position."""
    return [
        h for h in world.active_hazards()
        if model.source_ppm(h, position, world.clock) >= floor_ppm
    ]


# ambient baselines for the module's side channels; logged with each frame
# but never consulted by any decision
_AMBIENT = {"temperature_c": 21.4, "iaq": 28.0, "co2_ppm": 430.0, "nox_index": 1.2, "h2_ppm": 0.4}


def ambient_channels(model: OlfactoryModel, rng: np.random.Generator) -> dict[str, float]:
    if model.noise_std <= 0:
        return dict(_AMBIENT)
    return {
        key: round(max(0.0, value + float(rng.normal(0.0, 0.02 * value))), 3)
        for key, value in _AMBIENT.items()
    }


def compute_t_safe(trials: dict[str, list[float]], c: int, t: int) -> float:
    """Grand mean of sealed readings over c chemicals and t trials each."""
    if c < 1 or t < 1:
        raise DimensionMismatchError("need at least one chemical and one trial")
    if len(trials) != c:
        raise DimensionMismatchError(f"expected {c} chemicals, got {len(trials)}")
    total = 0.0
    count = 0
    for chem, readings in trials.items():
        if len(readings) != t:
            raise DimensionMismatchError(
                f"chemical {chem!r} has {len(readings)} readings, expected {t}"
            )
        if any(r < 0 for r in readings):
            raise SensorError("readings must be non-negative")
        total += sum(readings)
        count += len(readings)
    return total / count


def load_voc_trials(path=None) -> dict[str, dict[str, list[float]]]:
    """Calibration trials keyed trials[chemical][containment] -> readings."""
    if path is None:
        path = config.data_path("calibration", config.VOC_TRIALS_FILE)
    text = path.read_text(encoding="utf-8")
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "voc_trials 1":
        raise SensorError("calibration file missing 'voc_trials 1' header")
    trials: dict[str, dict[str, list[float]]] = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise SensorError(f"bad trial line {ln!r}")
        chem, containment, reading = parts
        trials.setdefault(chem, {}).setdefault(containment, []).append(float(reading))
    return trials


def shipped_t_safe() -> float:
    trials = load_voc_trials()
    sealed = {chem: by_containment["sealed"] for chem, by_containment in trials.items()}
    t = len(next(iter(sealed.values())))
    return compute_t_safe(sealed, c=len(sealed), t=t)
