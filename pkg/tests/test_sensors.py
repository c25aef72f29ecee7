import itertools

import numpy as np
import pytest

from prevent import config
from prevent.sensors import (
    ClassifierModel,
    DimensionMismatchError,
    LabelSet,
    OlfactoryModel,
    SensorError,
    VisionBinaryModel,
    compute_t_safe,
    load_voc_trials,
    sample_classifier,
    sample_frame_quality,
    sample_vision_binary,
    sample_voc,
    scene_truth_label,
    shipped_t_safe,
)
from prevent.world import HazardEntity, WorldState


def make_world(*hazards: HazardEntity) -> WorldState:
    world = WorldState("lab")
    for h in hazards:
        world.add_hazard(h)
    world.dwell(10.0)  # let source latency ramps saturate
    return world


def spill(chem="ethanol", x=1.0, y=0.0, containment="spilled", scale=1.0, **kw):
    return HazardEntity(
        kind="spillage", x=x, y=y, label="spillage", chemical=chem,
        containment=containment, emission_scale=scale, unsafe_ground_truth=True,
        on_path=True, **kw,
    )


class TestLabelSet:
    def test_default_partition(self):
        labels = LabelSet.default()
        assert labels.safe | labels.unsafe == labels.labels
        assert not (labels.safe & labels.unsafe)
        assert "no_problem_detected" in labels.safe

    def test_no_problem_must_be_safe(self):
        with pytest.raises(SensorError):
            LabelSet(labels=frozenset({"no_problem_detected", "x"}), safe=frozenset({"x"}))

    def test_safe_outside_labels_rejected(self):
        with pytest.raises(SensorError):
            LabelSet(labels=frozenset({"a"}), safe=frozenset({"no_problem_detected"}))


class TestVisionBinary:
    def test_empty_world_reports_clear(self):
        world = make_world()
        model = VisionBinaryModel(accuracy=1.0, blur_prob=0.0)
        rng = np.random.default_rng(1)
        x1, quality = sample_vision_binary(world, world.robot.position, model, rng)
        assert x1 == 0
        assert quality >= model.min_quality

    def test_hidden_hazard_is_ground_truth_clear(self):
        hazard = spill(x=0.4, visible=False)
        world = make_world(hazard)
        model = VisionBinaryModel(accuracy=1.0, blur_prob=0.0)
        x1, _ = sample_vision_binary(world, world.robot.position, model, np.random.default_rng(1))
        assert x1 == 0

    def test_visible_hazard_ahead_detected(self):
        world = make_world(spill(x=0.5))
        model = VisionBinaryModel(accuracy=1.0, blur_prob=0.0)
        x1, _ = sample_vision_binary(world, world.robot.position, model, np.random.default_rng(1))
        assert x1 == 1

    def test_bernoulli_calibration_10k(self):
        world = make_world(spill(x=0.5))
        model = VisionBinaryModel(accuracy=0.967, blur_prob=0.0)
        rng = np.random.default_rng(42)
        hits = sum(
            sample_vision_binary(world, world.robot.position, model, rng)[0]
            for _ in range(10_000)
        )
        assert abs(hits / 10_000 - 0.967) < 0.015

    def test_blur_events_fall_under_floor(self):
        model = VisionBinaryModel(blur_prob=1.0)
        rng = np.random.default_rng(3)
        assert sample_frame_quality(model, rng) < model.min_quality
        model = VisionBinaryModel(blur_prob=0.0)
        assert sample_frame_quality(model, rng) >= model.min_quality

    def test_invalid_accuracy_rejected(self):
        with pytest.raises(SensorError):
            VisionBinaryModel(accuracy=1.4)


class TestClassifier:
    def test_clean_scene_label(self):
        world = make_world()
        label, score = sample_classifier(
            world, world.robot.position, ClassifierModel(accuracy=1.0),
            LabelSet.default(), np.random.default_rng(1),
        )
        assert label == "no_problem_detected"
        assert score >= 0.5

    def test_wrong_labels_score_low(self):
        world = make_world(spill(x=1.0))
        labels = LabelSet.default()
        model = ClassifierModel(accuracy=0.0)
        rng = np.random.default_rng(5)
        for _ in range(50):
            label, score = sample_classifier(world, (0.0, 0.0), model, labels, rng)
            assert label != "spillage"
            assert score < 0.5

    def test_calibration_montecarlo(self):
        world = make_world(spill(x=1.0))
        labels = LabelSet.default()
        model = ClassifierModel(mode="zero_shot", accuracy=0.40)
        rng = np.random.default_rng(7)
        hits = sum(
            sample_classifier(world, (0.0, 0.0), model, labels, rng)[0] == "spillage"
            for _ in range(10_000)
        )
        assert abs(hits / 10_000 - 0.40) < 0.015

    def test_scene_label_prefers_unsafe(self):
        benign = HazardEntity(kind="spillage", x=0.5, y=0.0, label="foreign_object_off_path",
                              chemical="ethanol", containment="spilled")
        bad = spill(x=1.5)
        world = make_world(benign, bad)
        assert scene_truth_label(world, (0.0, 0.0)) == "spillage"


class TestOlfactory:
    def test_empty_world_reads_zero(self):
        world = make_world()
        model = OlfactoryModel(noise_std=0.0)
        assert sample_voc(world, (0.0, 0.0), model, np.random.default_rng(1)) == 0

    def test_sealed_trio_mean_near_threshold(self):
        hazards = [
            HazardEntity(kind="vial", x=0.0, y=0.0, label="x", chemical=chem,
                         containment="sealed")
            for chem in config.CHEMICALS
        ]
        model = OlfactoryModel()
        readings = []
        rng = np.random.default_rng(11)
        for i in range(90):
            world = make_world(hazards[i % 3])
            readings.append(sample_voc(world, (0.0, 0.0), model, rng))
        assert abs(np.mean(readings) - 2.5) < 0.35

    def test_unsealed_isopropanol_often_below_threshold(self):
        hazard = HazardEntity(kind="uncapped_vial", x=0.0, y=0.0, label="x",
                              chemical="isopropanol", containment="unsealed")
        world = make_world(hazard)
        model = OlfactoryModel()
        rng = np.random.default_rng(13)
        check_distance = 1.1
        below = sum(
            sample_voc(world, (check_distance, 0.0), model, rng) < config.T_SAFE_DEFAULT_PPM
            for _ in range(1_000)
        )
        assert below / 1_000 >= 0.30

    def test_attenuation_monotone_in_distance(self):
        hazard = spill(x=0.0)
        world = make_world(hazard)
        model = OlfactoryModel(noise_std=0.0)
        rng = np.random.default_rng(1)
        readings = [sample_voc(world, (d, 0.0), model, rng) for d in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert readings == sorted(readings, reverse=True)

    def test_containment_ordering(self):
        model = OlfactoryModel(noise_std=0.0)
        rng = np.random.default_rng(1)
        for chem in config.CHEMICALS:
            levels = {}
            for containment in ("sealed", "unsealed", "spilled"):
                hazard = HazardEntity(kind="vial", x=0.0, y=0.0, label="x",
                                      chemical=chem, containment=containment)
                world = make_world(hazard)
                levels[containment] = sample_voc(world, (0.2, 0.0), model, rng)
            assert levels["spilled"] > levels["unsealed"] > levels["sealed"]

    def test_latency_ramp_suppresses_fresh_sources(self):
        world = WorldState("lab")
        hazard = spill(x=0.3)
        hazard.appears_at = 0.0
        world.add_hazard(hazard)
        model = OlfactoryModel(noise_std=0.0)
        rng = np.random.default_rng(1)
        world.dwell(0.15)
        early = sample_voc(world, (0.0, 0.0), model, rng)
        world.dwell(10.0)
        late = sample_voc(world, (0.0, 0.0), model, rng)
        assert early < late

    def test_negative_readings_clamped(self):
        world = make_world()
        model = OlfactoryModel(noise_std=50.0)
        rng = np.random.default_rng(2)
        for _ in range(100):
            assert sample_voc(world, (0.0, 0.0), model, rng) >= 0


class TestTSafe:
    def test_shipped_dataset_exact(self):
        assert shipped_t_safe() == 2.5

    def test_all_zero(self):
        assert compute_t_safe({"a": [0.0, 0.0], "b": [0.0, 0.0]}, c=2, t=2) == 0.0

    def test_single_chemical_mean(self):
        assert compute_t_safe({"ipa": [2.0, 4.0]}, c=1, t=2) == 3.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            compute_t_safe({"a": [1.0, 2.0], "b": [1.0]}, c=2, t=2)
        with pytest.raises(DimensionMismatchError):
            compute_t_safe({"a": [1.0]}, c=2, t=1)
        with pytest.raises(DimensionMismatchError):
            compute_t_safe({}, c=0, t=0)

    def test_permutation_invariant(self, rng):
        trials = load_voc_trials()
        sealed = {chem: rows["sealed"] for chem, rows in trials.items()}
        base = compute_t_safe(sealed, c=3, t=30)
        for _ in range(20):
            shuffled = {
                chem: list(rng.permutation(readings))
                for chem, readings in sealed.items()
            }
            assert compute_t_safe(shuffled, c=3, t=30) == pytest.approx(base)

    def test_linear_scaling(self):
        trials = load_voc_trials()
        sealed = {chem: rows["sealed"] for chem, rows in trials.items()}
        base = compute_t_safe(sealed, c=3, t=30)
        doubled = {chem: [2 * r for r in readings] for chem, readings in sealed.items()}
        assert compute_t_safe(doubled, c=3, t=30) == pytest.approx(2 * base)

    def test_negative_reading_rejected(self):
        with pytest.raises(SensorError):
            compute_t_safe({"a": [1.0, -0.5]}, c=1, t=2)


class TestAccuracyTable:
    def test_all_twelve_cells_present(self):
        table = config.load_accuracy_table()
        models = ("resnet18_ft", "vit_l14_zs", "vit_l14_ft", "olfactory")
        tasks = ("t1", "t2", "t3")
        for model, task in itertools.product(models, tasks):
            assert f"table1.{model}.{task}" in table

    def test_fine_tuned_beats_zero_shot(self):
        table = config.load_accuracy_table()
        for task in ("t1", "t2", "t3"):
            assert table[f"table1.vit_l14_ft.{task}"] >= table[f"table1.vit_l14_zs.{task}"]


class TestAmbientChannels:
    def test_recorded_in_frames_but_not_decisive(self):
        from prevent.sensors import ambient_channels
        model = OlfactoryModel()
        channels = ambient_channels(model, np.random.default_rng(3))
        assert set(channels) == {"temperature_c", "iaq", "co2_ppm", "nox_index", "h2_ppm"}
        quiet = ambient_channels(OlfactoryModel(noise_std=0.0), np.random.default_rng(3))
        assert quiet["co2_ppm"] == 430.0
