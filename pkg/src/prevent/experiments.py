"""Batch experiment runners and their reports.

Three reproductions ship: the modality-combination study over the staged
scenarios (fig7), Monte Carlo deployment-accuracy calibration per modality
and task (table1), and the robustness/duration comparison between skilled
and unmonitored execution (table2). Reports are deterministic: the same
seed plus an identical configuration digest yield byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import config
from .decision import Action, ClassifierVerdict, DecisionInputs, decide_manipulation, decide_navigation, severity
from .skills import AutoConsent, run_scenario
from .world import ObservabilityScript, ScenarioSpec, load_shipped_scenario


class ExperimentError(Exception):
    pass


class MissingScenarioError(ExperimentError):
    pass


@dataclass
class ExperimentReport:
    experiment_id: str
    seed: int
    config_digest: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(str(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            f"experiment {self.experiment_id}",
            f"seed {self.seed}",
            f"config_digest {self.config_digest}",
            "",
        ]
        widths = [max(len(str(c)), *(len(str(r[i])) for r in self.rows)) if self.rows else len(str(c))
                  for i, c in enumerate(self.columns)]
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(self.columns, widths)))
        for row in self.rows:
            lines.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
        if self.notes:
            lines.append("")
            lines.extend(self.notes)
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{self.experiment_id}.csv"
        txt_path = out_dir / f"{self.experiment_id}_report.txt"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        txt_path.write_text(self.to_text(), encoding="utf-8")
        return [csv_path, txt_path]


def config_digest() -> str:
    """Digest over every constant and data file an experiment depends on."""
    bits: list[str] = []
    for name in sorted(vars(config)):
        if name.isupper():
            bits.append(f"{name}={getattr(config, name)!r}")
    for sub in ("scenarios", "trees", "calibration"):
        folder = config.data_path(sub)
        for item in sorted(folder.iterdir(), key=lambda p: p.name):
            bits.append(item.name)
            bits.append(item.read_text(encoding="utf-8"))
    return hashlib.sha256("\n".join(bits).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Modality-combination study

FIG7_SCENARIOS = ("S1", "S2", "S3", "S4", "S5", "S6")

# name -> (modalities, hierarchical refinement available)
FIG7_CONFIGS: list[tuple[str, frozenset, bool]] = [
    ("vision_only", frozenset({"vision"}), False),
    ("voc_only", frozenset({"voc"}), False),
    ("vlm_only", frozenset({"vlm"}), False),
    ("vision_voc", frozenset({"vision", "voc"}), False),
    ("vision_vlm", frozenset({"vision", "vlm"}), False),
    ("voc_vlm", frozenset({"voc", "vlm"}), False),
    ("multi_modal", frozenset({"vision", "voc", "vlm"}), True),
]
UNIMODAL = ("vision_only", "voc_only", "vlm_only")
DUAL_MODAL = ("vision_voc", "vision_vlm", "voc_vlm")


def _flat_outcome(modalities: frozenset, script: ObservabilityScript, kind: str) -> Action:
    """Detector-only fusion: any detection stops the task and asks the
    operator; there is no refinement step to resume on its own."""
    detected = False
    if "vision" in modalities and script.vision:
        detected = True
    if "voc" in modalities:
        if kind == "nav" and script.voc:
            detected = True
        if kind != "nav" and (script.voc_initial or script.voc_mid):
            detected = True
    if "vlm" in modalities and script.vlm and not script.sudden:
        detected = True
    return Action.HALT_AWAIT_CONSENT if detected else Action.PROCEED


def _hierarchical_outcome(script: ObservabilityScript, kind: str, t_safe: float) -> Action:
    """Full pipeline on the scripted observations, via the decision functions."""
    safe = frozenset(config.SAFE_LABELS)
    high = int(t_safe) + 3
    if kind == "nav":
        triggered = script.vision or script.voc
        inputs = DecisionInputs(
            x1=1 if script.vision else 0,
            x2=high if script.voc else 0,
            t_safe=t_safe,
            safe_labels=safe,
            x3=ClassifierVerdict(script.vlm_label, 0.9) if triggered else None,
        )
        return decide_navigation(inputs)
    initial = DecisionInputs(
        x1=0, x2=high if script.voc_initial else 0, t_safe=t_safe, safe_labels=safe
    )
    first = decide_manipulation(initial, phase="initial_voc")
    if first is not Action.PROCEED:
        return first
    post = DecisionInputs(
        x1=1 if script.vision else 0,
        x2=high if script.voc_mid else 0,
        t_safe=t_safe,
        safe_labels=safe,
        x3=ClassifierVerdict(script.vlm_label, 0.9) if script.vision else None,
    )
    return decide_manipulation(post, phase="post_vision")


def _classify_cell(action: Action, spec: ScenarioSpec) -> tuple[bool, bool]:
    unsafe = any(h.unsafe_ground_truth for h in spec.hazards)
    fp = action is Action.HALT_AWAIT_CONSENT and severity(spec.expected_action) < severity(action)
    fn = unsafe and action is not Action.HALT_AWAIT_CONSENT
    return fp, fn


def run_fig7(seed: int = 123, out_dir: Optional[Path] = None) -> ExperimentReport:
    report = ExperimentReport(
        experiment_id="fig7",
        seed=seed,
        config_digest=config_digest(),
        columns=["config", "scenario", "action", "expected", "fp", "fn"],
    )
    specs: dict[str, ScenarioSpec] = {}
    for sid in FIG7_SCENARIOS:
        spec = load_shipped_scenario(sid)
        if spec.script is None:
            raise MissingScenarioError(f"{sid} has no observability script")
        specs[sid] = spec
    tallies: dict[str, dict[str, int]] = {}
    for name, modalities, hierarchical in FIG7_CONFIGS:
        fp_total = fn_total = 0
        for sid in FIG7_SCENARIOS:
            spec = specs[sid]
            kind = spec.task.kind
            if hierarchical:
                # the proposed configuration runs the real skill trees
                outcome = run_scenario(
                    dataclasses.replace(spec, seed=seed + int(sid[1])),
                    mode="skilled",
                    consent=AutoConsent(delay=5.0),
                )
                action = outcome.final_action
                scripted = _hierarchical_outcome(spec.script, kind, config.T_SAFE_DEFAULT_PPM)
                if scripted is not action:
                    report.notes.append(
                        f"WARNING {sid}: tree outcome {action.value} != scripted {scripted.value}"
                    )
            else:
                action = _flat_outcome(modalities, spec.script, kind)
            fp, fn = _classify_cell(action, spec)
            fp_total += fp
            fn_total += fn
            report.rows.append(
                [name, sid, action.value, spec.expected_action.value, int(fp), int(fn)]
            )
        tallies[name] = {"fp": fp_total, "fn": fn_total}
    report.notes.append("")
    for name, tally in tallies.items():
        report.notes.append(f"{name}: FP={tally['fp']} FN={tally['fn']}")
    if out_dir is not None:
        report.write(out_dir)
    return report


def fig7_tallies(report: ExperimentReport) -> dict[str, dict[str, int]]:
    tallies: dict[str, dict[str, int]] = {}
    for name, sid, action, expected, fp, fn in report.rows:
        cell = tallies.setdefault(name, {"fp": 0, "fn": 0, "fp_s1_s4": 0, "fn_s2_s3_s5": 0})
        cell["fp"] += int(fp)
        cell["fn"] += int(fn)
        if sid in ("S1", "S4"):
            cell["fp_s1_s4"] += int(fp)
        if sid in ("S2", "S3", "S5"):
            cell["fn_s2_s3_s5"] += int(fn)
    return tallies


# ---------------------------------------------------------------------------
# Deployment-accuracy calibration

PAPER_RUN_COUNTS = {"t1": 30, "t2": 50, "t3": 50}
CALIBRATION_N = 10_000

TABLE1_CELLS = [
    ("resnet18_ft", "t1"), ("vit_l14_zs", "t1"), ("vit_l14_ft", "t1"), ("olfactory", "t1"),
    ("resnet18_ft", "t2"), ("vit_l14_zs", "t2"), ("vit_l14_ft", "t2"), ("olfactory", "t2"),
    ("resnet18_ft", "t3"), ("vit_l14_zs", "t3"), ("vit_l14_ft", "t3"), ("olfactory", "t3"),
]


def olfactory_nav_trial(rng: np.random.Generator) -> bool:
    p = config.OLF_NAV_TRIAL
    chem = config.CHEMICALS[int(rng.integers(len(config.CHEMICALS)))]
    scale = float(rng.uniform(p["s_lo"], p["s_hi"]))
    d0 = float(rng.uniform(p["d_lo"], p["d_hi"]))
    age = p["cadence"]
    while age <= p["window"] + 1e-9:
        d = max(0.0, d0 - config.BASE_SPEED_MPS * age)
        ramp = min(1.0, age / config.VOC_RESPONSE_LATENCY_S)
        level = scale * config.EMISSION_PPM[chem] * ramp / (1.0 + d * d)
        if level + rng.normal(0.0, config.VOC_NOISE_STD_PPM) >= config.T_SAFE_DEFAULT_PPM:
            return True
        age += p["cadence"]
    return False


def olfactory_manip_trial(rng: np.random.Generator) -> bool:
    p = config.OLF_MANIP_TRIAL
    chem = config.CHEMICALS[int(rng.integers(len(config.CHEMICALS)))]
    roll = rng.random()
    if roll < p["w_unsealed"]:
        containment = "unsealed"
    elif roll < p["w_unsealed"] + p["w_spilled"]:
        containment = "spilled"
    else:
        containment = "partially_closed"
    d = float(rng.uniform(p["d_lo"], p["d_hi"]))
    level = config.EMISSION_PPM[chem] * config.CONTAINMENT_FACTOR[containment] / (1.0 + d * d)
    return level + rng.normal(0.0, config.VOC_NOISE_STD_PPM) >= config.T_SAFE_DEFAULT_PPM


def _estimate_cell(model: str, task: str, n: int, rng: np.random.Generator,
                   table: dict[str, float]) -> tuple[int, float]:
    if model == "olfactory":
        trial = olfactory_nav_trial if task == "t1" else olfactory_manip_trial
        hits = sum(trial(rng) for _ in range(n))
    else:
        p = table[f"table1.{model}.{task}"]
        hits = int(np.count_nonzero(rng.random(n) < p))
    return hits, hits / n


def run_table1(seed: int = 123, out_dir: Optional[Path] = None,
               calibration_n: int = CALIBRATION_N) -> ExperimentReport:
    table = config.load_accuracy_table()
    report = ExperimentReport(
        experiment_id="table1",
        seed=seed,
        config_digest=config_digest(),
        columns=["model", "task", "target_pct", "n", "hits", "empirical_pct", "ci95_pct"],
    )
    root = np.random.default_rng(seed)
    for model, task in TABLE1_CELLS:
        cell_rng = np.random.default_rng(root.integers(2**63))
        target = table[f"table1.{model}.{task}"] * 100.0
        for n in (PAPER_RUN_COUNTS[task], calibration_n):
            hits, acc = _estimate_cell(model, task, n, cell_rng, table)
            ci = 196.0 * float(np.sqrt(acc * (1 - acc) / n))
            report.rows.append([
                model, task, f"{target:.2f}", n, hits, f"{acc * 100:.2f}", f"{ci:.2f}",
            ])
    if out_dir is not None:
        report.write(out_dir)
    return report


def table1_calibration_error(report: ExperimentReport) -> dict[tuple[str, str], float]:
    """Absolute error in percentage points at the calibration sample size."""
    errors = {}
    for model, task, target, n, hits, acc, ci in report.rows:
        if int(n) >= CALIBRATION_N:
            errors[(model, task)] = abs(float(acc) - float(target))
    return errors


# ---------------------------------------------------------------------------
# Robustness and duration comparison

TABLE2_TASKS = ("t1", "t2", "t3")
TABLE2_NH_TARGET = {
    ("t1", "skilled"): 128.2, ("t1", "nse"): 119.1,
    ("t2", "skilled"): 151.0, ("t2", "nse"): 131.0,
    ("t3", "skilled"): 211.6, ("t3", "nse"): 134.9,
}
TABLE2_OVERHEAD_TARGET = {"t1": 7.64, "t2": 15.29, "t3": 56.76}
RUNS_PER_CLASS = {"nh": 10, "oh": 5, "lsh": 5}


def _table2_run(task: str, hazard_class: str, mode: str, run_seed: int) -> tuple[float, bool, Optional[str]]:
    spec = load_shipped_scenario(f"{task}_{hazard_class}")
    spec = dataclasses.replace(spec, seed=run_seed)
    collect: dict = {}
    outcome = run_scenario(spec, mode=mode, collect=collect)
    failure = None
    if not outcome.completed:
        failure = collect["world"].workflow_failure or "abort"
    return outcome.task_duration, outcome.completed, failure


def run_table2(seed: int = 123, out_dir: Optional[Path] = None) -> ExperimentReport:
    report = ExperimentReport(
        experiment_id="table2",
        seed=seed,
        config_digest=config_digest(),
        columns=["task", "mode", "hazard_class", "runs", "successes",
                 "mean_duration_s", "std_duration_s", "success_rate_pct"],
    )
    means: dict[tuple[str, str], float] = {}
    for task in TABLE2_TASKS:
        for mode in ("skilled", "nse"):
            total_runs = 0
            total_success = 0
            for hazard_class, count in RUNS_PER_CLASS.items():
                durations = []
                successes = 0
                for i in range(count):
                    cell_tag = f"{task}|{mode}|{hazard_class}"
                    cell_hash = int(hashlib.sha256(cell_tag.encode()).hexdigest()[:6], 16) % 997
                    run_seed = seed * 10_000 + cell_hash * 20 + i
                    duration, ok, failure = _table2_run(task, hazard_class, mode, run_seed)
                    if failure in ("collision", "unsafe_manipulation"):
                        duration_value = None
                    else:
                        duration_value = duration
                    if duration_value is not None:
                        durations.append(duration_value)
                    successes += int(ok)
                total_runs += count
                total_success += successes
                if durations:
                    mean = float(np.mean(durations))
                    std = float(np.std(durations))
                else:
                    mean, std = float("nan"), float("nan")
                if hazard_class == "nh":
                    means[(task, mode)] = mean
                report.rows.append([
                    task, mode, hazard_class, count, successes,
                    "fail" if not durations else f"{mean:.1f}",
                    "fail" if not durations else f"{std:.1f}",
                    f"{100.0 * successes / count:.0f}",
                ])
            rate = 100.0 * total_success / total_runs
            report.notes.append(f"{task} {mode}: success rate {rate:.0f}% over {total_runs} runs")
    for task in TABLE2_TASKS:
        skilled = means[(task, "skilled")]
        nse = means[(task, "nse")]
        overhead = 100.0 * (skilled - nse) / nse
        report.notes.append(
            f"{task}: skilled NH {skilled:.1f}s vs unmonitored {nse:.1f}s "
            f"-> overhead {overhead:.2f}% (target {TABLE2_OVERHEAD_TARGET[task]:.2f}%)"
        )
    if out_dir is not None:
        report.write(out_dir)
    return report


def table2_summary(report: ExperimentReport) -> dict:
    """Success rates and NH means keyed for assertions."""
    summary: dict = {"success": {}, "nh_mean": {}, "overhead": {}}
    per_mode: dict[tuple[str, str], list[tuple[int, int]]] = {}
    for task, mode, hazard_class, runs, successes, mean, std, rate in report.rows:
        per_mode.setdefault((task, mode), []).append((int(runs), int(successes)))
        if hazard_class == "nh":
            summary["nh_mean"][(task, mode)] = float(mean)
    for (task, mode), counts in per_mode.items():
        total = sum(r for r, s in counts)
        good = sum(s for r, s in counts)
        summary["success"][(task, mode)] = 100.0 * good / total
    for task in TABLE2_TASKS:
        skilled = summary["nh_mean"][(task, "skilled")]
        nse = summary["nh_mean"][(task, "nse")]
        summary["overhead"][task] = 100.0 * (skilled - nse) / nse
    return summary


# ---------------------------------------------------------------------------
# Single-run harness

def _run_single_combined(spec: ScenarioSpec, mode: str, consent, events: list[dict]) -> dict:
    """Combined tasks go through the task protocol: a navigation leg, then
    the named manipulation."""
    from .orchestrator import Session, TaskMessage

    session = Session(spec, mode=mode)
    if consent is not None:
        session._consent_source = lambda: consent  # type: ignore[assignment]
    msg = TaskMessage(
        task_type="combined_task",
        task_name=spec.task.name,
        location=spec.task.location,
        robot_task_id=f"run-{spec.scenario_id.lower()}-{spec.seed}",
    )
    record = session.submit_task(msg, wait=True)
    assert record is not None
    events.extend(
        {"kind": e.kind, "payload": e.payload}
        for e in session.events
        if e.kind != "telemetry"
    )
    return {
        "scenario_id": spec.scenario_id,
        "skill": "combined",
        "mode": mode,
        "seed": spec.seed,
        "record": record.as_dict(),
        "duration": round(record.total_duration, 3),
        "completed": record.success,
        "failure_mode": record.failure_mode,
    }


def run_single(scenario_id: str, mode: str = "skilled", seed: Optional[int] = None,
               auto_consent: Optional[float] = None, out_dir: Optional[Path] = None,
               skill: Optional[str] = None) -> dict:
    try:
        spec = load_shipped_scenario(scenario_id)
    except Exception as exc:
        raise MissingScenarioError(str(exc)) from None
    if skill is not None and skill != spec.skill:
        raise ExperimentError(
            f"scenario {scenario_id} is a {spec.skill} scenario; cannot run it as {skill}"
        )
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    consent = None
    if auto_consent is not None:
        consent = AutoConsent(delay=auto_consent)
    events: list[dict] = []

    def emit(kind: str, payload: dict) -> None:
        events.append({"kind": kind, "payload": payload})

    collect: dict = {}
    if spec.task.kind == "combined":
        result = _run_single_combined(spec, mode, consent, events)
    else:
        outcome = run_scenario(spec, mode=mode, consent=consent, emit=emit, collect=collect)
        failure = None
        if not outcome.completed:
            failure = collect["world"].workflow_failure or ("abort" if outcome.aborted else None)
        result = {
            "scenario_id": spec.scenario_id,
            "skill": spec.skill,
            "mode": mode,
            "seed": spec.seed,
            "final_action": outcome.final_action.value,
            "halts": outcome.halts,
            "alerts": [a.as_dict() for a in outcome.alerts],
            "consent_waits": [
                {"start": round(w.start, 3), "end": None if w.end is None else round(w.end, 3),
                 "granted": w.granted}
                for w in outcome.consent_waits
            ],
            "duration": round(outcome.task_duration, 3),
            "completed": outcome.completed,
            "workflow_failure": outcome.workflow_failure,
            "failure_mode": failure,
        }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{spec.scenario_id.lower()}_{mode}_{spec.seed}"
        record_path = out_dir / f"{stem}.record.json"
        record_path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        events_path = out_dir / f"{stem}.events.ldjson"
        events_path.write_text(
            "".join(json.dumps(e, sort_keys=True) + "\n" for e in events), encoding="utf-8"
        )
        traces = collect.get("traces") or []
        trace_path = out_dir / f"{stem}.trace.ldjson"
        with open(trace_path, "w", encoding="utf-8") as fh:
            for t in traces:
                for line in t.to_lines():
                    fh.write(line + "\n")
        result["files"] = [str(record_path), str(events_path), str(trace_path)]
    return result
