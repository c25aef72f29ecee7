"""Calibrated constants shared by the simulation, sensors and experiments.

Values here are either interface defaults (tick size, ranges) or calibration
targets fitted so that the shipped scenario library reproduces the reference
duration and accuracy tables. Anything fitted is grouped and named as such.
"""

from importlib import resources

# --- time base -------------------------------------------------------------
TICK_DT = 0.1                 # seconds of simulated time per world step
ABORT_TIMEOUT_S = 600.0       # a consent wait with no responder gives up here

# --- robot and detection geometry -------------------------------------------
BASE_SPEED_MPS = 0.5
NAV_VISION_AHEAD_M = 0.7      # forward reach of the floor camera
NAV_VISION_HALFWIDTH_M = 0.4  # lateral half-width of the monitored strip
CHECK_VISION_RADIUS_M = 0.6   # inspection camera coverage around the grasp frame
COLLISION_RADIUS_M = 0.3      # unmonitored robot contacting a hazard this close fails
OLFACTORY_RADIUS_M = 1.0      # advertised sensing surround (queries only; attenuation rules)

# --- olfactory model (fitted: sealed grand mean = 2.5 PPM) -------------------
CHEMICALS = ("acetone", "ethanol", "isopropanol")
EMISSION_PPM = {"acetone": 90.0, "ethanol": 45.0, "isopropanol": 15.0}
CONTAINMENT_FACTOR = {
    "sealed": 0.05,
    "partially_closed": 0.15,
    "unsealed": 0.4,
    "spilled": 1.0,
}
VOC_NOISE_STD_PPM = 0.6
VOC_RESPONSE_LATENCY_S = 1.5  # free calibration knob; drives missed sudden hazards
T_SAFE_DEFAULT_PPM = 2.5

# --- vision quality check ----------------------------------------------------
MIN_FRAME_QUALITY = 0.5
BLUR_EVENT_PROB = 0.02

# --- label set ----------------------------------------------------------------
ALL_LABELS = (
    "no_problem_detected",
    "foreign_object_off_path",
    "spillage",
    "capping_failure",
    "obstruction",
    "broken_glass",
    "contaminated_glove",
    "foreign_object",
)
SAFE_LABELS = ("no_problem_detected", "foreign_object_off_path")

# --- behavior durations (fitted to the reference task-duration table) --------
STOP_LATENCY_S = 0.5
CLASSIFY_DWELL_S = 2.0
ALERT_DWELL_S = 0.5
RESUME_DWELL_S = 0.5
INITIAL_VOC_READ_S = 4.0
BINARY_INSPECT_S = 4.0
MOVE_TO_CHECK_S = {"capping": 12.0, "chemspeed": 68.7}
MID_VOC_OPS_S = {"capping": 187.6, "chemspeed": 251.4}
MANIPULATION_S = {"pickup_rack": 131.0, "place_rack": 134.9}

# Continuous monitoring dwell: the navigation monitor pauses the base for
# CIN_MONITOR_DWELL_S after every CIN_MONITOR_PERIOD_S of driving.
CIN_MONITOR_PERIOD_S = 4.58
CIN_MONITOR_DWELL_S = 0.35

# Per-run start-up jitter so repeated runs do not produce degenerate spreads.
START_JITTER_MAX_S = 0.3

# --- consent response models (free parameters; see scenario docs) ------------
CONSENT_DELAY_RANGE_S = {
    "default": (60.0, 300.0),
    "object": (41.0, 54.0),
    "spill": (150.0, 510.0),
}

# --- olfactory deployment-accuracy trial protocols (fitted) -------------------
# Navigation: a source of random strength appears suddenly at d0 metres in
# front of the moving robot; success means the ramping reading crosses the
# threshold within the response window.
OLF_NAV_TRIAL = {
    "d_lo": 0.5, "d_hi": 3.3,      # appearance distance, metres
    "s_lo": 0.08, "s_hi": 1.0,     # source strength scale
    "window": 2.1,                 # halt-in-time budget, seconds
    "cadence": 0.35,               # sensor sampling period, seconds
}
# Manipulation: the probe reads a rack slot at distance d; partially closed
# vials and far slots account for the misses.
OLF_MANIP_TRIAL = {
    "d_lo": 0.6, "d_hi": 1.25,     # probe-to-slot distance, metres
    "w_unsealed": 0.65, "w_spilled": 0.2, "w_partial": 0.15,
}

# --- deployment accuracy targets keyed as table1.<model>.<task> ---------------
ACCURACY_FILE = "model_accuracies.txt"
VOC_TRIALS_FILE = "voc_trials.txt"


def data_path(*parts: str):
    """Path to a packaged data file (trees, scenarios, calibration)."""
    root = resources.files("prevent") / "data"
    for part in parts:
        root = root / part
    return root


def load_accuracy_table() -> dict[str, float]:
    """Parse the key = value accuracy file into a flat dict."""
    text = data_path("calibration", ACCURACY_FILE).read_text(encoding="utf-8")
    table: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        table[key.strip()] = float(value.strip())
    return table
