"""Hierarchical halt/resume/alert decisions over the three modality inputs.

Inputs are the binary vision flag (x1), the VOC index in PPM (x2) and an
optional classifier verdict (x3, label plus score). The classifier is a
secondary check: it may only be sampled after a primary trigger, and the
functions here enforce that contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Action(Enum):
    PROCEED = "proceed"
    HALT_AUTO_RESUME = "halt_auto_resume"
    HALT_AWAIT_CONSENT = "halt_await_consent"


_SEVERITY = {Action.PROCEED: 0, Action.HALT_AUTO_RESUME: 1, Action.HALT_AWAIT_CONSENT: 2}


def severity(action: Action) -> int:
    return _SEVERITY[action]


def severity_max(a: Action, b: Action) -> Action:
    return a if _SEVERITY[a] >= _SEVERITY[b] else b


class DecisionError(Exception):
    pass


class MissingSecondaryError(DecisionError):
    """A trigger fired but no classifier verdict was supplied."""


class SpuriousSecondaryError(DecisionError):
    """A classifier verdict was supplied without a trigger."""


class PhaseViolationError(DecisionError):
    pass


@dataclass(frozen=True)
class ClassifierVerdict:
    label: str
    score: float


@dataclass
class DecisionInputs:
    x1: int
    x2: float
    t_safe: float
    safe_labels: frozenset[str]
    x3: Optional[ClassifierVerdict] = None


def decide_navigation(inputs: DecisionInputs) -> Action:
    """Continuous-monitoring decision: trigger on x1 == 1 or x2 above T_safe."""
    triggered = inputs.x1 == 1 or inputs.x2 > inputs.t_safe
    if triggered and inputs.x3 is None:
        raise MissingSecondaryError("trigger fired but no classifier verdict present")
    if not triggered:
        if inputs.x3 is not None:
            raise SpuriousSecondaryError("classifier verdict present without a trigger")
        return Action.PROCEED
    if inputs.x3.label in inputs.safe_labels:
        return Action.HALT_AUTO_RESUME
    return Action.HALT_AWAIT_CONSENT


def decide_manipulation(inputs: DecisionInputs, phase: str) -> Action:
    """One-shot inspection decision.

    phase "initial_voc" gates on x2 alone (halt at x2 >= T_safe); phase
    "post_vision" gates on x1 and, when x1 == 1, on the classifier label.
    """
    if phase == "initial_voc":
        if inputs.x3 is not None:
            raise PhaseViolationError("classifier cannot have run before the initial VOC check")
        if inputs.x2 < inputs.t_safe:
            return Action.PROCEED
        return Action.HALT_AWAIT_CONSENT
    if phase == "post_vision":
        if inputs.x1 == 0:
            if inputs.x3 is not None:
                raise SpuriousSecondaryError("classifier verdict present without a vision trigger")
            return Action.PROCEED
        if inputs.x3 is None:
            raise MissingSecondaryError("vision trigger fired but no classifier verdict present")
        if inputs.x3.label in inputs.safe_labels:
            return Action.HALT_AUTO_RESUME
        return Action.HALT_AWAIT_CONSENT
    raise PhaseViolationError(f"unknown phase {phase!r}")
