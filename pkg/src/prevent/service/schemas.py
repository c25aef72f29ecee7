"""Request and response bodies for the session service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class SessionCreateRequest(BaseModel):
    scenario: str = Field(description="shipped scenario id, e.g. S5 or T2_NH")
    mode: str = "skilled"
    seed: Optional[int] = None
    speed: float = Field(default=0.0, ge=0.0, description="sim seconds per wall second; 0 = unpaced")


class SessionInfo(BaseModel):
    session_id: str
    scenario_id: str
    mode: str
    busy: bool
    last_seq: int


class TaskRequest(BaseModel):
    task_type: str
    task_name: str = ""
    location: str
    robot_task_id: str
    user_id: str = "operator"


class ConsentRequest(BaseModel):
    robot_task_id: str
    command: str = Field(pattern="^(continue|abort)$")
    user_id: str = "operator"


class InjectRequest(BaseModel):
    kind: str
    x: float
    y: float
    label: str
    chemical: Optional[str] = None
    containment: str = "spilled"
    scale: float = 1.0
    visible: bool = True
    on_path: bool = False
    in_interaction_zone: bool = False
    unsafe: bool = False
    delay: float = Field(default=0.0, ge=0.0, description="seconds of sim time before it appears")

    @model_validator(mode="after")
    def chemical_consistency(self):
        voc_kinds = {"spillage", "vial", "uncapped_vial", "knocked_vial"}
        if self.kind in voc_kinds and self.chemical is None:
            raise ValueError(f"hazard kind {self.kind!r} needs a chemical")
        if self.kind not in voc_kinds and self.chemical is not None:
            raise ValueError(f"hazard kind {self.kind!r} does not carry a chemical")
        return self


class AckResponse(BaseModel):
    accepted: bool
    detail: str = ""


class ErrorResponse(BaseModel):
    error: str
    detail: str
