"""HTTP service wrapping the stack: mission runs, solver access, trace checks.

All endpoints are stateless compute calls; clients own file storage. The CLI
talks to this app in-process by default and over the network with --server.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import MissionConfig, SimConfig, WorldConfig
from .contacts import ContactPlan, ContactSequenceProblem, plan_contacts
from .errors import ConfigError, TraybotError
from .qp import QpProblem, solve_qp
from .sim import check_invariants_data, run_mission

app = FastAPI(title="traybot", version=__version__)


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    world: WorldConfig
    mission: MissionConfig
    sim: SimConfig


class RunResponse(BaseModel):
    exit_status: str
    final_node: str
    ticks: int
    layer_start: int
    layer_end: int
    trace_csv: str
    events_jsonl: str
    perceived_world: Optional[WorldConfig] = None


class QpRequest(BaseModel):
    Q: list[list[float]]
    q: list[float]
    A_eq: list[list[float]] = Field(default_factory=list)
    b_eq: list[float] = Field(default_factory=list)
    A_in: list[list[float]] = Field(default_factory=list)
    lower: list[float] = Field(default_factory=list)
    upper: list[float] = Field(default_factory=list)
    tol: float = 1e-6
    max_iter: int = 4000


class QpResponse(BaseModel):
    x: list[float]
    duals: list[float]
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float


class ContactPlanRequest(BaseModel):
    horizon: int
    q_initial: list[float]
    q_target: list[float]
    weight: Optional[list[list[float]]] = None
    regularization: float = 1e-6


class ContactPlanResponse(BaseModel):
    pattern: list[list[int]]
    knots: list[list[float]]
    objective: float
    q_initial: list[float]
    q_target: list[float]


class CheckRequest(BaseModel):
    trace_csv: str
    events_jsonl: str
    world: WorldConfig


class CheckResponse(BaseModel):
    ok: bool
    violations: list[str]


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    try:
        result = run_mission(request.world, request.mission, request.sim)
    except (ConfigError, TraybotError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return RunResponse(
        exit_status=result.exit_status,
        final_node=result.final_node,
        ticks=result.ticks,
        layer_start=result.layer_start,
        layer_end=result.layer_end,
        trace_csv=result.trace_csv,
        events_jsonl=result.events_jsonl,
        perceived_world=result.perceived_world,
    )


@app.post("/solve-qp", response_model=QpResponse)
def solve_qp_endpoint(request: QpRequest) -> QpResponse:
    try:
        problem = QpProblem.from_json_dict(request.model_dump())
        solution = solve_qp(problem, tol=request.tol, max_iter=request.max_iter)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return QpResponse(
        x=solution.x.tolist(),
        duals=solution.duals.tolist(),
        status=solution.status.value,
        iterations=solution.iterations,
        primal_residual=solution.primal_residual,
        dual_residual=solution.dual_residual,
        objective=float(solution.objective) if np.isfinite(solution.objective) else 0.0,
    )


@app.post("/plan-contacts", response_model=ContactPlanResponse)
def plan_contacts_endpoint(request: ContactPlanRequest) -> ContactPlanResponse:
    try:
        problem = ContactSequenceProblem(
            horizon=request.horizon,
            q_target=np.asarray(request.q_target, dtype=float),
            q_initial=np.asarray(request.q_initial, dtype=float),
            weight=(
                np.asarray(request.weight, dtype=float)
                if request.weight is not None
                else ContactSequenceProblem.default_weight()
            ),
            regularization=request.regularization,
        )
        plan: ContactPlan = plan_contacts(problem)
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    d = plan.to_json_dict()
    return ContactPlanResponse(
        pattern=d["pattern"],
        knots=d["knots"],
        objective=d["objective"],
        q_initial=d["q_initial"],
        q_target=d["q_target"],
    )


@app.post("/check-invariants", response_model=CheckResponse)
def check_invariants_endpoint(request: CheckRequest) -> CheckResponse:
    try:
        violations = check_invariants_data(
            request.trace_csv, request.events_jsonl, request.world
        )
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return CheckResponse(ok=not violations, violations=violations)
