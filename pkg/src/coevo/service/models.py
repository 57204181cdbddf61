"""Request and response shapes for the HTTP service.

Requests accept a partial configuration (missing fields fall back to
bundled defaults) and an optional inline measure table. Shape errors
(wrong types, unknown fields) are rejected by validation here; semantic
violations (out-of-range values, regime constraints) surface as a 400
with the full list of problems.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class ConfigPayload(BaseModel):
    """Partial simulation config; every field optional, unknown names rejected."""

    model_config = ConfigDict(extra="forbid")

    virus_initial_population: Optional[int] = None
    virus_size: Optional[int] = None
    policy_population_size: Optional[int] = None
    policy_size: Optional[int] = None
    base_rate: Optional[float] = None
    tmax: Optional[int] = None
    policy_crossover_rate: Optional[float] = None
    policy_mutation_rate: Optional[float] = None
    virus_mutation_rate: Optional[float] = None
    population_cap: Optional[int] = None
    mode: Optional[str] = None
    regime: Optional[str] = None
    seed: Optional[int] = None

    def overrides(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class MeasureRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    ci_low: float
    ci_high: float


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigPayload = Field(default_factory=ConfigPayload)
    effects: Optional[list[MeasureRow]] = None


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigPayload = Field(default_factory=ConfigPayload)
    effects: Optional[list[MeasureRow]] = None
    seeds: list[int] = Field(min_length=1)


class CompareRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigPayload = Field(default_factory=ConfigPayload)
    effects: Optional[list[MeasureRow]] = None
    seeds: list[int] = Field(min_length=1)
    regimes: Optional[list[str]] = None


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigPayload = Field(default_factory=ConfigPayload)
    effects: Optional[list[MeasureRow]] = None


class StatusDoc(BaseModel):
    kind: str
    period: Optional[int] = None


class RowDoc(BaseModel):
    t: int
    total_viruses: int
    n_strains: int
    mean_virus_r: Optional[float] = None
    mean_policy_reduction: float
    mean_effective_r: Optional[float] = None
    freq_best_gene: Optional[float] = None
    extinct: bool
    overflowed: bool


class PolicyEffectsDoc(BaseModel):
    names: list[str]
    effects: list[float]
    weights: list[float]


class RunDoc(BaseModel):
    seed: int
    status: StatusDoc
    status_label: str
    config: dict
    gene_effects: list[float]
    policy_effects: PolicyEffectsDoc
    rows: list[RowDoc]


class SweepResponse(BaseModel):
    seeds: list[int]
    runs: list[RunDoc]
    summary: list[dict]


class CompareResponse(BaseModel):
    seeds: list[int]
    regimes: dict[str, SweepResponse]


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str]
    config: Optional[dict] = None
    n_measures: Optional[int] = None


class HealthResponse(BaseModel):
    status: str
    version: str
