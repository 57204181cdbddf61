"""HTTP facade over the simulation engine.

Endpoints mirror the batch entry points one-to-one: /run executes a
single replicate, /sweep a seed ensemble, /compare the same seeds under
each requested regime, /validate checks inputs without running anything.
All responses are plain JSON documents; file layout is the client's
concern, so the service never writes to disk.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..engine import (
    ALL_REGIMES,
    ConfigError,
    Regime,
    SimConfig,
    compare_regimes,
    run,
    run_replicates,
)
from ..genomes import PolicyEffectSpec
from ..storage import (
    EffectSpecError,
    config_from_mapping,
    effect_spec_from_rows,
    load_default_config,
    load_default_effects,
    result_to_doc,
    summarize_ensemble,
)
from .models import (
    CompareRequest,
    CompareResponse,
    HealthResponse,
    RunDoc,
    RunRequest,
    SweepRequest,
    SweepResponse,
    ValidateRequest,
    ValidateResponse,
)


def _resolve_config(payload) -> SimConfig:
    mapping = load_default_config().as_mapping()
    mapping.update(payload.overrides())
    return config_from_mapping(mapping, source="request config")


def _resolve_effects(rows) -> PolicyEffectSpec:
    if rows is None:
        return load_default_effects()
    return effect_spec_from_rows([row.model_dump() for row in rows])


def _resolve_regimes(names) -> tuple[Regime, ...]:
    if names is None:
        return ALL_REGIMES
    regimes = []
    bad = []
    for name in names:
        try:
            regimes.append(Regime(name))
        except ValueError:
            bad.append(name)
    if bad:
        options = ", ".join(r.value for r in Regime)
        raise ConfigError([f"unknown regime {n!r} (expected one of {options})" for n in bad])
    if not regimes:
        raise ConfigError(["at least one regime is required"])
    return tuple(regimes)


def _check_distinct(seeds: list[int]) -> None:
    if len(set(seeds)) != len(seeds):
        raise ConfigError(["seeds must be distinct"])


def _sweep_doc(seeds, results) -> dict:
    return {
        "seeds": list(seeds),
        "runs": [result_to_doc(r) for r in results],
        "summary": summarize_ensemble(results),
    }


def create_app() -> FastAPI:
    app = FastAPI(title="coevo", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"errors": exc.errors})

    @app.exception_handler(EffectSpecError)
    async def _effects_error(request: Request, exc: EffectSpecError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"errors": [str(exc)]})

    @app.get("/health", response_model=HealthResponse)
    async def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/run", response_model=RunDoc)
    def run_endpoint(request: RunRequest) -> dict:
        config = _resolve_config(request.config)
        spec = _resolve_effects(request.effects)
        return result_to_doc(run(config, spec))

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(request: SweepRequest) -> dict:
        _check_distinct(request.seeds)
        config = _resolve_config(request.config)
        spec = _resolve_effects(request.effects)
        results = run_replicates(config, spec, request.seeds)
        return _sweep_doc(request.seeds, results)

    @app.post("/compare", response_model=CompareResponse)
    def compare_endpoint(request: CompareRequest) -> dict:
        _check_distinct(request.seeds)
        config = _resolve_config(request.config)
        spec = _resolve_effects(request.effects)
        regimes = _resolve_regimes(request.regimes)
        by_regime = compare_regimes(config, spec, request.seeds, regimes)
        return {
            "seeds": list(request.seeds),
            "regimes": {
                regime.value: _sweep_doc(request.seeds, results)
                for regime, results in by_regime.items()
            },
        }

    @app.post("/validate", response_model=ValidateResponse)
    def validate_endpoint(request: ValidateRequest) -> dict:
        errors: list[str] = []
        config = None
        spec = None
        try:
            config = _resolve_config(request.config)
        except ConfigError as exc:
            errors.extend(exc.errors)
        try:
            spec = _resolve_effects(request.effects)
        except EffectSpecError as exc:
            errors.append(str(exc))
        if config is not None and spec is not None and len(spec.measures) != config.policy_size:
            errors.append(
                f"effect table has {len(spec.measures)} measures, "
                f"config policy_size is {config.policy_size}"
            )
        return {
            "valid": not errors,
            "errors": errors,
            "config": config.normalized().as_mapping() if config is not None else None,
            "n_measures": len(spec.measures) if spec is not None else None,
        }

    return app


app = create_app()
