"""HTTP service exposing the inference surfaces of a trained model.

The service wraps what a monitoring console needs interactively: simulate
a series, falsify it, scan it, attribute the flags. Training and corpus
generation stay on the command line — they are long-running batch jobs
with file artifacts, not request/response calls.

The model checkpoint and calibration are read from the configured output
directory on first use and cached on the app; restart the service to pick
up a retrained model.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import attack, detector, explain, workflow
from .config import RunConfig
from .errors import ConfigError, DataError
from .signals import (
    CONTINUOUS_SIGNALS,
    SIGNALS,
    STATE_SIGNALS,
    Series,
    infer_scram_onset,
    validate_series,
)
from .simulate import (
    CycleProfile,
    ScramProfile,
    generate_full_cycle,
    generate_scram,
    vary_cycle_profile,
    vary_scram_profile,
)


class SeriesPayload(BaseModel):
    """A multivariate series on the wire: one list per signal, nulls as null."""

    start_time: int = 0
    values: dict[str, list[float | str | None]]

    @classmethod
    def from_series(cls, series: Series) -> "SeriesPayload":
        values: dict[str, list[float | str | None]] = {}
        for name in SIGNALS:
            col = series.values[name]
            if name in STATE_SIGNALS:
                values[name] = [str(v) for v in col]
            else:
                values[name] = [None if np.isnan(v) else float(v) for v in col]
        return cls(start_time=series.start_time, values=values)

    def to_series(self) -> Series:
        missing = [name for name in SIGNALS if name not in self.values]
        if missing:
            raise DataError(f"series payload missing signals: {missing}")
        converted: dict[str, np.ndarray] = {}
        for name in SIGNALS:
            col = self.values[name]
            if name in STATE_SIGNALS:
                converted[name] = np.array([str(v) for v in col], dtype="<U8")
            else:
                converted[name] = np.array(
                    [np.nan if v is None else float(v) for v in col], dtype=np.float64)
        series = Series(values=converted, start_time=self.start_time)
        validate_series(series)
        return series


class HealthResponse(BaseModel):
    status: str
    model_loaded: bool


class ModelInfoResponse(BaseModel):
    window: int
    features: int
    encoder_units: list[int]
    bottleneck: int
    decoder_units: list[int]
    threshold: float
    tau_shap: float
    metric: str


class SimulateCycleRequest(BaseModel):
    seed: int = 0
    duration: int | None = Field(default=None, ge=1)


class SimulateScramRequest(BaseModel):
    seed: int = 0
    duration: int | None = Field(default=None, ge=1)
    onset: int | None = Field(default=None, ge=1)
    initial_power: float | None = Field(default=None, gt=0.0, le=100.0)


class SimulateResponse(BaseModel):
    series: SeriesPayload
    onset: int | None = None


class InjectRequest(BaseModel):
    series: SeriesPayload
    level: int = Field(ge=1, le=attack.MAX_LEVEL)
    record_start: int | None = None
    period: int | None = None
    repeats: int | None = None
    attack_start: int | None = None


class InjectResponse(BaseModel):
    series: SeriesPayload
    falsified_signals: list[str]
    attack_start: int
    attack_end: int


class DetectRequest(BaseModel):
    series: SeriesPayload
    threshold: float | None = Field(default=None, gt=0.0)


class DetectResponse(BaseModel):
    seconds: list[int]
    errors: list[float]
    flags: list[bool]
    threshold: float
    metric: str
    flagged_count: int


class SignalVerdictPayload(BaseModel):
    signal: str
    replayed: bool
    start: int | None
    end: int | None
    duration: int | None


class ExplainRequest(BaseModel):
    series: SeriesPayload
    onset: int | None = None
    tau: float | None = Field(default=None, gt=0.0)


class ExplainResponse(BaseModel):
    seconds: list[int]
    phi: dict[str, list[float]]
    tau: float
    verdicts: list[SignalVerdictPayload]
    replayed_signals: list[str]
    attack_start: int | None
    attack_end: int | None
    nothing_to_explain: bool
    low_confidence: bool


class _ModelBundle:
    """Checkpoint, thresholds, and baseline loaded once per process."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.model = None
        self.epsilon = None
        self.tau = None
        self.baseline = None

    def load(self):
        if self.model is None:
            try:
                self.model = workflow._detection_model(self.config.out_dir)
                self.epsilon, self.tau = workflow.resolve_thresholds(self.config, self.config.out_dir)
                self.baseline = workflow.build_event_baseline(self.config, self.config.data_dir, self.model)
            except (ConfigError, DataError) as exc:
                self.model = None
                raise HTTPException(
                    status_code=503,
                    detail=f"no usable model: {exc} (train and calibrate via the CLI first)",
                ) from exc
        return self


def create_app(config: RunConfig | None = None) -> FastAPI:
    config = config or RunConfig()
    app = FastAPI(title="replay attack monitor", version="1.0")
    bundle = _ModelBundle(config)

    @app.exception_handler(DataError)
    async def _data_error(request, exc: DataError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", model_loaded=bundle.model is not None)

    @app.get("/model", response_model=ModelInfoResponse)
    def model_info() -> ModelInfoResponse:
        b = bundle.load()
        arch = b.model.architecture
        return ModelInfoResponse(
            window=arch.window, features=arch.features,
            encoder_units=list(arch.encoder_units), bottleneck=arch.bottleneck,
            decoder_units=list(arch.decoder_units),
            threshold=b.epsilon, tau_shap=b.tau, metric=config.metric)

    @app.post("/simulate/cycle", response_model=SimulateResponse)
    def simulate_cycle(request: SimulateCycleRequest) -> SimulateResponse:
        base = CycleProfile(duration=request.duration or config.cycle_duration,
                            null_rate=config.null_rate, outlier_rate=config.outlier_rate)
        series = generate_full_cycle(vary_cycle_profile(base, request.seed))
        return SimulateResponse(series=SeriesPayload.from_series(series))

    @app.post("/simulate/scram", response_model=SimulateResponse)
    def simulate_scram(request: SimulateScramRequest) -> SimulateResponse:
        duration = request.duration or config.scram_duration
        onset = request.onset or config.scram_onset
        try:
            base = ScramProfile(duration=duration, onset=onset,
                                null_rate=config.null_rate, outlier_rate=config.outlier_rate)
            profile = vary_scram_profile(base, request.seed)
            if request.initial_power is not None:
                profile = ScramProfile(duration=duration, onset=onset,
                                       initial_power=request.initial_power,
                                       null_rate=config.null_rate,
                                       outlier_rate=config.outlier_rate, seed=request.seed)
            series = generate_scram(profile)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return SimulateResponse(series=SeriesPayload.from_series(series), onset=onset)

    @app.post("/inject", response_model=InjectResponse)
    def inject(request: InjectRequest) -> InjectResponse:
        series = request.series.to_series()
        try:
            falsified, truth = attack.build_scenario(
                series, request.level,
                t_start=request.record_start if request.record_start is not None else config.record_start,
                period=request.period if request.period is not None else config.period,
                t_attack=request.attack_start if request.attack_start is not None else config.attack_start,
                repeats=request.repeats if request.repeats is not None else config.repeats)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        span = truth.spec.span
        return InjectResponse(series=SeriesPayload.from_series(falsified),
                              falsified_signals=list(truth.falsified_signals()),
                              attack_start=span[0], attack_end=span[1] - 1)

    @app.post("/detect", response_model=DetectResponse)
    def detect(request: DetectRequest) -> DetectResponse:
        b = bundle.load()
        series = request.series.to_series()
        threshold = request.threshold if request.threshold is not None else b.epsilon
        timeline = detector.scan(b.model, series, threshold, metric=config.metric)
        flags = timeline.flags
        return DetectResponse(seconds=[int(t) for t in timeline.seconds],
                              errors=[float(e) for e in timeline.errors],
                              flags=[bool(f) for f in flags],
                              threshold=threshold, metric=config.metric,
                              flagged_count=int(flags.sum()))

    @app.post("/explain", response_model=ExplainResponse)
    def explain_endpoint(request: ExplainRequest) -> ExplainResponse:
        b = bundle.load()
        series = request.series.to_series()
        onset = request.onset if request.onset is not None else infer_scram_onset(series)
        if onset is None:
            raise HTTPException(status_code=422,
                                detail="no event onset found; pass one explicitly")
        tau = request.tau if request.tau is not None else b.tau
        timeline = detector.scan(b.model, series, b.epsilon, metric=config.metric)
        result = explain.explain_flagged(b.model, series, timeline, b.baseline,
                                         onset=onset, tau=tau,
                                         min_run=config.min_run, metric=config.metric)
        per_second = result.per_second
        report = result.report
        return ExplainResponse(
            seconds=[int(t) for t in per_second.seconds],
            phi={name: [float(v) for v in per_second.phi[:, j]]
                 for j, name in enumerate(SIGNALS)},
            tau=tau,
            verdicts=[SignalVerdictPayload(signal=v.signal, replayed=v.replayed,
                                           start=v.start, end=v.end, duration=v.duration)
                      for v in report.verdicts],
            replayed_signals=list(report.replayed_signals),
            attack_start=report.attack_start,
            attack_end=report.attack_end,
            nothing_to_explain=not result.attributions,
            low_confidence=per_second.low_confidence)

    return app
