from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Dict, Tuple, NamedTuple
from enum import Enum
import math


class AuthResult(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class TraceKind(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class GraphMode(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"
    HYBRID = "hybrid"


class Measure(str, Enum):
    DEGREE = "degree"
    CLOSENESS = "closeness"
    BETWEENNESS = "betweenness"


class StrategyKind(str, Enum):
    NO_QUARANTINE = "no_quarantine"
    RANDOM = "random"
    SYMC = "symc"
    HYBRID = "hybrid"


class SpreaderProfile(str, Enum):
    HUB = "hub"
    ENVIRONMENTAL = "environmental"


# WLAN log records

class LogEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: int = Field(..., gt=0)
    process: str
    ap_name: str
    student_id: str
    role: str
    mac: str
    ssid: str
    result: AuthResult

    def to_line(self) -> str:
        """Serialize back to the comma separated log format"""
        return ",".join([
            str(self.timestamp), self.process, self.ap_name, self.student_id,
            self.role, self.mac, self.ssid, self.result.value
        ])


# Trajectories

class Tracklet(NamedTuple):
    ap_id: int
    arrival: int
    stay: int

    @property
    def departure(self) -> int:
        return self.arrival + self.stay


class Trajectory(NamedTuple):
    person_id: str
    tracklets: Tuple[Tracklet, ...]


# Contact graphs

class ContactConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    d_sym: int = Field(900, gt=0)
    d_env: int = Field(3000, ge=0)
    d_asym: int = Field(300, gt=0)

    @model_validator(mode='after')
    def check_asym_within_sym(self):
        if self.d_asym > self.d_sym:
            raise ValueError(f"d_asym ({self.d_asym}) must not exceed d_sym ({self.d_sym})")
        return self


# Centrality

class CentralityScores(BaseModel):
    measure: Measure
    scores: Dict[str, float]
    ranking: List[str]

    @classmethod
    def from_scores(cls, measure: Measure, scores: Dict[str, float]) -> 'CentralityScores':
        # Descending score, ties broken by ascending person id
        ranking = sorted(scores, key=lambda person: (-scores[person], person))
        return cls(measure=measure, scores=dict(scores), ranking=ranking)

    def rank_of(self, person_id: str) -> int:
        return self.ranking.index(person_id) + 1


# SEIR

class SeirParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float = Field(0.155, ge=0.0, le=1.0)
    sigma: float = Field(1 / 5.2, gt=0.0, le=1.0)
    gamma: float = Field(1 / 12.39, gt=0.0, le=1.0)
    initial_infected: int = Field(50, ge=0)
    max_days: int = Field(180, ge=1)
    runs: int = Field(50, ge=1)
    seed: int = 20150302


class SeirTrace(BaseModel):
    S: List[int]
    E: List[int]
    I: List[int]
    R: List[int]
    Q: List[int]
    cumulative_infected: List[int]
    # (day, exposed person, infectious in-neighbours on the previous day)
    exposures: Optional[List[Tuple[int, str, Tuple[str, ...]]]] = None

    @property
    def days(self) -> int:
        return len(self.S) - 1

    @property
    def population(self) -> int:
        return self.S[0] + self.E[0] + self.I[0] + self.R[0] + self.Q[0]


class EpidemicMetrics(BaseModel):
    doubling_time: Optional[float] = None
    total_infected_fraction: float
    peak_infected_time: float
    peak_infected_fraction: float


class EnsembleResult(BaseModel):
    mean: EpidemicMetrics
    std: EpidemicMetrics
    runs: int
    undefined_doubling_count: int = 0
    mean_trace: Dict[str, List[float]] = Field(default_factory=dict)

    def stderr(self, metric: str) -> float:
        value = getattr(self.std, metric)
        if value is None:
            return math.nan
        defined = self.runs - self.undefined_doubling_count if metric == 'doubling_time' else self.runs
        return value / math.sqrt(max(defined, 1))

    def to_export(self) -> dict:
        return {
            'doubling_time': self.mean.doubling_time,
            'total_infected_fraction': self.mean.total_infected_fraction,
            'peak_infected_time': self.mean.peak_infected_time,
            'peak_infected_fraction': self.mean.peak_infected_fraction,
            'stddevs': self.std.model_dump(),
            'undefined_doubling_count': self.undefined_doubling_count,
            'runs': self.runs,
        }


# Experiment harness

class Strategy(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: StrategyKind
    measure: Optional[Measure] = None
    k: int = Field(0, ge=0)

    @model_validator(mode='after')
    def check_shape(self):
        if self.kind == StrategyKind.NO_QUARANTINE and self.k != 0:
            raise ValueError("no_quarantine strategy requires k = 0")
        if self.kind == StrategyKind.RANDOM and self.measure is not None:
            raise ValueError("random strategy takes no centrality measure")
        if self.kind in (StrategyKind.SYMC, StrategyKind.HYBRID) and self.measure is None:
            raise ValueError(f"{self.kind.value} strategy requires a centrality measure")
        return self

    @property
    def label(self) -> str:
        return {
            StrategyKind.NO_QUARANTINE: "No quarantine",
            StrategyKind.RANDOM: "Random",
            StrategyKind.SYMC: "SymC",
            StrategyKind.HYBRID: "Hybrid",
        }[self.kind]


class ReportRow(BaseModel):
    strategy: Strategy
    result: EnsembleResult
    # Hybrid minus SymC per metric for the same measure, on Hybrid rows only
    delta: Optional[Dict[str, Optional[float]]] = None


class ExperimentReport(BaseModel):
    rows: List[ReportRow]
    metadata: Dict[str, object] = Field(default_factory=dict)


class SweepGrid(BaseModel):
    measure: Measure
    infected_fracs: List[float]
    quarantine_fracs: List[float]
    # values[i][q] is None for infeasible cells (i + q > 100)
    values: List[List[Optional[float]]]
    stderr: List[List[Optional[float]]]
    turning_point: Optional[float] = None


# Stability analysis

class RankedList(BaseModel):
    ids: List[str]
    label: str = ""

    @field_validator('ids')
    @classmethod
    def no_duplicates(cls, ids):
        if len(set(ids)) != len(ids):
            raise ValueError("ranked list contains duplicate ids")
        return ids


class SimilarityMatrix(BaseModel):
    labels: List[str]
    values: List[List[float]]


# Synthetic campus

class CampusSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_students: int = Field(3748, ge=1)
    n_buildings: int = Field(12, ge=1)
    aps_per_building: int = Field(12, ge=1)
    weeks: int = Field(2, ge=1)
    hub_spreaders: int = Field(20, ge=0)
    env_spreaders: int = Field(10, ge=0)
    class_size: int = Field(8, ge=1)
    hotspot_visit_prob: float = Field(0.33, ge=0.0, le=1.0)
    noise_rate: float = Field(0.02, ge=0.0, le=1.0)
    start_date: str = "2015-03-02"
    timezone: str = "UTC"
    ssid: str = "SecureNet"
    open_ssid: str = "OpenNet"
    seed: int = 7

    @model_validator(mode='after')
    def check_spreaders(self):
        planted = self.hub_spreaders + self.env_spreaders
        if planted >= self.n_students:
            raise ValueError(f"planted spreaders ({planted}) must be fewer than students ({self.n_students})")
        if planted > self.n_buildings * self.aps_per_building - 1:
            raise ValueError("not enough campus APs to give every planted spreader a hotspot")
        return self

    @property
    def planted(self) -> int:
        return self.hub_spreaders + self.env_spreaders
