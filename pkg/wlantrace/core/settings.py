"""
Run configuration

A RunConfig is assembled from four layers, later layers winning:
field defaults < environment Config class (config.py) < config file < CLI flags.
The config file is a dotenv style KEY=VALUE file.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Optional, List, Dict, Any

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator

from wlantrace.core.errors import ConfigError
from wlantrace.core.models import ContactConfig, SeirParams, Measure

logger = logging.getLogger(__name__)

# Population the default budgets (k = 100, 50 seeds) are defined for
BASE_POPULATION = 3748


def scaled_budget(population: int, base: int, base_population: int = BASE_POPULATION) -> int:
    """Scale a budget defined for base_population to another population size"""
    if population <= 0:
        return 0
    return max(1, int(round(base * population / base_population)))


class RunConfig(BaseModel):
    # Contact tracing
    d_sym: int = Field(900, gt=0)
    d_env: int = Field(3000, ge=0)
    d_asym: int = Field(300, gt=0)

    # Trajectories
    session_timeout: int = Field(3600, ge=0)
    max_terminal_stay: int = Field(7200, ge=0)
    default_walk: int = Field(300, ge=0)
    timezone: str = "UTC"
    ssids: List[str] = Field(default_factory=list)

    # SEIR
    beta: float = Field(0.155, ge=0.0, le=1.0)
    sigma: float = Field(1 / 5.2, gt=0.0, le=1.0)
    gamma: float = Field(1 / 12.39, gt=0.0, le=1.0)
    initial_infected: Optional[int] = Field(None, ge=0)
    max_days: int = Field(180, ge=1)
    runs: int = Field(50, ge=1)

    # Experiments
    k: Optional[int] = Field(None, ge=0)
    rbo_p: float = Field(0.9, gt=0.0, lt=1.0)
    seed: int = 20150302
    threads: int = Field(1, ge=1)
    sweep_step: float = Field(5.0, gt=0.0, le=100.0)
    turning_point_threshold: float = Field(0.5, ge=0.0)
    stability_weeks: int = Field(20, ge=1)
    sweep_measure: Measure = Measure.BETWEENNESS
    weekly_table: bool = True

    # Inputs and windows
    window: Optional[str] = None
    weekly_window: Optional[str] = None
    ap_directory: Optional[str] = None
    walk_matrix: Optional[str] = None

    @field_validator('ssids', mode='before')
    @classmethod
    def split_ssids(cls, value):
        if value is None:
            return []
        if isinstance(value, str):
            return [name.strip() for name in value.split(',') if name.strip()]
        return list(value)

    def contact_config(self) -> ContactConfig:
        try:
            return ContactConfig(d_sym=self.d_sym, d_env=self.d_env, d_asym=self.d_asym)
        except ValidationError as e:
            raise ConfigError(_describe(e)) from e

    def initial_infected_for(self, population: int) -> int:
        if self.initial_infected is not None:
            return self.initial_infected
        return scaled_budget(population, 50)

    def k_for(self, population: int) -> int:
        if self.k is not None:
            return self.k
        return scaled_budget(population, 100)

    def seir_params(self, population: int) -> SeirParams:
        return SeirParams(
            beta=self.beta,
            sigma=self.sigma,
            gamma=self.gamma,
            initial_infected=self.initial_infected_for(population),
            max_days=self.max_days,
            runs=self.runs,
            seed=self.seed
        )

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode='json')

    def config_hash(self) -> str:
        canonical = json.dumps(self.snapshot(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    def to_env_text(self) -> str:
        """Render as a config file that reproduces this exact configuration"""
        lines = [f"# wlantrace effective config, hash {self.config_hash()}"]
        for name, value in sorted(self.snapshot().items()):
            if value is None:
                rendered = ''
            elif isinstance(value, bool):
                rendered = 'true' if value else 'false'
            elif isinstance(value, list):
                rendered = ','.join(str(item) for item in value)
            else:
                rendered = str(value)
            lines.append(f"{name.upper()}={rendered}")
        return "\n".join(lines) + "\n"


def _describe(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        field = '.'.join(str(part) for part in item.get('loc', ())) or 'config'
        problems.append(f"{field}: {item.get('msg')}")
    return "invalid config field " + "; ".join(problems)


def _defaults_from(config_class) -> Dict[str, Any]:
    defaults = {}
    for name in RunConfig.model_fields:
        key = name.upper()
        if config_class is not None and hasattr(config_class, key):
            defaults[name] = getattr(config_class, key)
    return defaults


def read_config_file(path) -> Dict[str, Optional[str]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return dict(dotenv_values(path))


def load_run_config(config_class=None, path=None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build the effective RunConfig

    Args:
        config_class: Config class from config.py supplying environment defaults
        path: optional dotenv style config file
        overrides: CLI flag values keyed by field name; None values are ignored

    Returns:
        Validated RunConfig
    """
    values = _defaults_from(config_class)

    if path is not None:
        file_values = read_config_file(path)
        known = set(RunConfig.model_fields)
        given = set()
        for key, raw in file_values.items():
            name = key.lower()
            if name not in known:
                logger.warning(f"Ignoring unknown config key {key} in {path}")
                continue
            given.add(name)
            values[name] = None if raw in (None, '') else raw
        defaulted = sorted(known - given)
        if defaulted:
            logger.info(f"Config keys not set in {path}, using defaults: {', '.join(k.upper() for k in defaulted)}")

    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = value

    try:
        run_config = RunConfig(**values)
        run_config.contact_config()
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e

    logger.debug(f"Effective config hash {run_config.config_hash()}")
    return run_config
