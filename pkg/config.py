import os
from dotenv import load_dotenv

load_dotenv()


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


def _env_float(name, default):
    value = os.environ.get(name)
    return float(value) if value not in (None, '') else default


class Config:
    # Logging
    LOG_LEVEL = os.environ.get('WLANTRACE_LOG_LEVEL', 'INFO')
    LOG_FILE = os.environ.get('WLANTRACE_LOG_FILE')

    # Contact tracing thresholds (seconds)
    D_SYM = _env_int('WLANTRACE_D_SYM', 900)
    D_ENV = _env_int('WLANTRACE_D_ENV', 3000)
    D_ASYM = _env_int('WLANTRACE_D_ASYM', 300)

    # Trajectory construction (seconds)
    SESSION_TIMEOUT = _env_int('WLANTRACE_SESSION_TIMEOUT', 3600)
    MAX_TERMINAL_STAY = _env_int('WLANTRACE_MAX_TERMINAL_STAY', 7200)
    DEFAULT_WALK = _env_int('WLANTRACE_DEFAULT_WALK', 300)
    TIMEZONE = os.environ.get('WLANTRACE_TIMEZONE', 'UTC')
    # Comma separated allow-list; empty keeps every SSID
    SSIDS = os.environ.get('WLANTRACE_SSIDS', '')

    # SEIR rates (per day)
    BETA = _env_float('WLANTRACE_BETA', 0.155)
    SIGMA = _env_float('WLANTRACE_SIGMA', 1 / 5.2)
    GAMMA = _env_float('WLANTRACE_GAMMA', 1 / 12.39)
    MAX_DAYS = _env_int('WLANTRACE_MAX_DAYS', 180)
    RUNS = _env_int('WLANTRACE_RUNS', 50)

    # Experiment settings
    SEED = _env_int('WLANTRACE_SEED', 20150302)
    THREADS = _env_int('WLANTRACE_THREADS', 1)
    RBO_P = _env_float('WLANTRACE_RBO_P', 0.9)
    SWEEP_STEP = _env_float('WLANTRACE_SWEEP_STEP', 5.0)
    TURNING_POINT_THRESHOLD = _env_float('WLANTRACE_TURNING_POINT_THRESHOLD', 0.5)
    STABILITY_WEEKS = _env_int('WLANTRACE_STABILITY_WEEKS', 20)
    SWEEP_MEASURE = os.environ.get('WLANTRACE_SWEEP_MEASURE', 'betweenness')
    WEEKLY_TABLE = os.environ.get('WLANTRACE_WEEKLY_TABLE', 'true').lower() == 'true'


class DevelopmentConfig(Config):
    LOG_LEVEL = os.environ.get('WLANTRACE_LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    pass


class TestingConfig(Config):
    LOG_LEVEL = 'WARNING'
    LOG_FILE = None
    RUNS = 5
    MAX_DAYS = 60
    STABILITY_WEEKS = 2
    WEEKLY_TABLE = False


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': ProductionConfig
}
