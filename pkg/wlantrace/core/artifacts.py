import json
import logging
from pathlib import Path
from typing import Optional, Any

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.6f'


class ArtifactWriter:
    """Writes artifacts plus a sibling X.meta.json naming the config hash and master seed"""

    def __init__(self, config_hash: Optional[str] = None, seed: Optional[int] = None):
        self.config_hash = config_hash
        self.seed = seed

    @classmethod
    def for_config(cls, run_config) -> 'ArtifactWriter':
        return cls(config_hash=run_config.config_hash(), seed=run_config.seed)

    def write_frame(self, frame: pd.DataFrame, path, stage: str, index: bool = False) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix == '.parquet':
            frame.to_parquet(path, index=index)
        else:
            frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator='\n')
        self.write_metadata(path, stage)
        return path

    def write_json(self, payload: Any, path, stage: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(payload) + "\n", encoding='utf-8')
        self.write_metadata(path, stage)
        return path

    def write_text(self, text: str, path, stage: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        self.write_metadata(path, stage)
        return path

    def write_metadata(self, path, stage: str) -> Optional[Path]:
        if self.config_hash is None and self.seed is None:
            return None
        path = Path(path)
        meta_path = path.with_name(path.name + '.meta.json')
        meta = {
            'artifact': path.name,
            'stage': stage,
            'config_hash': self.config_hash,
            'seed': self.seed,
        }
        meta_path.write_text(dumps(meta) + "\n", encoding='utf-8')
        return meta_path


def _clean(value):
    if isinstance(value, float):
        if value != value:
            return None
        return round(value, 9)
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, 'item'):
        return _clean(value.item())
    return value


def dumps(payload: Any) -> str:
    """Canonical JSON: sorted keys, NaN as null, floats rounded to 9 places"""
    return json.dumps(_clean(payload), sort_keys=True, indent=2, default=str)
