import functools
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import click

from wlantrace import __version__, create_app
from wlantrace.core.artifacts import ArtifactWriter
from wlantrace.core.errors import StageError
from wlantrace.core.settings import RunConfig, load_run_config

logger = logging.getLogger(__name__)

DEFAULT_OUT = 'out'


class CliState:
    """Global flags shared by every subcommand"""

    def __init__(self, app, config_path: Optional[str], seed: Optional[int], threads: Optional[int],
                 out: Optional[str]):
        self.app = app
        self.config_path = config_path
        self.seed = seed
        self.threads = threads
        self.out = out

    def run_config(self, extra_path: Optional[str] = None, **overrides: Any) -> RunConfig:
        """Effective config: flags > config file (--params over --config) > env Config > defaults"""
        flags: Dict[str, Any] = {'seed': self.seed, 'threads': self.threads}
        flags.update({name: value for name, value in overrides.items() if value is not None})
        path = extra_path or self.config_path
        if extra_path and self.config_path:
            base = load_run_config(self.app.config, self.config_path)
            return load_run_config(_AsConfig(base), extra_path, flags)
        return load_run_config(self.app.config, path, flags)

    def out_path(self, explicit: Optional[str], default_name: str = '') -> Path:
        if explicit:
            return Path(explicit)
        root = Path(self.out or DEFAULT_OUT)
        return root / default_name if default_name else root


class _AsConfig:
    """Exposes a RunConfig as upper-case attributes so it can act as a Config class layer"""

    def __init__(self, run_config: RunConfig):
        for name, value in run_config.snapshot().items():
            setattr(self, name.upper(), value)


def staged(name: str):
    """Run a command as a named stage: failures are logged with the stage name and exit 1"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except StageError as e:
                logger.error(str(e))
                click.echo(f"Error: {e}", err=True)
                raise SystemExit(1)
            except Exception as e:
                logger.exception(f"stage {name} failed: {e}")
                click.echo(f"Error: stage {name} failed: {e}", err=True)
                raise SystemExit(1)
        return wrapper
    return decorator


def writer_for(run_config: RunConfig) -> ArtifactWriter:
    return ArtifactWriter.for_config(run_config)


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='KEY=VALUE config file')
@click.option('--seed', type=int, default=None, help='Master seed for every random stream')
@click.option('--threads', type=click.IntRange(min=1), default=None, help='Parallel workers')
@click.option('--out', type=click.Path(), default=None, help='Output directory')
@click.option('--env', 'env_name', default=None, help='Config class: development, production or testing')
@click.version_option(version=__version__, prog_name='trace')
@click.pass_context
def trace(ctx, config_path, seed, threads, out, env_name):
    """WLAN-log contact tracing and superspreader analysis"""
    app = create_app(env_name)
    ctx.obj = CliState(app, config_path, seed, threads, out)


from wlantrace.cli import commands, pipeline  # noqa: E402,F401
