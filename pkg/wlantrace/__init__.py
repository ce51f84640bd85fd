import os
import sys
import logging
from config import config

__version__ = '0.1.0'


class TraceApp:
    """Holds the selected Config class and the configured logger"""

    def __init__(self, config_name, config_class):
        self.config_name = config_name
        self.config = config_class
        self.logger = logging.getLogger('wlantrace')


def create_app(config_name=None):
    if config_name is None:
        config_name = os.environ.get('WLANTRACE_ENV', 'production')

    config_name = config_name.lower()

    if config_name not in config:
        logging.getLogger(__name__).warning(f"Config '{config_name}' not found, using 'default'")
        config_name = 'default'

    config_class = config[config_name]

    handlers = [logging.StreamHandler(sys.stderr)]
    if config_class.LOG_FILE:
        handlers.append(logging.FileHandler(config_class.LOG_FILE))

    logging.basicConfig(
        level=getattr(logging, str(config_class.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )

    app = TraceApp(config_name, config_class)
    app.logger.debug(f"Created app with '{config_name}' config")
    return app
