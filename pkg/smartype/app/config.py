import json
import os
from pathlib import Path

CONFIG_PATH = 'config.json'
CONFIG_ENV = 'SMARTYPE_CONFIG'


class SystemConfig:
    """
    Singleton holding the system settings (secret, debug flag, log level, data directory).
    Read from config.json at the repository root, or from the file named by $SMARTYPE_CONFIG.
    A missing file leaves every key at its default.
    """

    def __init__(self, path=None):
        self._data = {}
        self.path = Path(path or os.environ.get(CONFIG_ENV) or Path(__file__).parent.parent.parent / CONFIG_PATH)
        self.load_config()

    def load_config(self):
        if not self.path.exists():
            return
        with open(self.path, 'r', encoding='utf-8') as config_file:
            data = json.load(config_file)
        if not isinstance(data, dict):
            raise ValueError(f"{self.path}: the system config must be a JSON object")
        self._data = data

    def get(self, key, default=None):
        return self._data.get(key, default)


CONFIG = SystemConfig()
