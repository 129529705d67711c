import json
import logging
import os
from pathlib import Path

log = logging.getLogger(__name__)

#: Name of the user configuration file.
FILENAME = 'config.json'

# Recognized configuration keys; name -> (type, default value). The attack
# defaults are the desk-scale reference configuration.
KEYS = {
    'seed': (int, 0),
    'threads': (int, 1),
    'chunk size': (int, 256),
    'epsilon': (float, 0.05),
    'steps': (int, 100),
    'stage1': (int, 25),
    'restarts': (int, 1),
    'targets': (int, 9),
    'lid k': (int, 20),
}


def _iter_config_paths():
    """Yield recognized configuration directories, in order of priority."""
    if 'PMEVAL_DATA' in os.environ:
        yield 'environment (PMEVAL_DATA)', Path(os.environ['PMEVAL_DATA'])
    if 'XDG_DATA_HOME' in os.environ:
        yield 'environment (XDG_DATA_HOME)', \
            Path(os.environ['XDG_DATA_HOME'], 'pmeval')
    yield 'default', Path.home() / '.local' / 'share' / 'pmeval'


def _locate(filename=None):
    """Locate an existing *filename* in the pmeval config directories.

    If *filename* is None (the default), the first existing directory is
    returned.
    """
    tried = []
    for _, directory in _iter_config_paths():
        candidate = directory / filename if filename else directory
        if candidate.exists():
            return candidate
        tried.append(str(directory))

    raise FileNotFoundError(f'Could not find {filename or "any"} in '
                            f'{tried!r}')


class Config:
    """User configuration for pmeval.

    Config stores simple typed keys (see :data:`KEYS`) giving defaults for
    run configurations. Values from a run configuration file or from command
    line options always take precedence.

    Parameters
    ----------
    read : bool
        Read ``config.json`` on startup.
    """
    #: Full-resolved path of the ``config.json`` file.
    path = None

    def __init__(self, read=True):
        self.clear()
        if read:
            self.read()

    def read(self):
        """Read keys from the first ``config.json`` found, if any.

        If successful, the attribute :attr:`path` is set to the path of the
        file.
        """
        try:
            path = _locate(FILENAME)
        except FileNotFoundError:
            return

        for key, value in json.loads(path.read_text()).items():
            self.set(key, value)
        self.path = path.resolve()

    def get(self, key):
        """Return the value of a configuration *key*."""
        return self.values[key]

    def set(self, name, value):
        """Set configuration key *name* to *value*, cast to the key's type.

        A *value* of :obj:`None` leaves the key unchanged.
        """
        if value is None:
            return

        try:
            type_, _ = KEYS[name]
        except KeyError:
            raise KeyError(f'unknown configuration key {name!r}; expected '
                           f'one of {sorted(KEYS)}') from None

        try:
            self.values[name] = type_(value)
        except (TypeError, ValueError):
            raise TypeError(f'expected {type_.__name__} for {name!r}; got '
                            f'{value!r}') from None

    def clear(self):
        """Reset all keys to their defaults."""
        self.values = {name: default for name, (_, default) in KEYS.items()}

    def save(self):
        """Write configuration keys to file.

        ``config.json`` is written to the highest-priority configuration
        directory, which is created if needed. Only values that differ from
        the defaults are written.
        """
        _, config_dir = next(_iter_config_paths())
        path = config_dir / FILENAME
        path.parent.mkdir(parents=True, exist_ok=True)

        values = {key: value for key, value in self.values.items()
                  if value != KEYS[key][1]}

        log.info(f'Updating configuration file: {path}')
        path.write_text(json.dumps(values, indent=2))
        self.path = path

    def global_seed(self, explicit=None):
        """Resolve the global seed.

        *explicit* (from the command line or a run configuration) wins; then
        the ``PMA_SEED`` environment variable; then the ``seed`` key.
        """
        if explicit is not None:
            return int(explicit)
        try:
            return int(os.environ['PMA_SEED'])
        except KeyError:
            return self.values['seed']
        except ValueError:
            raise ValueError(f"PMA_SEED={os.environ['PMA_SEED']!r} is not "
                             "an integer") from None


#: Default |pmeval| configuration object.
config = Config()
