from collections.abc import Iterable
import hashlib
import logging
import os
from pathlib import Path
import tempfile

import numpy as np
import yaml


# globally accessible logger
_LOGGER = None


def logger():
    """Access global logger"""
    global _LOGGER
    if _LOGGER is None:
        logging.basicConfig()
        _LOGGER = logging.getLogger()
        _LOGGER.setLevel('INFO')
    return _LOGGER


def as_str_list(arg):
    """Convert *arg* to list of str.

    - None: returned as None.
    - str: split on commas, e.g. ``'pgd,pma'`` → ``['pgd', 'pma']``.
    - other iterables: each value converted to str.
    """
    if arg is None:
        return None
    elif isinstance(arg, str):
        return [a.strip() for a in arg.split(',') if a.strip()]
    elif isinstance(arg, Iterable):
        return list(map(str, arg))
    else:
        return [str(arg)]


def derive_seed(*keys):
    """Return a 63-bit integer seed derived from *keys*.

    Keys may be integers or strings. The value depends only on the keys, so
    e.g. ``derive_seed(seed, 'PGD_ce')`` is the same wherever an attack sits
    in an ensemble sequence.
    """
    text = '\x1f'.join(map(str, keys)).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], 'little') >> 1


def sample_rng(seed, *indices):
    """Random generator for one sample's stream.

    The stream is a function of *seed* and the integer *indices* (sample
    index, restart index, …) alone, never of scheduling.
    """
    return np.random.default_rng([int(seed)] + [int(i) for i in indices])


def atomic_write(path, data):
    """Write the bytes *data* to *path* via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def file_digest(path):
    """SHA-256 hex digest of a file, or of all files below a directory."""
    path = Path(path)
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob('*') if p.is_file()) \
        if path.is_dir() else [path]
    for p in files:
        h.update(p.relative_to(path).as_posix().encode()
                 if path.is_dir() else b'')
        h.update(p.read_bytes())
    return h.hexdigest()


def config_digest(config, paths=()):
    """Digest identifying a resolved *config* and the files in *paths*."""
    h = hashlib.sha256()
    h.update(yaml.safe_dump(config, sort_keys=True).encode())
    for path in sorted(map(str, paths)):
        h.update(file_digest(path).encode())
    return h.hexdigest()[:16]
