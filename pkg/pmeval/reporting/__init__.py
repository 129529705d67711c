# Robustness evaluation as dask graphs.
#
# Implementation notes:
#
# - Reporter.graph is a dictionary where keys are strings and values are
#   dask computations; see http://docs.dask.org/en/latest/spec.html
# - Inputs are stored under 'model', 'inputs', 'reference' and 'correct'.
#   Each attack stage i adds:
#   - 'stage:<i>': the output of computations.run_attack() on the samples in
#     'robust:<i>'.
#   - 'robust:<i+1>': samples surviving stages 0 … i.
#   - 'individual:<i>' (optional): the same attack on all of 'correct'.
# - Graphs are computed with the synchronous scheduler; attacks parallelise
#   internally over blocks of samples.
import logging
from pathlib import Path

import dask
from dask import get as dask_get
from dask.optimization import cull
import numpy as np
import yaml

from pmeval.utils import config_digest
from . import computations
from .describe import describe_recursive
from .exceptions import ComputationError
from .report import AttackRecord, RobustnessReport, build_report

__all__ = [
    'AttackRecord',
    'ComputationError',
    'Reporter',
    'RobustnessReport',
    'build_reporter',
    'cascade_ensemble',
    'configure',
    'evaluate',
    'pma_plus_one',
    'relative_robustness',
    'sweep',
]

log = logging.getLogger(__name__)

#: Configuration keys that do not affect results; excluded from the echoed
#: configuration and from the digest.
RUNTIME_KEYS = {'threads', 'timing', 'out', 'dump_adv', 'config_dir'}


class KeyExistsError(KeyError):
    def __str__(self):
        return f'key {self.args[0]!r} already exists'


class MissingKeyError(KeyError):
    def __str__(self):
        return f'required keys {repr(self.args)} not defined'


class Reporter:
    """Evaluate a model against a sequence of attacks.

    Use :meth:`add_inputs`, then :meth:`add_attack` once per stage; then
    :meth:`get` the key 'report'.
    """
    #: A dask-format :doc:`graph <graphs>`.
    graph = {'config': {}}

    #: The default reporting key.
    default_key = None

    def __init__(self, **kwargs):
        self.graph = {'config': {}}
        self.stages = []
        self.configure(**kwargs)

    def configure(self, path=None, **config):
        """Configure the Reporter.

        Accepts a *path* to a YAML configuration file and/or keyword
        arguments. Configuration keys loaded from file are replaced by keyword
        arguments.

        Recognized keys include:

        - *default*: the default key; sets :attr:`default_key`.
        - *timing*: if :obj:`False`, wall times are reported as 0.0.
        - *seed*: global seed recorded in the report.
        - *paths*: input files or directories whose contents enter the
          config digest.

        All other keys are echoed into reports.
        """
        config = _config_args(path, config)
        self.graph['config'].update(config)

        try:
            self.default_key = config['default']
        except KeyError:
            pass

        return self  # to allow chaining

    @property
    def config(self):
        return self.graph['config']

    # Generic graph manipulations

    def add(self, key, *computation, strict=False):
        """Add *computation* at *key*.

        Parameters
        ----------
        key : str
        computation : object
            Any dask computation: an existing key, a literal value, a task
            (tuple of a callable and computations), or a list of these.
        strict : bool, optional
            If :obj:`True`, *key* must not already exist, and any keys
            referred to by *computation* must exist.
        """
        if len(computation) == 1:
            computation = computation[0]

        if strict:
            if key in self.graph:
                raise KeyExistsError(key)
            items = computation if isinstance(computation, (tuple, list)) \
                else [computation]
            self.check_keys(*[k for k in items if isinstance(k, str)])

        self.graph[key] = computation
        return key

    def check_keys(self, *keys):
        """Raise :class:`KeyError` if any of *keys* is not in the graph."""
        missing = [k for k in keys if k not in self.graph]
        if missing:
            raise MissingKeyError(*missing)
        return list(keys)

    def keys(self):
        return self.graph.keys()

    def __contains__(self, key):
        return key in self.graph

    def get(self, key=None):
        """Execute and return the result of the computation *key*.

        Only *key* and its dependencies are computed.

        Raises
        ------
        ComputationError
            Wrapping any exception raised by a computation.
        """
        if key is None:
            if self.default_key is None:
                raise ValueError('no default reporting key set')
            key = self.default_key

        dsk, _ = cull(self.graph, key)
        log.debug(f'Cull {len(self.graph)} -> {len(dsk)} keys')

        # Protect 'config' so that dask does not interpret its contents
        dsk['config'] = dask.core.quote(self.graph['config'])

        try:
            return dask_get(dsk, key)
        except Exception as exc:
            raise ComputationError(key) from exc

    def describe(self, key=None, quiet=True):
        """Return a string describing the computations that produce *key*.

        If *key* is not provided, all keys in the Reporter are described.
        """
        key = tuple(sorted(k for k in self.graph if k != 'config')) \
            if key is None else (key,)
        result = describe_recursive(self.graph, key)
        if not quiet:
            print(result, end='\n')
        return result

    # Robustness evaluation

    def add_inputs(self, model, batch, mode='standard'):
        """Add the model and data.

        In 'standard' mode the reference labels are those of *batch*; in
        'relative' mode they are the clean predictions, and every sample
        starts out robust.
        """
        if mode not in ('standard', 'relative'):
            raise ValueError(f'unknown mode {mode!r}')
        elif mode == 'standard' and batch.labels is None:
            raise ValueError('standard mode needs labels; use relative mode '
                             'for unlabeled data')

        self.mode = mode
        self.add('model', model)
        self.add('inputs', batch)
        self.add('clean', (computations.predict, 'model', 'inputs'))
        if mode == 'standard':
            self.add('reference', dask.core.quote(batch.labels))
            self.add('correct', (computations.correct, 'clean', 'reference'))
        else:
            self.add('reference', 'clean')
            self.add('correct', np.ones(len(batch), dtype=bool))
        self.add('robust:0', 'correct')
        return self

    def add_attack(self, attack, individual=False):
        """Add *attack* as the next stage; it only attacks samples that are
        still robust.

        If *individual* is :obj:`True`, also add the attack on all clean-
        correct samples, so that its own robust accuracy is reported.
        """
        i = len(self.stages)
        stage = f'stage:{i}'
        self.add(stage, (computations.run_attack, attack, 'model', 'inputs',
                         'reference', f'robust:{i}', 'config'), strict=True)
        self.add(f'robust:{i + 1}', (computations.survivors, f'robust:{i}',
                                     stage))
        if individual and i > 0:
            self.add(f'individual:{i}', (computations.run_attack, attack,
                                         'model', 'inputs', 'reference',
                                         'correct', 'config'))
        elif individual:
            self.add(f'individual:{i}', stage)
        self.stages.append(attack.name)

        self._add_summaries()
        return stage

    def _add_summaries(self):
        n = len(self.stages)
        stages = [f'stage:{i}' for i in range(n)]
        self.add('success', (computations.success_matrix, *stages))
        self.add('report', (
            _report,
            'config',
            'correct',
            stages,
            [f'robust:{i + 1}' for i in range(n)],
            [f'individual:{i}' if f'individual:{i}' in self.graph else None
             for i in range(n)],
            self.mode,
        ))
        self.default_key = 'report'

    def success_matrix(self):
        """Return an :class:`xarray.DataArray` of attack success with
        dimensions (attack, sample)."""
        return self.get('success')

    def adversarial_examples(self, stage=0):
        """Return the examples of attack *stage* as one array."""
        outcomes = self.get(f'stage:{stage}')['outcomes']
        return np.stack([o.adv_example for o in outcomes])

    def write(self, key, path):
        """Write the report *key* to the directory *path*."""
        key = self.check_keys(key)[0]
        computations.write_report(self.get(key), path)


def _report(config, correct, stages, robust, individual, mode):
    echoed = resolved_config(config)
    digest = config_digest(echoed, config.get('paths', ()))
    return build_report(mode, correct, stages, robust, individual, echoed,
                        config.get('seed', 0), digest,
                        labeled=(mode == 'standard'))


def resolved_config(config):
    """*config* without :data:`RUNTIME_KEYS`, as plain YAML-safe values."""
    result = {}
    for key, value in sorted(config.items()):
        if key in RUNTIME_KEYS or key == 'default':
            continue
        elif key == 'paths':
            value = [str(p) for p in value]
        result[key] = _plain(value)
    return result


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    elif isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    elif isinstance(value, Path):
        return str(value)
    elif isinstance(value, np.generic):
        return value.item()
    return value


def configure(path=None, **config):
    """Validate reporting configuration from *path* and *config*.

    Returns the combined configuration; file values are replaced by keyword
    arguments.
    """
    return _config_args(path, config)


def _config_args(path=None, keys={}):
    """Handle configuration arguments."""
    result = {}

    if path:
        # Load configuration from file
        path = Path(path)
        with open(path, 'r') as f:
            result.update(yaml.safe_load(f) or {})

        # Also store the directory where the configuration file was located
        result['config_dir'] = path.parent

    # Update with keys
    result.update(keys)

    return result


from .ensemble import (  # noqa: E402
    build_reporter,
    cascade_ensemble,
    evaluate,
    pma_plus_one,
    relative_robustness,
    sweep,
)
