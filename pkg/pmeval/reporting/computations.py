"""Computations used in :class:`.Reporter` graphs.

Functions here take and return plain values (arrays, lists of
:class:`.AttackOutcome`, dicts), so that they can be used outside of a
graph.
"""
import logging
from time import perf_counter

import numpy as np
import xarray as xr


log = logging.getLogger(__name__)

__all__ = [
    'correct',
    'predict',
    'robust_accuracy',
    'run_attack',
    'success_matrix',
    'survivors',
    'write_report',
]


def predict(model, batch):
    """Clean predictions of *model* on *batch*."""
    return model.predict(batch.inputs)


def correct(predictions, reference):
    """Boolean mask of samples whose prediction equals *reference*."""
    return np.asarray(predictions) == np.asarray(reference)


def successes(outcomes):
    return np.array([o.success for o in outcomes], dtype=bool)


def robust_accuracy(model, batch, outcomes):
    """Fraction of *batch* classified correctly on the clean input and not
    broken by the attack that produced *outcomes*.

    Raises
    ------
    ValueError
        If *outcomes* and *batch* differ in length, or *batch* is empty or
        unlabeled.
    """
    if len(outcomes) != len(batch):
        raise ValueError(f'{len(outcomes)} outcomes for {len(batch)} samples')
    elif len(batch) == 0:
        raise ValueError('robust accuracy of an empty batch')
    elif batch.labels is None:
        raise ValueError('robust accuracy needs labels')
    robust = correct(predict(model, batch), batch.labels) \
        & ~successes(outcomes)
    return float(robust.mean())


def survivors(robust, stage):
    """Samples in *robust* that the attack *stage* did not break."""
    return np.asarray(robust, dtype=bool) & ~successes(stage['outcomes'])


def run_attack(attack, model, batch, reference, active, config):
    """Run *attack* on the *active* samples.

    Returns
    -------
    dict
        'name', 'outcomes' (list of :class:`.AttackOutcome`) and 'wall_time'
        (seconds; 0.0 if the 'timing' configuration key is false).
    """
    start = perf_counter()
    outcomes = attack.run(model, batch, reference=reference, active=active)
    elapsed = perf_counter() - start if config.get('timing', True) else 0.0

    errors = sum(o.error is not None for o in outcomes)
    log.info(f'{attack.name}: broke {int(successes(outcomes).sum())} of '
             f'{int(np.sum(active))} samples'
             + (f'; {errors} aborted' if errors else ''))
    return dict(name=attack.name, outcomes=outcomes, wall_time=elapsed)


def success_matrix(*stages):
    """Success of each attack stage on each sample.

    Returns
    -------
    xarray.DataArray
        Boolean, with dimensions (attack, sample).
    """
    data = np.stack([successes(s['outcomes']) for s in stages]) \
        if stages else np.zeros((0, 0), dtype=bool)
    return xr.DataArray(
        data,
        coords=dict(attack=[s['name'] for s in stages],
                    sample=np.arange(data.shape[1])),
        dims=('attack', 'sample'),
    )


def write_report(report, path):
    """Write *report* to the directory *path*."""
    return report.write(path)
