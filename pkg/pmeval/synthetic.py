"""Seeded synthetic classification data."""
import logging

import numpy as np

from pmeval.model import LabeledBatch
from pmeval.utils import sample_rng


log = logging.getLogger(__name__)

#: Available kinds of data.
KINDS = ('blobs', 'rings')

#: Standard deviation of the radial and extra-dimension noise of rings.
RING_NOISE = 0.1


def _balanced_labels(rng, classes, count):
    # Class sizes differ by at most 1
    return rng.permutation(np.arange(count) % classes)


def _minmax(values):
    lo, hi = values.min(axis=0), values.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.clip((values - lo) / span, 0.0, 1.0)


def blobs(rng, classes, dim, count, separation):
    """Gaussian clusters with unit standard deviation.

    Class c is centred at *separation* along axis c; with more classes than
    dimensions, centres lie in random directions at distance *separation*
    from the origin.
    """
    labels = _balanced_labels(rng, classes, count)
    if classes <= dim:
        centres = separation * np.eye(classes, dim)
    else:
        directions = rng.normal(size=(classes, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        centres = separation * directions
    points = centres[labels] + rng.normal(size=(count, dim))
    return points, labels


def rings(rng, classes, dim, count, separation=None):
    """Concentric annuli in the first two dimensions; class c has radius
    c + 1. Further dimensions hold small Gaussian noise."""
    if dim < 2:
        raise ValueError(f'rings need dim >= 2; got {dim}')
    labels = _balanced_labels(rng, classes, count)
    angle = rng.uniform(0, 2 * np.pi, size=count)
    radius = labels + 1 + RING_NOISE * rng.normal(size=count)
    points = RING_NOISE * rng.normal(size=(count, dim))
    points[:, 0] = radius * np.cos(angle)
    points[:, 1] = radius * np.sin(angle)
    return points, labels


def generate_synthetic(kind, classes, dim, count, seed, separation=5.0):
    """Generate a labeled dataset scaled into [0, 1].

    Parameters
    ----------
    kind : 'blobs' or 'rings'
    classes : int
        Number of classes N, ≥ 2.
    dim : int
        Input dimension d.
    count : int
        Number of samples, ≥ N. Classes are balanced within ±1.
    seed : int
    separation : float
        Distance of blob centres from the origin, in standard deviations.

    Each feature is min–max scaled to [0, 1] over the generated samples.
    Generate training and evaluation sets in one call and split them with
    :meth:`.LabeledBatch.subset`, so that both share one scaling.
    """
    if kind not in KINDS:
        raise ValueError(f'kind must be one of {KINDS}; got {kind!r}')
    elif classes < 2:
        raise ValueError(f'need at least 2 classes; got {classes}')
    elif dim < 1:
        raise ValueError(f'dim must be >= 1; got {dim}')
    elif count < classes:
        raise ValueError(f'count must be >= classes ({classes}); got {count}')

    rng = sample_rng(seed, KINDS.index(kind))
    points, labels = {'blobs': blobs, 'rings': rings}[kind](
        rng, classes, dim, count, separation)

    log.info(f'Generated {count} {kind} samples, {classes} classes, d={dim}')
    return LabeledBatch(_minmax(points).astype(np.float32), labels)


def split(batch, first):
    """Split *batch* into its first *first* samples and the rest."""
    return batch.subset(slice(0, first)), batch.subset(slice(first, None))
