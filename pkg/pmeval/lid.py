"""Local intrinsic dimensionality (LID) scores and median-based filtering.

LID is estimated by maximum likelihood from each point's *k* nearest
neighbours (Euclidean, brute force, the point itself excluded)::

    LID(x) = −1 / mean_i log(r_i / r_k),   i = 1 … k

where r_1 ≤ … ≤ r_k are the neighbour distances. Points with a zero
neighbour distance (duplicates) or with k equal distances have no estimate;
they are reported with an error message and never selected.
"""
import logging
from pathlib import Path

import dask
import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.stats import median_abs_deviation

from pmeval.backend.io import read_container, read_ids, write_ids
from pmeval.utils import atomic_write


log = logging.getLogger(__name__)

#: Query points per block of the distance computation.
BLOCK_SIZE = 1024

#: Selection scores for :func:`mad_median_filter`.
SCORES = ('deviation', 'mad-z')


class LidError(ValueError):
    """Invalid LID input or filter request."""


class EmbeddingSet:
    """*M* embedding vectors of dimension *d* with unique string *ids*."""
    def __init__(self, vectors, ids=None):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise LidError(f'embeddings must be [M, d]; got shape '
                           f'{list(vectors.shape)}')
        elif not np.all(np.isfinite(vectors)):
            raise LidError('embeddings contain non-finite values')

        ids = [str(i) for i in range(len(vectors))] if ids is None \
            else [str(i) for i in ids]
        if len(ids) != len(vectors):
            raise LidError(f'{len(ids)} ids for {len(vectors)} vectors')
        elif len(set(ids)) != len(ids):
            raise LidError('ids are not unique')

        self.vectors = vectors
        self.ids = ids

    def __len__(self):
        return len(self.vectors)

    @classmethod
    def read(cls, vectors_path, ids_path=None):
        """Read a [M, d] container and an optional id file."""
        ids = None if ids_path is None else read_ids(ids_path)
        return cls(read_container(vectors_path), ids)


class LidScores:
    """LID estimates for an :class:`EmbeddingSet`.

    Attributes
    ----------
    ids : list of str
    scores : numpy.ndarray
        One estimate per id; NaN where there is none.
    errors : dict
        id → message for the points without an estimate.
    """
    def __init__(self, ids, scores, errors=None):
        self.ids = list(ids)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.errors = dict(errors or {})
        if len(self.scores) != len(self.ids):
            raise LidError(f'{len(self.scores)} scores for {len(self.ids)} '
                           'ids')

    @property
    def valid(self):
        return np.isfinite(self.scores)

    def to_series(self):
        return pd.Series(self.scores, index=pd.Index(self.ids, name='id'),
                         name='lid')


def knn_distances(vectors, k, threads=1, block_size=BLOCK_SIZE):
    """Sorted distances from every point to its *k* nearest other points."""
    def block(start):
        d = cdist(vectors[start:start + block_size], vectors)
        rows = np.arange(len(d))
        d[rows, start + rows] = np.inf
        nearest = np.partition(d, k - 1, axis=1)[:, :k]
        return np.sort(nearest, axis=1)

    tasks = [dask.delayed(block)(start)
             for start in range(0, len(vectors), block_size)]
    scheduler = dict(scheduler='threads', num_workers=threads) \
        if threads > 1 else dict(scheduler='sync')
    return np.concatenate(dask.compute(*tasks, **scheduler)) if tasks \
        else np.zeros((0, k))


def lid_mle(embeds, k=20, threads=1):
    """Maximum-likelihood LID of every point of *embeds*.

    Parameters
    ----------
    embeds : EmbeddingSet
    k : int
        Neighbourhood size, ≥ 2; *embeds* must hold at least k + 1 points.
    threads : int
        Worker threads for the distance computation.

    Returns
    -------
    LidScores
    """
    if k < 2:
        raise LidError(f'k must be >= 2; got {k}')
    elif len(embeds) < k + 1:
        raise LidError(f'need at least {k + 1} points for k={k}; got '
                       f'{len(embeds)}')

    r = knn_distances(embeds.vectors, k, threads)
    with np.errstate(divide='ignore', invalid='ignore'):
        mean_log = np.log(r / r[:, -1:]).mean(axis=1)
        scores = -1.0 / mean_log

    errors = {}
    for i in np.flatnonzero(r[:, 0] == 0):
        errors[embeds.ids[i]] = 'zero neighbour distance (duplicate point)'
    for i in np.flatnonzero((r[:, 0] > 0) & (mean_log == 0)):
        errors[embeds.ids[i]] = f'all {k} neighbour distances are equal'

    bad = ~np.isfinite(scores) | (r[:, 0] == 0) | (mean_log == 0)
    scores[bad] = np.nan
    for key, message in errors.items():
        log.warning(f'No LID for {key!r}: {message}')

    log.info(f'LID for {int((~bad).sum())}/{len(embeds)} points, k={k}')
    return LidScores(embeds.ids, scores, errors)


def filter_table(scores, m, score='deviation'):
    """Rank valid points by distance of their LID from the median.

    Returns a :class:`pandas.DataFrame` with columns id, lid, deviation and
    selected, one row per point in the order of *scores*; points without an
    estimate have NaN deviation and are never selected.

    With *score* 'mad-z', the deviation is divided by the normal-consistent
    median absolute deviation of the valid scores. This changes the reported
    values, not the selection.
    """
    if score not in SCORES:
        raise LidError(f'score must be one of {SCORES}; got {score!r}')

    valid = scores.valid
    n_valid = int(valid.sum())
    if not 0 <= m <= n_valid:
        raise LidError(f'cannot select {m} of {n_valid} valid scores')

    df = pd.DataFrame(dict(id=scores.ids, lid=scores.scores))
    df['deviation'] = np.nan
    if n_valid:
        median = np.median(scores.scores[valid])
        deviation = np.abs(scores.scores[valid] - median)
        if score == 'mad-z':
            mad = median_abs_deviation(scores.scores[valid], scale='normal')
            if mad > 0:
                deviation = deviation / mad
            else:
                log.warning('median absolute deviation is 0; reporting raw '
                            'deviations')
        df.loc[valid, 'deviation'] = deviation

    ranked = df[valid].sort_values(['deviation', 'id'], kind='mergesort')
    df['selected'] = df.index.isin(ranked.index[:m])
    return df


def mad_median_filter(scores, m, score='deviation'):
    """Return the ids of the *m* valid points whose LID is closest to the
    median LID; ties go to the smaller id."""
    df = filter_table(scores, m, score)
    return (df[df['selected']]
            .sort_values(['deviation', 'id'], kind='mergesort')['id']
            .tolist())


def write_selection(df, path):
    """Write ``<path>.ids`` (selected ids) and ``<path>.csv`` (full table).

    Returns the two paths.
    """
    path = Path(path)
    ids_path = path.with_suffix('.ids')
    csv_path = path.with_suffix('.csv')

    selected = df[df['selected']].sort_values(['deviation', 'id'],
                                              kind='mergesort')
    write_ids(ids_path, selected['id'])
    atomic_write(csv_path, df[['id', 'lid', 'deviation', 'selected']]
                 .to_csv(index=False, float_format='%.10g').encode())
    log.info(f'Wrote {len(selected)} selected ids to {ids_path}')
    return ids_path, csv_path
