"""Adversarial losses on logits, with exact gradients.

Every loss is a function of one logit vector *z* and the true class *y*; all
functions here accept either a single vector (returning a scalar) or a batch
``(batch, N)`` with a label vector (returning one value per row).

=================  ==================  =====================================
Name               Tag                 Value
=================  ==================  =====================================
``ce``             ``ce_untargeted``   −log p_y
``cet``            ``ce_targeted``     log p_max
``mg``             ``margin``          z_max − z_y
``pm``             ``pm``              p_max − p_y
``pm:beta=B``      ``pm_weighted``     B·p_max − p_y
``dlr``            ``dlr``             (z_max − z_y) / (z_π1 − z_π3)
``stage_pmax``     ``stage_pmax``      p_max
``stage_neg_py``   ``stage_neg_py``    −p_y
``stage_zmax``     ``stage_zmax``      z_max
``stage_neg_zy``   ``stage_neg_zy``    −z_y
=================  ==================  =====================================

"max" is the largest logit other than *y*, ties going to the smallest class
index. When a *target* class is given, it replaces "max" in every formula;
this gives the targeted forms used by :class:`.MultiTargetAttack`.

For DLR, π orders all N logits in descending order by default
(``dlr:pi=all``); ``dlr:pi=except-y`` orders the logits other than z_y. A
denominator of zero is guarded by adding :data:`DLR_GUARD`.
"""
from collections import namedtuple
import logging

import numpy as np

from pmeval.model import softmax


log = logging.getLogger(__name__)

#: Added to the DLR denominator.
DLR_GUARD = 1e-12

#: Short names → tags.
NAMES = {
    'ce': 'ce_untargeted',
    'cet': 'ce_targeted',
    'dlr': 'dlr',
    'mg': 'margin',
    'pm': 'pm',
}

TAGS = (
    'ce_untargeted', 'ce_targeted', 'dlr', 'margin', 'pm', 'pm_weighted',
    'stage_pmax', 'stage_neg_py', 'stage_zmax', 'stage_neg_zy',
)


class UnsupportedLoss(ValueError):
    """A loss cannot be evaluated for the given classes or options."""


class LossKind(namedtuple('LossKind', 'tag beta dlr_pi')):
    """Identifies a loss function.

    Use :meth:`parse` to create from a stable name such as ``'pm:beta=0.75'``.
    """
    __slots__ = ()

    def __new__(cls, tag, beta=1.0, dlr_pi='all'):
        tag = NAMES.get(tag, tag)
        if tag not in TAGS:
            raise UnsupportedLoss(f'unknown loss {tag!r}')
        beta = float(beta)
        if not np.isfinite(beta) or beta <= 0:
            raise UnsupportedLoss(f'beta must be finite and > 0; got {beta}')
        if dlr_pi not in ('all', 'except-y'):
            raise UnsupportedLoss(f"dlr pi must be 'all' or 'except-y'; got "
                                  f'{dlr_pi!r}')
        return super().__new__(cls, tag, beta, dlr_pi)

    @classmethod
    def parse(cls, name):
        """Parse *name*: 'ce', 'cet', 'dlr[:pi=all|except-y]', 'mg', 'pm',
        'pm:beta=<float>', or a tag. A LossKind is returned unchanged."""
        if isinstance(name, cls):
            return name

        base, _, options = str(name).partition(':')
        kwargs = {}
        for item in filter(None, options.split(',')):
            key, _, value = item.partition('=')
            if key == 'beta' and base in ('pm', 'pm_weighted'):
                kwargs['beta'] = value
                base = 'pm_weighted'
            elif key == 'pi' and base == 'dlr':
                kwargs['dlr_pi'] = value
            else:
                raise UnsupportedLoss(f'unknown option {item!r} for loss '
                                      f'{base!r}')
        try:
            return cls(base, **kwargs)
        except ValueError as e:
            raise UnsupportedLoss(f'{name!r}: {e}') from None

    @property
    def name(self):
        """Stable string name; ``LossKind.parse(kind.name) == kind``."""
        short = {v: k for k, v in NAMES.items()}
        if self.tag == 'pm_weighted':
            return f'pm:beta={self.beta:g}'
        elif self.tag == 'dlr' and self.dlr_pi != 'all':
            return f'dlr:pi={self.dlr_pi}'
        return short.get(self.tag, self.tag)

    @property
    def weight(self):
        """Factor on the 'max' term: β for pm_weighted, else 1."""
        return self.beta if self.tag == 'pm_weighted' else 1.0

    def __str__(self):
        return self.name


PM = LossKind('pm')
MARGIN = LossKind('margin')


class LogitView:
    """Quantities derived from logits *z* and labels *y*.

    Attributes
    ----------
    p : numpy.ndarray
        Softmax probabilities, ``(batch, N)``.
    max_idx : numpy.ndarray
        Index of the largest logit other than *y* (smallest index on ties),
        or the *target* if one is given.
    """
    def __init__(self, z, y, target=None):
        z = np.asarray(z, dtype=np.float64)
        self.single = z.ndim == 1
        self.z = np.atleast_2d(z)
        self.y = np.atleast_1d(np.asarray(y, dtype=np.int64))
        self.rows = np.arange(len(self.z))

        if self.z.shape[1] < 2:
            raise UnsupportedLoss(f'need N >= 2 classes; got '
                                  f'{self.z.shape[1]}')
        elif self.y.shape != (len(self.z),):
            raise ValueError(f'{self.y.shape} labels for {len(self.z)} rows')
        elif len(self.y) and (self.y.min() < 0
                              or self.y.max() >= self.z.shape[1]):
            raise ValueError(f'labels outside [0, {self.z.shape[1]})')

        self.p = softmax(self.z)
        zmax = self.z.max(axis=1)
        self.lse = np.log(np.exp(self.z - zmax[:, None]).sum(axis=1)) + zmax

        if target is None:
            masked = self.z.copy()
            masked[self.rows, self.y] = -np.inf
            self.max_idx = masked.argmax(axis=1)
        else:
            self.max_idx = np.broadcast_to(
                np.asarray(target, dtype=np.int64), self.y.shape).copy()
            if np.any(self.max_idx == self.y):
                raise ValueError('target equals the true class')

    @property
    def n_classes(self):
        return self.z.shape[1]

    def onehot(self, index):
        result = np.zeros_like(self.z)
        result[self.rows, index] = 1.0
        return result

    def at(self, array, index):
        return array[self.rows, index]

    @property
    def z_y(self):
        return self.at(self.z, self.y)

    @property
    def z_max(self):
        return self.at(self.z, self.max_idx)

    @property
    def p_y(self):
        return self.at(self.p, self.y)

    @property
    def p_max(self):
        return self.at(self.p, self.max_idx)

    def dlr_order(self, kind):
        """Indices (π1, π3) of the DLR denominator."""
        if kind.dlr_pi == 'all':
            if self.n_classes < 3:
                raise UnsupportedLoss('dlr needs N >= 3 classes')
            order = np.argsort(-self.z, axis=1, kind='stable')
        else:
            if self.n_classes < 4:
                raise UnsupportedLoss('dlr:pi=except-y needs N >= 4 classes')
            masked = self.z.copy()
            masked[self.rows, self.y] = -np.inf
            order = np.argsort(-masked, axis=1, kind='stable')
        return order[:, 0], order[:, 2]

    def wrap(self, value):
        """Undo batching for a single-vector input."""
        return value[0] if self.single else value


# Values

def _value(kind, v):
    tag = kind.tag
    if tag == 'ce_untargeted':
        return v.lse - v.z_y
    elif tag == 'ce_targeted':
        return v.z_max - v.lse
    elif tag == 'margin':
        return v.z_max - v.z_y
    elif tag in ('pm', 'pm_weighted'):
        return kind.weight * v.p_max - v.p_y
    elif tag == 'dlr':
        pi1, pi3 = v.dlr_order(kind)
        return (v.z_max - v.z_y) / (v.at(v.z, pi1) - v.at(v.z, pi3)
                                    + DLR_GUARD)
    elif tag == 'stage_pmax':
        return v.p_max
    elif tag == 'stage_neg_py':
        return -v.p_y
    elif tag == 'stage_zmax':
        return v.z_max
    elif tag == 'stage_neg_zy':
        return -v.z_y


def _grad(kind, v):
    tag = kind.tag
    e_y, e_max = v.onehot(v.y), v.onehot(v.max_idx)
    p_y, p_max = v.p_y[:, None], v.p_max[:, None]

    if tag == 'ce_untargeted':
        return v.p - e_y
    elif tag == 'ce_targeted':
        return e_max - v.p
    elif tag == 'margin':
        return e_max - e_y
    elif tag in ('pm', 'pm_weighted'):
        # (p_y − β p_max)·p_i + β p_max·[i = max] − p_y·[i = y]
        return kind.weight * p_max * (e_max - v.p) - p_y * (e_y - v.p)
    elif tag == 'dlr':
        pi1, pi3 = v.dlr_order(kind)
        denom = (v.at(v.z, pi1) - v.at(v.z, pi3) + DLR_GUARD)[:, None]
        numer = (v.z_max - v.z_y)[:, None]
        return (e_max - e_y) / denom \
            - numer * (v.onehot(pi1) - v.onehot(pi3)) / denom ** 2
    elif tag == 'stage_pmax':
        # p_max·(−Σ_{i≠max} p_i ∇z_i + (1 − p_max) ∇z_max)
        return p_max * (e_max - v.p)
    elif tag == 'stage_neg_py':
        # p_y·(Σ_{i≠y} p_i ∇z_i + (p_y − 1) ∇z_y)
        return p_y * (v.p - e_y)
    elif tag == 'stage_zmax':
        return e_max
    elif tag == 'stage_neg_zy':
        return -e_y


def loss_value(kind, z, y, target=None):
    """Value of loss *kind* at logits *z* for true class *y*.

    Parameters
    ----------
    kind : LossKind or str
    z : array_like
        Logits, ``(N,)`` or ``(batch, N)``.
    y : int or array_like
        True class(es).
    target : int or array_like, optional
        Fixed class replacing the strongest wrong class.

    Raises
    ------
    UnsupportedLoss
        For DLR with too few classes.
    """
    kind = LossKind.parse(kind)
    v = LogitView(z, y, target)
    return v.wrap(_value(kind, v))


def loss_grad_logits(kind, z, y, target=None):
    """Exact gradient of :func:`loss_value` with respect to *z*."""
    kind = LossKind.parse(kind)
    v = LogitView(z, y, target)
    return v.wrap(_grad(kind, v))


def loss_and_grad(kind, z, y, target=None):
    """Return ``(loss_value(...), loss_grad_logits(...))`` in one pass."""
    kind = LossKind.parse(kind)
    v = LogitView(z, y, target)
    return v.wrap(_value(kind, v)), v.wrap(_grad(kind, v))


def stage_kind(k, K1, r, kind=PM):
    """Loss used at step *k* of restart *r* with stage boundary *K1*.

    In stage 1 (k < K1) even restarts ascend the 'max' term and odd restarts
    descend the true-class term: p_max / −p_y, or z_max / −z_y when *kind* is
    the margin loss. From k = K1 on, *kind* itself is used.
    """
    if k < 1 or K1 < 1 or r < 1:
        raise ValueError(f'need k, K1, r >= 1; got k={k}, K1={K1}, r={r}')

    kind = LossKind.parse(kind)
    if k >= K1:
        return kind

    logit_terms = kind.tag == 'margin'
    if r % 2 == 0:
        return LossKind('stage_zmax' if logit_terms else 'stage_pmax')
    else:
        return LossKind('stage_neg_zy' if logit_terms else 'stage_neg_py')


def stage_loss(k, K1, r, z, y, kind=PM):
    """Value and gradient of the two-stage loss at step *k*, restart *r*.

    Returns
    -------
    tuple
        (value, gradient with respect to *z*).
    """
    return loss_and_grad(stage_kind(k, K1, r, kind), z, y)
