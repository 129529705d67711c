from abc import ABC, abstractmethod
from collections import ChainMap, namedtuple
from itertools import chain
import logging
from math import cos, isfinite, pi

import dask
import numpy as np

from pmeval.losses import LossKind, loss_and_grad, loss_value
from pmeval.utils import sample_rng


log = logging.getLogger(__name__)

#: Slack allowed by :func:`check_constraints`.
TOLERANCE = 1e-6


class InvalidAttackConfig(ValueError):
    """An :class:`AttackConfig` or attack descriptor is invalid."""


class ConstraintViolation(AssertionError):
    """An iterate left the ε-ball or the [0, 1] input domain."""


#: Result of attacking one sample.
#:
#: - *adv_example*: 32-bit adversarial example, same shape as the input.
#: - *success*: :obj:`True` if the model's prediction on *adv_example*
#:   differs from the reference label.
#: - *best_loss*: largest value of the tracked loss seen for the sample.
#: - *steps_used*: gradient steps taken before the sample was frozen.
#: - *error*: :obj:`None`, or a message if the sample was aborted.
#: - *trajectory*: running *best_loss* after every evaluation, if recorded.
AttackOutcome = namedtuple(
    'AttackOutcome',
    'adv_example success best_loss steps_used error trajectory',
    defaults=(None, None),
)


class AttackConfig:
    """Parameters of an attack.

    Any of the :attr:`defaults` may be overridden by keyword arguments.

    Other parameters
    ----------------
    epsilon : float
        L∞ budget in input units; ≥ 0.
    steps : int
        Iterations *K* per restart (and per target).
    stage1 : int, optional
        Stage boundary *K1* of two-stage attacks and cosine schedules, in
        [1, *steps*]. Default: the 'stage1' configuration key, capped at
        *steps*.
    restarts : int
        Restarts *n*, each from fresh uniform noise.
    loss : str or .LossKind, optional
        Loss to ascend. Default: chosen by the attack, e.g. 'ce' for PGD.
    step_rule : 'fixed' or 'cosine'
        Step size rule of sign updates.
    alpha : float, optional
        Fixed step size. Default: *epsilon* / 4.
    seed : int
        Seed of the per-sample random streams.
    early_stop : bool, optional
        Freeze each sample as soon as it is misclassified. Default: on, or
        off when *record* is set.
    targets : int
        Number of target classes *T* of the multi-target attack.
    update_rule : 'sign' or 'adaptive'
    lr, beta1, beta2 : float
        Learning rate and moment decay of the adaptive update.
    chunk_size : int
        Samples per block of work; see :meth:`Attack.run`.
    threads : int
        Worker threads.
    record : bool
        Store the best-loss trajectory of every sample in the outcomes.
    """
    defaults = {
        'epsilon': 0.05,
        'steps': 100,
        'stage1': None,
        'restarts': 1,
        'loss': None,
        'step_rule': 'fixed',
        'alpha': None,
        'seed': 0,
        'early_stop': None,
        'targets': 9,
        'update_rule': 'sign',
        'lr': 0.05,
        'beta1': 0.9,
        'beta2': 0.99,
        'chunk_size': 256,
        'threads': 1,
        'record': False,
    }

    #: Default stage boundary when *stage1* is not given.
    default_stage1 = 25

    def __init__(self, **kwargs):
        unknown = sorted(set(kwargs) - set(self.defaults))
        if unknown:
            raise InvalidAttackConfig(f'unknown attack option(s) {unknown}')

        self._given = {k: v for k, v in kwargs.items() if v is not None}
        values = ChainMap(self._given, self.defaults)

        try:
            self.epsilon = float(values['epsilon'])
            self.steps = int(values['steps'])
            self.restarts = int(values['restarts'])
            self.seed = int(values['seed'])
            self.targets = int(values['targets'])
            self.lr = float(values['lr'])
            self.beta1 = float(values['beta1'])
            self.beta2 = float(values['beta2'])
            self.chunk_size = int(values['chunk_size'])
            self.threads = int(values['threads'])
            self.alpha = None if values['alpha'] is None \
                else float(values['alpha'])
        except (TypeError, ValueError) as e:
            raise InvalidAttackConfig(str(e)) from None

        self.stage1 = values['stage1']
        self.stage1 = min(self.default_stage1, self.steps) \
            if self.stage1 is None else int(self.stage1)
        self.loss = None if values['loss'] is None \
            else LossKind.parse(values['loss'])
        self.step_rule = values['step_rule']
        self.update_rule = values['update_rule']
        self.record = as_bool(values['record'])
        self.early_stop = not self.record if values['early_stop'] is None \
            else as_bool(values['early_stop'])

        self._validate()

    def _validate(self):
        checks = [
            (isfinite(self.epsilon) and self.epsilon >= 0,
             f'epsilon must be finite and >= 0; got {self.epsilon}'),
            (self.steps >= 1, f'steps must be >= 1; got {self.steps}'),
            (1 <= self.stage1 <= self.steps,
             f'stage1 must be in [1, {self.steps}]; got {self.stage1}'),
            (self.restarts >= 1,
             f'restarts must be >= 1; got {self.restarts}'),
            (self.targets >= 0, f'targets must be >= 0; got {self.targets}'),
            (self.step_rule in ('fixed', 'cosine'),
             f"step_rule must be 'fixed' or 'cosine'; got "
             f'{self.step_rule!r}'),
            (self.update_rule in ('sign', 'adaptive'),
             f"update_rule must be 'sign' or 'adaptive'; got "
             f'{self.update_rule!r}'),
            (self.alpha is None or self.alpha > 0,
             f'alpha must be > 0; got {self.alpha}'),
            (self.lr > 0, f'lr must be > 0; got {self.lr}'),
            (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1,
             f'beta1, beta2 must be in [0, 1); got {self.beta1}, '
             f'{self.beta2}'),
            (self.chunk_size >= 1,
             f'chunk_size must be >= 1; got {self.chunk_size}'),
            (self.threads >= 1, f'threads must be >= 1; got {self.threads}'),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidAttackConfig(message)

    @classmethod
    def from_config(cls, config=None, **kwargs):
        """Create from the user :class:`.Config` *config*, then *kwargs*."""
        if config is None:
            from pmeval._config import config

        values = dict(
            epsilon=config.get('epsilon'),
            steps=config.get('steps'),
            restarts=config.get('restarts'),
            targets=config.get('targets'),
            seed=config.global_seed(),
            chunk_size=config.get('chunk size'),
            threads=config.get('threads'),
        )
        values.update({k: v for k, v in kwargs.items() if v is not None})
        if 'stage1' not in values:
            values['stage1'] = min(config.get('stage1'), int(values['steps']))
        return cls(**values)

    @property
    def step_size(self):
        """Fixed step size α."""
        return self.epsilon / 4 if self.alpha is None else self.alpha

    def replace(self, **kwargs):
        """Return a copy with the options in *kwargs* changed.

        A *stage1* that was defaulted follows a changed *steps*.
        """
        values = dict(self._given)
        if 'loss' in values:
            values['loss'] = self.loss
        values.update(kwargs)
        return AttackConfig(**values)

    def to_dict(self):
        """Resolved options; loss as its stable name."""
        result = {name: getattr(self, name) for name in self.defaults}
        result['loss'] = None if self.loss is None else self.loss.name
        return result

    def __eq__(self, other):
        return isinstance(other, AttackConfig) and \
            self.to_dict() == other.to_dict()

    def __repr__(self):
        return f'<AttackConfig {self.to_dict()}>'


def as_bool(value):
    """Interpret 'on'/'off', 'true'/'false', 'yes'/'no', '1'/'0' or a bool."""
    if isinstance(value, str):
        try:
            return {'on': True, 'true': True, 'yes': True, '1': True,
                    'off': False, 'false': False, 'no': False, '0': False
                    }[value.lower()]
        except KeyError:
            raise InvalidAttackConfig(f'expected on/off; got {value!r}') \
                from None
    return bool(value)


def project_linf(x_adv, x_orig, eps):
    """Clamp *x_adv* to the L∞ ball of radius *eps* around *x_orig*, then to
    the input domain [0, 1]."""
    x_adv = np.asarray(x_adv)
    x_orig = np.asarray(x_orig)
    if x_adv.shape != x_orig.shape:
        raise ValueError(f'shape mismatch: {x_adv.shape} vs {x_orig.shape}')
    return np.clip(np.clip(x_adv, x_orig - eps, x_orig + eps), 0.0, 1.0)


def cosine_step_size(k, K1, K, eps):
    """Step size at step *k* of the two-stage cosine schedule.

    The schedule decays from 2·*eps* to 0 over steps 1 … *K1* − 1 and
    restarts at 2·*eps* on step *K1*, decaying over the remaining steps.
    When *K1* = *K*, the single stage-2 step gets 2·*eps*.
    """
    if not 1 <= k <= K:
        raise ValueError(f'step {k} outside [1, {K}]')
    elif not 1 <= K1 <= K:
        raise ValueError(f'stage boundary {K1} outside [1, {K}]')

    if k < K1:
        return eps * (1 + cos((k - 1) * pi / K1))
    elif K == K1:
        return 2 * eps
    return eps * (1 + cos((k - K1) * pi / (K - K1)))


def check_constraints(x_adv, x_orig, eps):
    """Raise :class:`ConstraintViolation` unless *x_adv* is in the ε-ball
    around *x_orig* and in [0, 1], each within :data:`TOLERANCE`."""
    dist = np.abs(x_adv - x_orig).max() if x_adv.size else 0.0
    if dist > eps + TOLERANCE:
        raise ConstraintViolation(f'L∞ distance {dist} exceeds ε={eps}')
    elif x_adv.size and (x_adv.min() < -TOLERANCE
                         or x_adv.max() > 1 + TOLERANCE):
        raise ConstraintViolation(f'iterate outside [0, 1]: '
                                  f'[{x_adv.min()}, {x_adv.max()}]')


class Tracker:
    """Best-iterate bookkeeping for one block of samples.

    Each call to :meth:`update` evaluates the tracked loss at the current
    iterates. For each live sample the running maximum of that loss is kept;
    the stored example is the first misclassified iterate if there is one,
    otherwise the iterate with the largest loss.

    A sample stops being live when it is frozen: inactive from the start,
    misclassified under early stopping, or aborted by a non-finite loss.
    Misclassification is judged on the 32-bit iterate, as in :meth:`outcomes`.
    """
    def __init__(self, model, x, reference, kind, active, early_stop,
                 record):
        self.model = model
        self.x = x
        self.reference = reference
        self.kind = kind
        self.early_stop = early_stop

        n = len(x)
        self.adv = x.copy()
        self.best_loss = np.full(n, -np.inf)
        self.success = np.zeros(n, dtype=bool)
        self.steps = np.zeros(n, dtype=np.int64)
        self.active = np.asarray(active, dtype=bool)
        self.done = ~self.active
        self.errors = [None] * n
        self.trajectory = [] if record else None

    @property
    def live(self):
        return ~self.done

    def update(self, x_adv, z, target=None):
        """Record iterates *x_adv* with logits *z*."""
        with np.errstate(invalid='ignore', over='ignore'):
            loss = loss_value(self.kind, z, self.reference, target)
        live = self.live

        bad = live & ~np.isfinite(loss)
        for i in np.flatnonzero(bad):
            self.errors[i] = f'non-finite loss after {self.steps[i]} steps'
            log.warning(f'Sample aborted: {self.errors[i]}')
        self.done |= bad
        live &= ~bad

        hit = live & ~self.success
        candidates = np.flatnonzero(hit)
        if len(candidates):
            rounded = x_adv[candidates].astype(np.float32)
            hit[candidates] = \
                self.model.predict(rounded) != self.reference[candidates]
        better = live & ~self.success & (loss > self.best_loss)
        keep = hit | better
        self.adv[keep] = x_adv[keep]
        self.success |= hit
        self.best_loss[live] = np.maximum(self.best_loss[live], loss[live])

        if self.early_stop:
            self.done |= hit
        if self.trajectory is not None:
            self.trajectory.append(self.best_loss.copy())

    def outcomes(self):
        """Return one :class:`AttackOutcome` per sample.

        Success is evaluated again on the 32-bit examples that are returned.
        """
        adv = self.adv.astype(np.float32)
        success = (self.model.predict(adv) != self.reference) & self.active

        trajectory = None
        if self.trajectory is not None:
            trajectory = np.stack(self.trajectory, axis=1) \
                if self.trajectory else np.zeros((len(adv), 0))

        result = []
        for i in range(len(adv)):
            result.append(AttackOutcome(
                adv[i],
                bool(success[i]),
                float(self.best_loss[i]) if self.active[i] else float('nan'),
                int(self.steps[i]),
                self.errors[i],
                None if trajectory is None else trajectory[i],
            ))
        return result


class Attack(ABC):
    """Base class for L∞ attacks.

    Subclasses **must** implement :meth:`attack_block` and set :attr:`kind`;
    they may override :attr:`default_loss` and :meth:`check_config`.

    Parameters
    ----------
    cfg : AttackConfig, optional
    kwargs :
        Options overriding those of *cfg*.
    """
    #: Name of the attack in descriptors, e.g. 'pgd'.
    kind = 'base'

    #: Loss used when the configuration gives none.
    default_loss = 'ce'

    def __init__(self, cfg=None, **kwargs):
        cfg = cfg or AttackConfig()
        if kwargs:
            cfg = cfg.replace(**kwargs)
        if cfg.loss is None:
            cfg = cfg.replace(loss=self.default_loss)
        self.cfg = cfg
        self.check_config()

    def check_config(self):
        """Raise :class:`InvalidAttackConfig` for unusable options."""

    @property
    def name(self):
        """Display name used in reports, e.g. 'PGD_ce'."""
        return f'{self.kind.upper()}_{self.cfg.loss.name}'

    @property
    def tracked_loss(self):
        """Loss whose running maximum selects the returned iterate."""
        return self.cfg.loss

    def __repr__(self):
        return f'<{type(self).__name__} {self.name}>'

    def run(self, model, batch, reference=None, active=None):
        """Attack every sample of *batch*.

        Parameters
        ----------
        model : .Classifier
        batch : .LabeledBatch
        reference : array_like, optional
            Labels that successful attacks must change the prediction away
            from. Default: the labels of *batch*.
        active : array_like of bool, optional
            Samples to attack. Inactive samples are returned unchanged with
            ``success=False``.

        Returns
        -------
        list of AttackOutcome
            In the order of *batch*.

        Samples are processed in fixed blocks of ``cfg.chunk_size``
        consecutive indices, which are scheduled on ``cfg.threads`` dask
        worker threads. Block composition does not depend on *active* or on
        the number of threads, so neither affects any sample's outcome.
        """
        reference = batch.labels if reference is None else reference
        if reference is None:
            raise ValueError('no reference labels for an unlabeled batch')
        reference = np.asarray(reference, dtype=np.int64)
        if reference.shape != (len(batch),):
            raise ValueError(f'{reference.shape} reference labels for '
                             f'{len(batch)} samples')
        elif len(reference) and (reference.min() < 0
                                 or reference.max() >= model.classes):
            raise ValueError(f'reference labels outside [0, {model.classes})')

        active = np.ones(len(batch), dtype=bool) if active is None \
            else np.asarray(active, dtype=bool)
        self.check_model(model)

        x = batch.inputs
        size = self.cfg.chunk_size
        tasks = []
        for start in range(0, len(batch), size):
            block = slice(start, start + size)
            tasks.append(dask.delayed(self._run_block)(
                model, x[block], reference[block],
                np.arange(start, min(start + size, len(batch))),
                active[block]))

        if self.cfg.threads > 1:
            scheduler = dict(scheduler='threads',
                             num_workers=self.cfg.threads)
        else:
            scheduler = dict(scheduler='sync')

        log.debug(f'{self.name}: {len(tasks)} block(s) of <= {size} samples')
        result = list(chain(*dask.compute(*tasks, **scheduler)))

        log.debug(f'{self.name}: {sum(o.success for o in result)}/'
                 f'{int(active.sum())} successful')
        return result

    def check_model(self, model):
        """Raise :class:`InvalidAttackConfig` if *model* cannot be attacked
        with these options."""

    def _run_block(self, model, x, reference, indices, active):
        x = x.astype(np.float64)
        tracker = Tracker(model, x, reference, self.tracked_loss, active,
                          self.cfg.early_stop, self.cfg.record)

        if tracker.live.any():
            # Clean input
            tracker.update(x, model.forward(x))
            self.attack_block(model, tracker, indices)

        return tracker.outcomes()

    @abstractmethod
    def attack_block(self, model, tracker, indices):
        """Attack the samples held by *tracker*.

        *indices* are the positions of the samples in the batch, used to
        derive their random streams.
        """

    # Helpers for subclasses

    def noise_init(self, tracker, indices, *keys):
        """Uniform noise start in the ε-ball, one stream per sample."""
        eps = self.cfg.epsilon
        noise = np.stack([
            sample_rng(self.cfg.seed, i, *keys).uniform(
                -eps, eps, size=tracker.x.shape[1:])
            for i in indices
        ]) if len(indices) else np.zeros_like(tracker.x)
        return project_linf(tracker.x + noise, tracker.x, eps)

    def sign_ascent(self, model, tracker, x_adv, step_size, loss_at,
                    target=None):
        """Run ``cfg.steps`` projected sign-gradient steps from *x_adv*.

        *step_size* and *loss_at* are functions of the step number k, giving
        the step size and the :class:`.LossKind` ascended at that step. Only
        live samples move. The tracker sees every iterate, including the
        last.
        """
        eps = self.cfg.epsilon
        for k in range(1, self.cfg.steps + 1):
            z, caches = model.forward_cached(x_adv)
            tracker.update(x_adv, z, target)
            moving = tracker.live
            if not moving.any():
                return

            with np.errstate(invalid='ignore', over='ignore'):
                _, grad_z = loss_and_grad(loss_at(k), z, tracker.reference,
                                          target)
            grad = model.backward(caches, grad_z)

            step = project_linf(x_adv + step_size(k) * np.sign(grad),
                                tracker.x, eps)
            x_adv = np.where(broadcast_rows(moving, x_adv), step, x_adv)
            check_constraints(x_adv, tracker.x, eps)
            tracker.steps[moving] += 1

        tracker.update(x_adv, model.forward(x_adv), target)

    def cosine_steps(self, K1):
        """Step size function of the cosine schedule with boundary *K1*."""
        K, eps = self.cfg.steps, self.cfg.epsilon
        return lambda k: cosine_step_size(k, K1, K, eps)


def broadcast_rows(mask, array):
    """Broadcast the per-sample *mask* against *array*."""
    return mask.reshape((-1,) + (1,) * (array.ndim - 1))
