import logging

import numpy as np

from pmeval.utils import derive_seed, sample_rng
from .classifier import softmax


log = logging.getLogger(__name__)


class TrainingDiverged(ArithmeticError):
    """The training loss became non-finite.

    Attributes
    ----------
    epoch : int
        Index (from 0) of the epoch in which the loss diverged.
    """
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f'training loss is non-finite in epoch '
                         f'{epoch}')


def cross_entropy(logits, labels):
    """Mean cross-entropy of *logits* and its gradient."""
    p = softmax(logits)
    rows = np.arange(len(labels))
    with np.errstate(divide='ignore'):
        loss = -np.log(p[rows, labels]).mean()
    grad = p
    grad[rows, labels] -= 1
    return loss, grad / len(labels)


def train(model, data, epochs, lr, batch_size=32, adversarial=None,
          seed=None):
    """Train *model* on *data* with minibatch SGD on the cross-entropy.

    Parameters
    ----------
    model : .Classifier
    data : .LabeledBatch
    epochs : int
        Passes over *data*; with 0, *model* is returned unchanged.
    lr : float
        Learning rate, > 0.
    batch_size : int
    adversarial : .AttackConfig, optional
        If given, each minibatch is replaced by its PGD examples (with early
        stopping off) before the gradient step.
    seed : int, optional
        Seed for shuffling and for the attack; default: the model's seed.

    Returns
    -------
    .Classifier
        A new model; *model* itself is not modified.

    Raises
    ------
    TrainingDiverged
        If the loss becomes non-finite.
    """
    if epochs < 0:
        raise ValueError(f'epochs must be >= 0; got {epochs}')
    elif not lr > 0:
        raise ValueError(f'lr must be > 0; got {lr}')
    elif batch_size < 1:
        raise ValueError(f'batch_size must be >= 1; got {batch_size}')
    elif data.labels is None:
        raise ValueError('cannot train on unlabeled data')
    data.check_classes(model.classes)

    if epochs == 0:
        return model

    seed = (model.seed or 0) if seed is None else seed

    if adversarial is not None:
        from pmeval.attacks import PGDAttack

        adversarial = adversarial.replace(early_stop=False, record=False)

    params = [dict(p) for p in model.params]
    current = model

    for epoch in range(epochs):
        order = sample_rng(seed, epoch).permutation(len(data))

        losses = []
        for start in range(0, len(data), batch_size):
            batch = data.subset(order[start:start + batch_size])
            if adversarial is not None:
                attack = PGDAttack(adversarial.replace(
                    seed=derive_seed(seed, 'adversarial', epoch, start)))
                outcomes = attack.run(current, batch)
                batch.inputs = np.stack([o.adv_example for o in outcomes])

            logits, caches = current.forward_cached(batch.inputs)
            loss, grad = cross_entropy(logits, batch.labels)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            losses.append(loss * len(batch))

            _, grads = current.backward(caches, grad, param_grads=True)
            for p, g in zip(params, grads):
                for name in p:
                    p[name] = (p[name] - lr * g[name]).astype(np.float32)
                    if not np.all(np.isfinite(p[name])):
                        raise TrainingDiverged(epoch)
            current = model.with_params(params)

        log.info(f'Epoch {epoch + 1}/{epochs}: loss '
                 f'{sum(losses) / len(data):.4f}')

    return current
