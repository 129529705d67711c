import logging

import numpy as np

from .base import Attack, InvalidAttackConfig
from .pgd import check_sign_update


log = logging.getLogger(__name__)


def rank_targets(logits, reference, count):
    """Classes other than *reference*, by clean logit, descending.

    Returns an integer array ``(batch, count)``; ties go to the smallest
    class index.
    """
    masked = np.array(logits, dtype=np.float64)
    masked[np.arange(len(masked)), reference] = -np.inf
    return np.argsort(-masked, axis=1, kind='stable')[:, :count]


class MultiTargetAttack(Attack):
    """Targeted runs against each of the top *T* wrong classes.

    For every target, each restart runs K sign steps on a single cosine
    cycle, ascending the targeted form of the loss (the strongest wrong
    class replaced by the target; e.g. z_t − z_y for 'mg'). A sample is
    broken if any run breaks it; its best loss is the maximum over runs.

    With N = 2 classes, T is always 1.
    """
    kind = 'mt'
    default_loss = 'mg'

    def check_config(self):
        check_sign_update(self)
        if self.cfg.targets < 1:
            raise InvalidAttackConfig(
                f'mt: targets must be >= 1; got {self.cfg.targets}')

    def target_count(self, classes):
        return 1 if classes == 2 else self.cfg.targets

    def check_model(self, model):
        if model.classes == 2 and self.cfg.targets != 1:
            log.info(f'mt: {model.classes} classes; using 1 target instead '
                     f'of {self.cfg.targets}')
        elif model.classes > 2 and self.cfg.targets >= model.classes:
            raise InvalidAttackConfig(
                f'mt: targets must be < {model.classes} classes; got '
                f'{self.cfg.targets}')

    def attack_block(self, model, tracker, indices):
        cfg = self.cfg
        count = self.target_count(model.classes)
        ranked = rank_targets(model.forward(tracker.x), tracker.reference,
                              count)
        step_size = self.cosine_steps(1)

        for rank in range(count):
            for r in range(1, cfg.restarts + 1):
                x0 = self.noise_init(tracker, indices, r, rank)
                self.sign_ascent(model, tracker, x0, step_size,
                                 lambda k: cfg.loss, target=ranked[:, rank])
