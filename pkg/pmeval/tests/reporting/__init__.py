import numpy as np

from pmeval.attacks import Attack, AttackOutcome
from pmeval.model import Classifier, LabeledBatch, ModelSpec

#: Clean predictions are [0, 0, 1, 1, 0]; the last sample is misclassified.
INPUTS = [[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9], [0.6, 0.4]]
LABELS = [0, 0, 1, 1, 1]


def identity_model():
    """Two-class linear model that predicts the larger input."""
    spec = ModelSpec.mlp(2, (), 2)
    return Classifier(spec, [dict(weight=np.eye(2), bias=np.zeros(2))])


def small_batch(labeled=True):
    return LabeledBatch(INPUTS, LABELS if labeled else None)


def outcomes(success):
    return [AttackOutcome(np.zeros(2, dtype=np.float32), bool(s), 0.0, 0)
            for s in success]


class FixedAttack(Attack):
    """Breaks a fixed set of samples, whenever they are attacked."""
    kind = 'fixed'

    def __init__(self, name, broken):
        super().__init__()
        self._name = name
        self.broken = np.asarray(broken, dtype=bool)

    @property
    def name(self):
        return self._name

    def run(self, model, batch, reference=None, active=None):
        active = np.ones(len(batch), dtype=bool) if active is None \
            else np.asarray(active, dtype=bool)
        return [
            AttackOutcome(x, bool(b and a), 0.0 if a else float('nan'), 0)
            for x, b, a in zip(batch.inputs, self.broken, active)
        ]

    def attack_block(self, model, tracker, indices):
        raise NotImplementedError
