import numpy as np

from .base import Layer, ShapeError, SpecError  # noqa: F401
from .layers import Conv2d, Dense, Flatten, ReLU

#: Mapping from names to available layer kinds. To register additional
#: layers, add elements to this variable.
LAYERS = {
    'dense': Dense,
    'relu': ReLU,
    'conv2d': Conv2d,
    'flatten': Flatten,
}


def get_layer(kind, **options):
    """Return a layer of *kind* with *options*."""
    try:
        cls = LAYERS[kind]
    except KeyError:
        raise KeyError(f'unknown layer kind {kind!r}; expected one of '
                       f'{sorted(LAYERS)}') from None
    return cls(**options)


class LabeledBatch:
    """Inputs in [0, 1] with integer class labels.

    *labels* may be :obj:`None` for unlabeled data.
    """
    def __init__(self, inputs, labels=None):
        inputs = np.asarray(inputs, dtype=np.float32)
        if not np.all(np.isfinite(inputs)):
            raise ValueError('inputs contain non-finite values')
        elif inputs.size and (inputs.min() < 0 or inputs.max() > 1):
            raise ValueError(f'inputs outside [0, 1]: [{inputs.min()}, '
                             f'{inputs.max()}]')
        self.inputs = inputs

        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (len(inputs),):
                raise ValueError(f'{labels.shape} labels for {len(inputs)} '
                                 'inputs')
        self.labels = labels

    def __len__(self):
        return len(self.inputs)

    def check_classes(self, classes):
        """Raise :class:`ValueError` unless all labels are in [0, classes)."""
        if self.labels is not None and len(self.labels) and \
                (self.labels.min() < 0 or self.labels.max() >= classes):
            raise ValueError(f'labels outside [0, {classes})')

    def subset(self, index):
        return LabeledBatch(
            self.inputs[index],
            None if self.labels is None else self.labels[index])


from .classifier import (  # noqa: E402
    Classifier,
    ModelSpec,
    forward,
    init_classifier,
    input_gradient,
    softmax,
)
from .train import TrainingDiverged, train  # noqa: E402

__all__ = [
    'Classifier',
    'LAYERS',
    'LabeledBatch',
    'Layer',
    'ModelSpec',
    'ShapeError',
    'SpecError',
    'TrainingDiverged',
    'forward',
    'get_layer',
    'init_classifier',
    'input_gradient',
    'softmax',
    'train',
]
