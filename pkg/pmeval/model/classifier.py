import logging

import numpy as np

from pmeval.utils import sample_rng
from .base import ShapeError, SpecError


log = logging.getLogger(__name__)


def softmax(z):
    """Row-wise softmax of logits *z*, computed in 64 bits.

    The row maximum is subtracted before exponentiation, so any finite
    logits are handled, and the result is invariant to adding a constant to
    a row.
    """
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class ModelSpec:
    """Architecture of a :class:`Classifier`.

    Parameters
    ----------
    input_shape : tuple of int
        Per-sample input shape, e.g. ``(32,)`` or ``(1, 8, 8)``.
    layers : list of dict
        Layer descriptors. Each has a 'kind' key naming one of
        :data:`.LAYERS`; other keys are options of that layer, e.g.
        ``dict(kind='dense', units=10)``.
    classes : int
        Number of classes *N*; must equal the output extent of the last
        layer.

    Raises
    ------
    SpecError
        If layer shapes do not compose, or the output extent is not
        *classes*.
    """
    def __init__(self, input_shape, layers, classes):
        from . import get_layer

        self.input_shape = tuple(int(i) for i in input_shape)
        self.classes = int(classes)
        self.layer_specs = [dict(item) for item in layers]

        if self.classes < 2:
            raise SpecError(f'need at least 2 classes; got {classes}')
        if not len(self.input_shape) or min(self.input_shape) < 1:
            raise SpecError(f'invalid input shape {list(input_shape)}')

        self.layers = []
        self.shapes = [self.input_shape]
        for index, item in enumerate(self.layer_specs):
            options = dict(item)
            try:
                layer = get_layer(options.pop('kind'), **options)
                self.shapes.append(layer.output_shape(self.shapes[-1]))
            except (KeyError, TypeError, SpecError) as e:
                raise SpecError(f'layer {index} {item}: {e}') from None
            self.layers.append(layer)

        if self.shapes[-1] != (self.classes,):
            raise SpecError(f'output shape {list(self.shapes[-1])} does not '
                            f'match {self.classes} classes')

    @classmethod
    def mlp(cls, input_dim, hidden=(64,), classes=10):
        """Dense/ReLU network, e.g. ``mlp(32, (64,), 10)`` for 32-64-10."""
        layers = []
        for units in hidden:
            layers.extend([dict(kind='dense', units=units), dict(kind='relu')])
        layers.append(dict(kind='dense', units=classes))
        return cls((input_dim,), layers, classes)

    @classmethod
    def from_dict(cls, info):
        return cls(info['input_shape'], info['layers'], info['classes'])

    def to_dict(self):
        return dict(
            input_shape=list(self.input_shape),
            layers=[layer.describe() for layer in self.layers],
            classes=self.classes,
        )

    def param_layers(self):
        """Indices of layers with parameters."""
        return [i for i, layer in enumerate(self.layers)
                if layer.parameterized]

    def __eq__(self, other):
        return isinstance(other, ModelSpec) and \
            self.to_dict() == other.to_dict()

    def __repr__(self):
        return f'<ModelSpec {self.to_dict()}>'


class Classifier:
    """A layered differentiable classifier.

    Parameters
    ----------
    spec : ModelSpec
    params : list of dict
        One dict of 32-bit arrays per parameterized layer, in layer order.
    seed : int, optional
        Seed used by :func:`init_classifier`; informational.

    A Classifier is never modified after construction; training returns a
    new object. Parameter arrays are made read-only, so one Classifier can be
    shared between threads.
    """
    def __init__(self, spec, params, seed=None):
        self.spec = spec
        self.seed = seed
        self.params = []

        indices = spec.param_layers()
        if len(params) != len(indices):
            raise SpecError(f'{len(params)} parameter sets for '
                            f'{len(indices)} parameterized layers')

        for index, given in zip(indices, params):
            layer = spec.layers[index]
            expected = layer.init_params(spec.shapes[index],
                                         np.random.default_rng(0))
            checked = {}
            for name, value in expected.items():
                array = np.array(given[name], dtype=np.float32)
                if array.shape != value.shape:
                    raise ShapeError(index, layer.kind, value.shape,
                                     array.shape)
                array.flags.writeable = False
                checked[name] = array
            self.params.append(checked)

        # Parameters for every layer, empty for those without
        self._layer_params = [dict() for _ in spec.layers]
        for index, p in zip(indices, self.params):
            self._layer_params[index] = p

    @property
    def classes(self):
        return self.spec.classes

    def _check_input(self, inputs):
        inputs = np.asarray(inputs)
        if inputs.shape[1:] != self.spec.input_shape:
            kind = self.spec.layers[0].kind if self.spec.layers else 'input'
            raise ShapeError(0, kind, self.spec.input_shape, inputs.shape[1:])
        return inputs.astype(np.float64)

    def forward_cached(self, inputs):
        """Return logits and the per-layer caches used by :meth:`backward`."""
        x = self._check_input(inputs)
        caches = []
        for index, layer in enumerate(self.spec.layers):
            expected = self.spec.shapes[index]
            if x.shape[1:] != expected:  # pragma: no cover
                raise ShapeError(index, layer.kind, expected, x.shape[1:])
            x, cache = layer.forward(self._layer_params[index], x)
            caches.append(cache)
        return x, caches

    def forward(self, inputs):
        """Return logits of shape ``(batch, classes)`` for *inputs*."""
        return self.forward_cached(inputs)[0]

    def backward(self, caches, logit_grad, param_grads=False):
        """Back-propagate *logit_grad* through the layers.

        Returns the gradient with respect to the inputs or, if *param_grads*
        is :obj:`True`, a tuple of that and a list with one dict of parameter
        gradients per parameterized layer.
        """
        grad = np.asarray(logit_grad, dtype=np.float64)
        if grad.ndim != 2 or grad.shape[1] != self.classes:
            raise ShapeError(len(self.spec.layers) - 1,
                             self.spec.layers[-1].kind,
                             (len(grad), self.classes), grad.shape)

        collected = {}
        for index in reversed(range(len(self.spec.layers))):
            layer = self.spec.layers[index]
            grad, g_params = layer.backward(self._layer_params[index],
                                            caches[index], grad)
            if param_grads and layer.parameterized:
                collected[index] = g_params

        grad = grad.reshape((-1,) + self.spec.input_shape)
        if param_grads:
            return grad, [collected[i] for i in self.spec.param_layers()]
        return grad

    def input_gradient(self, inputs, logit_grad):
        """Gradient with respect to *inputs* of any scalar L with
        dL/dz = *logit_grad*."""
        logits, caches = self.forward_cached(inputs)
        logit_grad = np.asarray(logit_grad)
        if logit_grad.shape != logits.shape:
            raise ShapeError(len(self.spec.layers) - 1,
                             self.spec.layers[-1].kind, logits.shape,
                             logit_grad.shape)
        return self.backward(caches, logit_grad)

    def predict(self, inputs):
        """Predicted classes; ties go to the smallest class index."""
        return self.forward(inputs).argmax(axis=1)

    def with_params(self, params):
        """Return a new Classifier with the same spec and *params*."""
        return Classifier(self.spec, params, seed=self.seed)


def init_classifier(spec, seed):
    """Return a :class:`Classifier` for *spec* with weights drawn from *seed*.

    Weights of each dense/conv layer are uniform in ±√(6/(fan_in+fan_out));
    biases are zero. Each layer draws from its own stream, so the same
    (spec, seed) always gives bit-identical weights.
    """
    if not isinstance(spec, ModelSpec):
        raise SpecError(f'expected ModelSpec; got {type(spec).__name__}')

    params = []
    for index in spec.param_layers():
        rng = sample_rng(seed, index)
        params.append(
            spec.layers[index].init_params(spec.shapes[index], rng))

    log.debug(f'Initialized {len(params)} parameterized layers, seed={seed}')
    return Classifier(spec, params, seed=seed)


def forward(model, inputs):
    """Logits of *model* for *inputs*; see :meth:`Classifier.forward`."""
    return model.forward(inputs)


def input_gradient(model, inputs, logit_grad):
    """See :meth:`Classifier.input_gradient`."""
    return model.input_gradient(inputs, logit_grad)
