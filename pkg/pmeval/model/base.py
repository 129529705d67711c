from abc import ABC, abstractmethod
import logging


log = logging.getLogger(__name__)


class SpecError(ValueError):
    """A model specification is invalid."""


class ShapeError(ValueError):
    """An array does not have the shape a layer expects.

    Attributes
    ----------
    layer : int
        Index of the offending layer in the :class:`.ModelSpec`; -1 for the
        model input or output.
    kind : str
        Kind of the offending layer.
    """
    def __init__(self, layer, kind, expected, got):
        self.layer, self.kind = layer, kind
        self.expected, self.got = tuple(expected), tuple(got)
        super().__init__(f'layer {layer} ({kind}): expected shape '
                         f'{list(self.expected)}, got {list(self.got)}')


class Layer(ABC):
    """A differentiable layer acting on a batch.

    Layers are stateless: parameters are passed to :meth:`forward` and
    :meth:`backward` as a :class:`dict` of arrays, so that one layer object
    can be shared between classifiers and threads.

    Subclasses **must** set :attr:`kind` and implement :meth:`output_shape`,
    :meth:`forward` and :meth:`backward`. Subclasses with parameters also
    implement :meth:`init_params`.
    """
    #: Name of the layer kind, as used in model specs.
    kind = 'base'

    #: :obj:`True` if the layer holds parameters.
    parameterized = False

    def __init__(self, **options):
        if options:
            raise SpecError(f'{self.kind}: unexpected options {options}')

    def describe(self):
        """Return the layer descriptor, a :class:`dict` with 'kind'."""
        return dict(kind=self.kind)

    @abstractmethod
    def output_shape(self, input_shape):
        """Return the per-sample output shape for *input_shape*.

        Raises
        ------
        SpecError
            If the layer cannot act on *input_shape*.
        """

    def init_params(self, input_shape, rng):
        """Return initial parameters for *input_shape* drawn from *rng*."""
        return {}

    @abstractmethod
    def forward(self, params, x):
        """Compute the layer output for batch *x*.

        Returns
        -------
        tuple
            (output, cache); the cache is passed back to :meth:`backward`.
        """

    @abstractmethod
    def backward(self, params, cache, grad):
        """Back-propagate *grad* (d loss / d output).

        Returns
        -------
        tuple
            (d loss / d input, dict of d loss / d parameter).
        """
