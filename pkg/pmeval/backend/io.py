"""Reading and writing tensors, checkpoints, datasets and id lists.

All files are written atomically: data goes to a temporary file in the target
directory, which is then renamed over the destination.
"""
import logging
from pathlib import Path
import struct

import numpy as np
import yaml

from pmeval.utils import atomic_write
from . import DType, MAGIC, VERSION


log = logging.getLogger(__name__)

# magic, version, dtype, ndim, 2 pad bytes
_HEADER = struct.Struct('<4sIBB2x')

#: File names used inside checkpoint and dataset directories.
MANIFEST = 'manifest.yaml'
INPUTS = 'inputs.pmat'
LABELS = 'labels.pmat'


class ContainerFormatError(ValueError):
    """A file is not a valid tensor container."""


def encode_container(array):
    """Return the bytes of the container holding *array*."""
    array = np.asarray(array)
    dtype = DType.for_array(array)

    if dtype is DType.F32 and not np.all(np.isfinite(array)):
        raise ValueError('cannot store non-finite values')
    elif dtype is DType.U32 and array.size and array.min() < 0:
        raise ValueError('cannot store negative values as u32')

    header = _HEADER.pack(MAGIC, VERSION, int(dtype), array.ndim)
    extents = struct.pack(f'<{array.ndim}Q', *array.shape)
    payload = np.ascontiguousarray(array, dtype=dtype.numpy).tobytes()
    return header + extents + payload


def decode_container(data, name='<bytes>'):
    """Parse container *data* and return a :class:`numpy.ndarray`.

    Raises
    ------
    ContainerFormatError
        For a wrong magic number, unknown version or dtype, or a payload
        whose length does not match the extents.
    """
    if len(data) < _HEADER.size:
        raise ContainerFormatError(f'{name}: truncated header')

    magic, version, dtype, ndim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ContainerFormatError(f'{name}: bad magic {magic!r}')
    elif version != VERSION:
        raise ContainerFormatError(f'{name}: unsupported version {version}')

    try:
        dtype = DType(dtype)
    except ValueError:
        raise ContainerFormatError(f'{name}: unknown dtype code {dtype}')

    offset = _HEADER.size + 8 * ndim
    if len(data) < offset:
        raise ContainerFormatError(f'{name}: truncated extents')
    shape = struct.unpack_from(f'<{ndim}Q', data, _HEADER.size)

    expected = int(np.prod(shape, dtype=np.int64)) * dtype.numpy.itemsize
    if len(data) - offset != expected:
        raise ContainerFormatError(
            f'{name}: payload has {len(data) - offset} bytes; expected '
            f'{expected} for shape {list(shape)}')

    array = np.frombuffer(data, dtype=dtype.numpy, offset=offset)
    # Native byte order, writeable copy
    return array.reshape(shape).astype(dtype.numpy.newbyteorder('='))


def write_container(path, array):
    """Write *array* to the container file at *path*."""
    path = Path(path)
    atomic_write(path, encode_container(array))
    log.debug(f'Wrote {list(np.shape(array))} to {path}')


def read_container(path):
    """Read the container file at *path*."""
    path = Path(path)
    return decode_container(path.read_bytes(), name=str(path))


def write_manifest(path, info):
    atomic_write(Path(path), yaml.safe_dump(info, sort_keys=True).encode())


def read_manifest(path):
    with open(path) as f:
        return yaml.safe_load(f)


# Checkpoints

def save_checkpoint(model, path):
    """Save *model* to the checkpoint directory *path*.

    The directory contains :data:`MANIFEST` with the model spec, the
    initialisation seed and the list of tensor files, plus one container per
    weight tensor.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    tensors = []
    for index, params in enumerate(model.params):
        for name, value in sorted(params.items()):
            filename = f'param{index}.{name}.pmat'
            write_container(path / filename, value)
            tensors.append(dict(param=index, name=name, file=filename))

    write_manifest(path / MANIFEST, dict(
        spec=model.spec.to_dict(),
        seed=model.seed,
        tensors=tensors,
    ))
    log.info(f'Saved checkpoint to {path}')


def load_checkpoint(path):
    """Load a :class:`.Classifier` from the checkpoint directory *path*."""
    from pmeval.model import Classifier, ModelSpec

    path = Path(path)
    info = read_manifest(path / MANIFEST)
    spec = ModelSpec.from_dict(info['spec'])

    params = [dict() for _ in spec.param_layers()]
    for item in info['tensors']:
        params[item['param']][item['name']] = \
            read_container(path / item['file'])

    return Classifier(spec, params, seed=info.get('seed'))


# Datasets

def save_dataset(batch, path):
    """Save the :class:`.LabeledBatch` *batch* to directory *path*."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_container(path / INPUTS, batch.inputs)
    if batch.labels is not None:
        write_container(path / LABELS, batch.labels.astype(np.uint32))


def load_dataset(path):
    """Load a :class:`.LabeledBatch` from directory *path*.

    A directory without :data:`LABELS` yields a batch whose labels are
    :obj:`None`; such unlabeled sets are accepted by
    :func:`.relative_robustness`.
    """
    from pmeval.model import LabeledBatch

    path = Path(path)
    inputs = read_container(path / INPUTS)
    try:
        labels = read_container(path / LABELS).astype(np.int64)
    except FileNotFoundError:
        labels = None
    return LabeledBatch(inputs, labels)


# Identifier lists

def read_ids(path):
    """Read a newline-delimited list of identifiers."""
    return [line for line in Path(path).read_text().splitlines() if line]


def write_ids(path, ids):
    atomic_write(Path(path), ''.join(f'{i}\n' for i in ids).encode())
