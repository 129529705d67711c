from enum import IntEnum

import numpy as np


#: Leading bytes of every tensor container file.
MAGIC = b'PMAT'

#: Container format version written by :func:`.write_container`.
VERSION = 1


class DType(IntEnum):
    """Element type codes of the tensor container format."""
    # NB the docstring comments ('#:') are placed as they are to ensure the
    #    output is readable.

    #: 32-bit IEEE float, little-endian.
    F32 = 1

    #: 32-bit unsigned integer, little-endian. Used for labels.
    U32 = 2

    @property
    def numpy(self):
        """The little-endian :class:`numpy.dtype` for this code."""
        return np.dtype({DType.F32: '<f4', DType.U32: '<u4'}[self])

    @classmethod
    def for_array(cls, array):
        """Return the code for *array*, or raise :class:`TypeError`."""
        kind = np.asarray(array).dtype.kind
        if kind == 'f':
            return cls.F32
        elif kind in 'iu':
            return cls.U32
        raise TypeError(f'no container dtype for {np.asarray(array).dtype}')
