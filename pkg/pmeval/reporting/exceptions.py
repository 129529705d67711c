class ComputationError(Exception):
    """Wrapper to print intelligible exception information for
    :meth:`.Reporter.get`.

    The message gives the key in :attr:`.Reporter.graph` and the task that
    failed, followed by the part of the traceback below the dask internals.
    The original exception is available as :attr:`cause`.
    """
    def __init__(self, key=None):
        super().__init__(key)
        self.key = key

    @property
    def cause(self):
        return self.__cause__ or self.__context__

    def __str__(self):
        from traceback import (
            TracebackException,
            format_exception_only,
            format_list,
        )

        cause = self.cause
        if cause is None:
            return f'when computing {self.key}'

        info = dict(key=self.key, task='(unknown task)')
        frames = []
        dask_internal = True

        tb = TracebackException.from_exception(cause, capture_locals=True)
        for frame in tb.stack:
            if dask_internal and frame.name in ('execute_task',
                                                '_execute_task'):
                # Values are the repr() of the key and task being executed
                info.update({name: frame.locals[name]
                             for name in ('key', 'task')
                             if name in (frame.locals or {})})
                dask_internal = False

            if not dask_internal:
                frame.locals = None
                frames.append(frame)

        lines = [
            'when computing {key}, using\n\n{task}\n\n'.format(**info),
            'Use Reporter.describe(...) to trace the computation.\n\n',
            'Computation traceback:\n',
        ]
        lines.extend(format_list(frames[1:] if len(frames) > 1 else frames))
        lines.extend(format_exception_only(cause.__class__, cause))
        return ''.join(lines)
