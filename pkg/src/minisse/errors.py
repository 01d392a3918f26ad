"""Exception hierarchy shared by every pipeline phase."""


class MiniSSEError(Exception):
    """Base class for all errors raised by the package."""


class Diagnostic(MiniSSEError):
    """A source diagnostic with an optional position.

    ``str()`` renders ``file:line:col: severity: message`` when a filename is
    attached, ``line:col: ...`` otherwise.
    """

    severity = "error"

    def __init__(self, message, line=None, col=None, filename=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename

    def render(self, filename=None):
        parts = []
        fname = filename or self.filename
        if fname:
            parts.append(str(fname))
        if self.line is not None:
            parts.append(str(self.line))
            parts.append(str(self.col if self.col is not None else 1))
        prefix = ":".join(parts)
        body = f"{self.severity}: {self.message}"
        return f"{prefix}: {body}" if prefix else body

    def __str__(self):
        return self.render()


class MiniCSyntaxError(Diagnostic):
    pass


class MiniCTypeError(Diagnostic):
    pass


class UnsupportedError(Diagnostic):
    pass


class SpecError(Diagnostic):
    pass


class EmptyTargetSet(MiniSSEError):
    """A match site whose binder can never point at a tracked object."""


class NoTargets(MiniSSEError):
    """Instrumentation found nothing to track."""


class ReportMismatch(MiniSSEError):
    """A candidate report names a machine, target or state the program lacks."""


class PipelineError(MiniSSEError):
    """Wraps a failure with the pipeline phase that raised it."""

    def __init__(self, phase, cause):
        super().__init__(f"{phase}: {cause}")
        self.phase = phase
        self.cause = cause
