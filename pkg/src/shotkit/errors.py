"""Exception types shared across shotkit."""


class InputError(ValueError):
    """Invalid user input: bad shapes, out-of-range indices, malformed records."""


class DegeneratePoseError(InputError):
    """A geometric measurement is undefined for the given joints."""


class PipelineError(RuntimeError):
    """An annotation pipeline step failed after exhausting its retries.

    ``step`` names the failing stage and ``attempts`` carries the attempt log
    (one dict per request attempt). ``raw`` keeps the offending response text
    when the failure is a parse error.
    """

    def __init__(self, message, step=None, attempts=None, raw=None):
        super().__init__(message)
        self.step = step
        self.attempts = list(attempts or [])
        self.raw = raw
