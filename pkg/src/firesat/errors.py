"""Exception types raised across the package."""


class FiresatError(Exception):
    """Base class for all package errors."""


class IterationLimitExceeded(FiresatError):
    pass


class BoundViolation(FiresatError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DegenerateRegion(FiresatError, ValueError):
    pass


class ZeroCoverage(FiresatError):
    pass


class EvaluatorFailure(FiresatError):
    def __init__(self, chromosome, cause):
        self.chromosome = chromosome
        self.cause = cause
        super().__init__(f"evaluation failed for {chromosome}: {cause!r}")


class NonPositiveRadiance(FiresatError, ValueError):
    pass


class MissingChannel(FiresatError, KeyError):
    def __init__(self, channel):
        self.channel = channel
        super().__init__(f"missing channel: {channel}")

    def __str__(self):
        return f"missing channel: {self.channel}"


class InfeasibleSpec(FiresatError, ValueError):
    pass


class GeometryError(FiresatError, ValueError):
    pass


class FixtureMissing(FiresatError, FileNotFoundError):
    pass


class SceneFormatError(FiresatError, ValueError):
    pass
