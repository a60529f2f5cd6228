"""Exception types raised across the package.

Every error carries a stable ``code`` used by the CLI when it serializes
failures to JSON.
"""


class MetaMetricsError(Exception):
    code = "MetaMetricsError"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class MetricSyntaxError(MetaMetricsError):
    code = "SyntaxError"

    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")

    def to_dict(self):
        d = super().to_dict()
        d.update(line=self.line, column=self.column)
        return d


class DuplicateMetric(MetaMetricsError):
    code = "DuplicateMetric"


class MissingAttempts(MetaMetricsError):
    code = "MissingAttempts"


class UnknownStat(MetaMetricsError):
    code = "UnknownStat"


class InvalidInput(MetaMetricsError):
    code = "InvalidInput"


class DegenerateSeason(MetaMetricsError):
    code = "DegenerateSeason"


class DegenerateMetric(MetaMetricsError):
    code = "DegenerateMetric"


class InsufficientData(MetaMetricsError):
    code = "InsufficientData"


class NoiseDominates(MetaMetricsError):
    code = "NoiseDominates"


class SingularConditioning(MetaMetricsError):
    code = "SingularConditioning"
