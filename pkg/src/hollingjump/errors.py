"""Exception hierarchy."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class KernelDomainError(DomainError):
    """A jump amplitude reaches -1 or below, so ln(1 + amplitude) is undefined."""


class ValidationError(ValueError):
    """A model violates a hard modelling assumption.

    The failing :class:`~hollingjump.model.ValidationReport` is attached as
    ``report``.
    """

    def __init__(self, report):
        self.report = report
        failed = ", ".join(c.name for c in report.failures)
        super().__init__(f"model assumptions violated: {failed}")


class DivergenceError(RuntimeError):
    """Every trajectory of an ensemble overflowed."""
