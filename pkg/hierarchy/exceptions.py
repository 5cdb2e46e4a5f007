from tensorcore.exceptions import WorkbenchError


class IntegrationError(WorkbenchError):
    """A time integration drifted further from its series reference than allowed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
