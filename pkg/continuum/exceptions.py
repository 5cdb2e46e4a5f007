from tensorcore.exceptions import WorkbenchError


class NumericalBlowup(WorkbenchError):
    """A wave function stopped being finite during a time step."""
