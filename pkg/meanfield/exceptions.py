from tensorcore.exceptions import WorkbenchError


class HorizonError(WorkbenchError):
    """The iteration series was asked for a time outside its convergence horizon."""
