class WorkbenchError(Exception):
    """Root of every error raised by the workbench apps."""


class LabelError(WorkbenchError):
    """Particle labels that do not fit together (collisions, missing labels)."""


class HermiticityError(WorkbenchError):
    """An operator required to be Hermitian is not, beyond tolerance."""


class ConvergenceRadiusWarning(UserWarning):
    """A sufficient convergence condition of a solution series is violated."""


class SymmetryError(WorkbenchError):
    """An operator required to be permutation symmetric is not."""
