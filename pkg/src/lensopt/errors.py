"""Exception types shared across the package."""


class LensoptError(Exception):
    """Base class for package errors."""


class LinearSolveError(LensoptError):
    """Conjugate gradients failed to reach the requested residual.

    Usually indicates an indefinite/singular operator or bad scaling.
    """


class InfeasiblePhaseFieldError(LensoptError):
    """Phase field leaves [0, 1]; the double-obstacle potential is +inf there."""


class PicardDivergenceError(LensoptError):
    """Fixed-point sweeps grew instead of contracting (data too large)."""


class ScenarioError(LensoptError):
    """Configuration file is malformed or violates a scenario invariant."""
