"""Exception hierarchy shared by all diraclab modules."""


class DiracLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DiracLabError):
    """Invalid experiment configuration.  Carries the full list of problems."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GeometryError(DiracLabError):
    """Degenerate geometric input (singular coset system, ray leaving the safe
    region, non-lightlike covector where one is required, ...)."""


class NoIntersectionError(DiracLabError):
    """Two affine subspaces that were expected to meet do not, within tolerance."""


class DivergenceError(DiracLabError):
    """Solution norm exceeded the blow-up guard during time stepping."""


class GridMismatchError(DiracLabError):
    """Trajectories/backgrounds defined on incompatible grids or time samples."""


class MeasurementInconsistencyError(DiracLabError):
    """Recovered projections are mutually inconsistent beyond tolerance."""
