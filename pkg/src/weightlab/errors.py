"""Exception taxonomy shared by all weightlab modules."""


class WeightlabError(Exception):
    """Base class for every error raised by this package."""


class InvalidIndexError(WeightlabError, ValueError):
    """Triadic index outside the tree (bad generation or position)."""


class NoSiblingError(InvalidIndexError):
    """The root interval has no sibling."""


class ResourceLimitError(WeightlabError):
    """Requested depth exceeds the supported desk-scale limits."""


class SingularityError(WeightlabError):
    """Evaluation point collides with an atom of the measure."""

    def __init__(self, x: float, atom_index: int, atom_position: float):
        self.x = x
        self.atom_index = atom_index
        self.atom_position = atom_position
        super().__init__(
            f"evaluation point {x!r} collides with atom {atom_index} "
            f"at position {atom_position!r}"
        )


class TooCloseError(WeightlabError):
    """Evaluation point lies inside or touches a quadrature cylinder."""


class NumericalFailureError(WeightlabError):
    """A numerical invariant failed (bracketing, edge distances, fits)."""


class DependencyError(WeightlabError):
    """A required precomputed input (e.g. a zero table) is missing entries."""


class ConfigError(WeightlabError, ValueError):
    """Invalid run configuration."""
