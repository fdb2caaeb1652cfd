"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not conform to its declared format (PGM header, mask
    domain, manifest CSV schema)."""


class ShapeMismatchError(ValueError):
    """Two grids that must share dimensions do not."""


class BoundsError(ValueError):
    """A bounding box or index lies outside the grid it refers to."""


class StatsError(ValueError):
    """Dataset statistics unusable for the adaptive exponent
    (s_mean <= 0 or c_mean == 0)."""


class DegenerateRegionError(ValueError):
    """A contrast region contains no background pixels."""


class EmptyTrainingSetError(ValueError):
    """No targets found in any train-split image."""


class EmptyDatasetError(ValueError):
    """An evaluation was requested over zero images."""


class SceneSpecError(ValueError):
    """A synthetic scene description is invalid (target out of bounds)."""
