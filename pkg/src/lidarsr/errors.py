"""Exception types raised across the toolkit.

Everything derives from LidarSRError so callers (and the CLI) can catch one
base class. Names mirror the failure they describe; messages carry the
offending value where that helps debugging.
"""


class LidarSRError(Exception):
    """Base class for all library errors."""


# --- geometry -------------------------------------------------------------

class GeometryError(LidarSRError, ValueError):
    """Invalid sensor geometry or raster construction."""


class NonMonotoneElevations(GeometryError):
    pass


class OddLayerCount(GeometryError):
    pass


class BadRange(GeometryError):
    pass


class OriginPoint(GeometryError):
    """A point at the exact sensor origin has no direction."""


class EmptyGeometry(GeometryError):
    pass


# --- tensors / networks ---------------------------------------------------

class TensorError(LidarSRError, ValueError):
    pass


class ShapeMismatch(TensorError):
    pass


class NonScalarLoss(TensorError):
    pass


class BadConfig(LidarSRError, ValueError):
    pass


class InputTooSmall(LidarSRError, ValueError):
    pass


class CorruptFile(LidarSRError, ValueError):
    pass


class ShapeMismatchVsConfig(LidarSRError, ValueError):
    """Weight file disagrees with the network configuration.

    The offending tensor name is stored on .name.
    """

    def __init__(self, name, detail=""):
        self.name = name
        super().__init__(f"tensor {name!r} does not match the configuration"
                         + (f": {detail}" if detail else ""))


# --- losses / metrics -----------------------------------------------------

class EmptyValidSet(LidarSRError, ValueError):
    pass


class TapOutOfRange(LidarSRError, ValueError):
    pass


class BadClassId(LidarSRError, ValueError):
    pass


class TooFewRows(LidarSRError, ValueError):
    pass


class EmptyOverlap(LidarSRError, ValueError):
    pass


class DuplicateVote(LidarSRError, ValueError):
    """Same subject rated the same scene/method twice.

    The (subject, scene, method) triple is stored on .triple.
    """

    def __init__(self, subject, scene, method):
        self.triple = (subject, scene, method)
        super().__init__(f"duplicate vote for subject={subject!r} "
                         f"scene={scene!r} method={method!r}")


# --- simulator / pipeline -------------------------------------------------

class DegeneratePrimitive(LidarSRError, ValueError):
    pass


class MalformedFile(LidarSRError, ValueError):
    pass


class MissingExtractor(LidarSRError, ValueError):
    pass


class EmptyDataset(LidarSRError, ValueError):
    pass


class MissingLabels(LidarSRError, ValueError):
    pass


class UnknownAlias(LidarSRError, ValueError):
    pass
