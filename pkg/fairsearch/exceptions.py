class FairsearchError(Exception):
    pass


class ShapeMismatch(FairsearchError):
    pass


class InvalidArgument(FairsearchError):
    pass


class GradientError(FairsearchError):
    pass


class GenotypeParseError(FairsearchError):
    pass


class GenotypeMismatch(FairsearchError):
    pass


class ImageTooSmall(FairsearchError):
    pass


class CheckpointError(FairsearchError):
    pass


class DatasetFormatError(FairsearchError):
    pass


class InsufficientSamples(FairsearchError):
    pass


class EmptyDataset(FairsearchError):
    pass


class EmptyStream(FairsearchError):
    pass


class ConfigMismatch(FairsearchError):
    pass


class ConfigError(FairsearchError):
    pass
