"""Exception hierarchy. Everything raised on purpose derives from ShapeLossError."""


class ShapeLossError(Exception):
    """Base class for all library errors."""


class ParameterShapeError(ShapeLossError):
    """Coefficient vector lengths do not match the owning model's bases."""


class TopologyError(ShapeLossError):
    """Meshes in a corpus disagree on vertex count or face connectivity."""


class RankError(ShapeLossError):
    """Corpus too small for the requested number of basis components."""


class EmptyRegionError(ShapeLossError):
    """An operation produced or was given an empty vertex/pixel region."""


class EmptyRenderError(ShapeLossError):
    """No triangle survived projection; nothing to rasterize."""


class DegenerateAlignmentError(ShapeLossError):
    """Alignment landmarks are coincident or collinear."""


class InputShapeError(ShapeLossError):
    """Tensor input does not match the network's declared input shape."""


class InvalidNormalizerError(ShapeLossError):
    """Score normalizer with median_real <= median_fake."""


class SeparationError(ShapeLossError):
    """Critic failed to separate real from fake on the fitting data."""


class CorpusTooSmallError(ShapeLossError):
    """Pair synthesis needs at least two subjects and two expressions."""


class SplitError(ShapeLossError):
    """Requested validation counts unsatisfiable under subject disjointness."""


class ConfigurationError(ShapeLossError):
    """Invalid run configuration (batch size, iteration counts, weights...)."""


class DivergenceError(ShapeLossError):
    """Training loss became non-finite."""


class EmbedderContractError(ShapeLossError):
    """Identity embedder violated its contract (e.g. zero-norm output)."""


class MissingAssetError(ShapeLossError):
    """A referenced file (checkpoint, model container, image) is absent."""


class CheckpointError(ShapeLossError):
    """Checkpoint payload inconsistent with its declared layer spec."""
