class ConfigError(ValueError):
    """Invalid configuration: topology parameters, generator ranges, scenario keys."""


class LoadError(ConfigError):
    """A topology or mission file could not be parsed or violates an invariant."""


class GenerationError(ConfigError):
    """Mission generation is impossible for the given network/config."""


class EmbeddingError(RuntimeError):
    """Logic error in state mutation, e.g. committing an infeasible embedding."""
