"""Exception hierarchy. All subclass builtin types so callers may catch broadly."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StructuralError(ValueError):
    """Shapes, dimensions or matrix structure are inconsistent."""


class LifecycleError(RuntimeError):
    """An object was used out of order (e.g. stepping before reset)."""


class SchemaError(ValueError):
    """An experiment or scenario configuration is invalid."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed or incompatible with the requested model."""


class PreconditionError(RuntimeError):
    """An operation's precondition does not hold (e.g. replay buffer too small)."""
