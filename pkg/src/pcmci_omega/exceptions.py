class PCMCIOmegaError(Exception):
    """Base class for package errors."""


class PanelFormatError(PCMCIOmegaError, ValueError):
    """Malformed panel input (shape, non-finite values, bad CSV)."""


class InsufficientDataError(PCMCIOmegaError, ValueError):
    """Too few usable samples for the requested computation."""


class SpecValidationError(PCMCIOmegaError, ValueError):
    """A structural causal model spec violates its invariants."""


class UnstableSpecError(PCMCIOmegaError, RuntimeError):
    """The generator could not find a numerically stable spec."""
