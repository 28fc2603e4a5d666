"""Exception hierarchy shared across the package.

The ``exit_code`` attribute is what the command line maps each failure to.
"""


class FockDynError(Exception):
    exit_code = 1


class ModelError(FockDynError, ValueError):
    """Invalid lattice, species or interaction specification."""

    exit_code = 2


class SectorError(FockDynError, ValueError):
    """Particle counts or configurations outside a sector."""

    exit_code = 2


class BasisMismatchError(FockDynError, ValueError):
    exit_code = 2


class ConfigError(FockDynError, ValueError):
    """Experiment configuration that cannot be resolved into a plan."""

    exit_code = 2


class InvariantViolation(FockDynError, RuntimeError):
    """A numerical invariant (norm, energy, particle number) drifted past tolerance."""

    exit_code = 3
