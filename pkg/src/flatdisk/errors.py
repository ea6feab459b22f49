class FlatDiskError(Exception):
    """Base class for every error raised by flatdisk."""


class ConfigError(FlatDiskError, ValueError):
    """Configuration is missing or invalid."""


class GuardrailError(FlatDiskError, ValueError):
    """User input violates a parsing rule or a configured cap."""


class SpecError(FlatDiskError, ValueError):
    """The disk specification does not describe a valid flat disk."""


class EdgeLengthMismatch(SpecError):
    """Two glued edges have different lengths."""


class NotADisk(SpecError):
    """The glued complex is not a topological disk."""


class GaussBonnetViolation(SpecError):
    """Cone angles do not satisfy the disk Gauss-Bonnet identity."""


class AngleAssertionFailed(SpecError):
    """A declared vertex angle differs from the computed one."""


class NonOrientable(SpecError):
    """Gluing orientations are incoherent."""


class CutRoutingFailed(SpecError):
    """No interior-disjoint cut system exists in the 1-skeleton."""


class InvalidCutSystem(SpecError):
    """A user supplied cut system breaks the cut rules."""


class ArithmeticDomainError(FlatDiskError, ValueError):
    """A quantity is outside the exact arithmetic domain."""


class NonRepresentableAngle(ArithmeticDomainError):
    """The angle is not a multiple of pi/l."""


class NotRational(ArithmeticDomainError):
    """No fraction of pi with bounded denominator is close enough."""


class IrrationalDisk(ArithmeticDomainError):
    """Some singular angle of the disk is not a rational multiple of pi."""


class TraceError(FlatDiskError, ValueError):
    """A trajectory request cannot be honoured."""


class StartsSingular(TraceError):
    """The start point lies on a singular point."""


class WordMismatch(TraceError):
    """The trajectory word does not match the cut disk labels."""


class ConsistencyError(FlatDiskError, RuntimeError):
    """An internal cross-check failed."""


class NonTranslationGluing(ConsistencyError):
    """A surface pairing is not a translation."""


class EulerCharacteristicMismatch(ConsistencyError):
    """Formula and direct Euler characteristics disagree."""
