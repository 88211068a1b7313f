"""Exception types shared across the simulator."""


class HallkinError(Exception):
    """Base class for all simulator errors."""


class InvalidInput(HallkinError):
    """An argument violates a documented precondition."""


class TailTruncation(HallkinError):
    """Initial data carries too much mass outside the velocity box."""


class ExcessiveTruncation(HallkinError):
    """A velocity-space remap pushed too much mass past the box edge."""


class NonConvergence(HallkinError):
    """The Newton iteration failed to reach its tolerance."""


class SingularSystem(HallkinError):
    """The implicit induction solve produced an unusable linear system."""


class ConfigError(HallkinError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """The config file is syntactically malformed."""


class ValidationError(ConfigError):
    """A config value violates a physical or numerical constraint."""
