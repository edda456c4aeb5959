"""Exception types shared across the package."""


class PolicyUnavailable(RuntimeError):
    """Policy backend unreachable after retries."""


class RewardUnavailable(RuntimeError):
    """Reward backend unreachable after retries, or unable to score a trace."""


class MalformedResponse(ValueError):
    """Backend answered but the payload does not match the expected schema."""


class NoGoalReachable(ValueError):
    """Exhaustive search of a toy instance found no goal."""


class EmptyDataset(ValueError):
    """Dataset file exists but contains no problems."""


class InvariantViolation(AssertionError):
    """A search-core invariant failed at runtime; indicates a bug."""


class ConfigError(ValueError):
    """Bad CLI arguments or config file contents."""
