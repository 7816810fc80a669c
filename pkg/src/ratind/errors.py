"""Exception types raised across the package."""


class RatindError(Exception):
    """Base class for all package errors."""


class DimensionError(RatindError, ValueError):
    def __init__(self, expected, got, what="vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} dimension mismatch: expected {expected}, got {got}")


class DomainError(RatindError, ValueError):
    """Argument outside the effective domain of a functional."""


class NonMonotoneError(RatindError, ValueError):
    """A clock or time map that must be monotone is not."""


class BlowUpError(RatindError, RuntimeError):
    def __init__(self, path_index, step, t, norm):
        self.path_index = path_index
        self.step = step
        self.t = t
        self.norm = norm
        super().__init__(
            f"path {path_index} blew up at step {step} (t={t:.6g}, |u|_H={norm:.3g}); "
            "explicit treatment of B is conditionally stable, reduce dt "
            "(roughly dt < 2*epsilon/|DB|)"
        )


class JumpDetected(RatindError):
    """Parametrized path has a plateau of the clock; no differential inverse."""

    def __init__(self, tau_start, tau_end, min_speed, delta):
        self.tau_start = tau_start
        self.tau_end = tau_end
        self.min_speed = min_speed
        self.delta = delta
        super().__init__(
            f"jump detected: speed_time < {delta:g} on tau in [{tau_start:.6g}, {tau_end:.6g}] "
            f"(min {min_speed:.3g})"
        )


class ConfigError(RatindError, ValueError):
    def __init__(self, message, key=None, line=None, column=None):
        self.key = key
        self.line = line
        self.column = column
        super().__init__(message)


class EnsembleTooSmall(RatindError, ValueError):
    pass
