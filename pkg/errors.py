#!/usr/bin/env python3
"""
Error types for the SMPEC gradient-tracking simulator
Every failure the library raises derives from SmpecError
"""


class SmpecError(Exception):
    """Base class for all simulator errors"""


class InvalidInstance(SmpecError, ValueError):
    """Instance parameters are out of range (e.g. m <= 0)"""


class InfeasibleSet(SmpecError, ValueError):
    """The parametric feasible set Z(x) is empty at the requested x"""


class NonFiniteIterate(SmpecError, ArithmeticError):
    """An iterate became NaN or Inf, usually a stepsize misconfiguration"""


class ZeroRadius(SmpecError, ValueError):
    """Smoothing radius eta is zero"""


class DisconnectedGraph(SmpecError, ValueError):
    """Communication graph is disconnected, so rho would equal 1"""


class InvalidTopologyParams(SmpecError, ValueError):
    """Unknown topology or parameters that cannot build it"""


class NoConvergence(SmpecError, RuntimeError):
    """Power iteration hit its iteration cap"""


class InvalidBeta(SmpecError, ValueError):
    """beta outside (0, min{2/3, rho^-2 - 1})"""


class NegativeDiscriminant(SmpecError, ArithmeticError):
    """A stepsize threshold has a negative discriminant"""


class InvariantViolation(SmpecError, RuntimeError):
    """An exact algebraic identity of the tracking recursion failed"""


class ConfigError(SmpecError, ValueError):
    """Experiment configuration could not be used"""


class ParseError(ConfigError):
    """Config text is malformed or contains unknown keys"""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class RangeError(ConfigError):
    """A config value is outside its valid range"""

    def __init__(self, field, value, requirement):
        self.field = field
        self.value = value
        super().__init__(f"{field} = {value!r} is invalid: {requirement}")
