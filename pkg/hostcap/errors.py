# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
from typing import Optional

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_FIT = 4
EXIT_SOLVE = 5


class HostCapError(Exception):
    """
    Base class for all errors raised by the hosting-capacity toolkit.
    Each subclass carries the process exit code the command line front end returns.
    """
    exit_code = EXIT_UNEXPECTED


class ConfigError(HostCapError):
    exit_code = EXIT_CONFIG


class NetworkError(HostCapError):
    """
    A network that cannot be used: no slack bus, duplicate ids, disconnected graph, ...
    """
    exit_code = EXIT_SIMULATION


class CaseSyntaxError(NetworkError):
    def __init__(self, message: str, line: int, column: int) -> None:
        """
        Create a new syntax error for a case file.
        @param message: Human-readable description.
        @param line: 1-based line number.
        @param column: 1-based column number.
        """
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class PowerFlowError(HostCapError):
    exit_code = EXIT_SIMULATION


class SingularJacobianError(PowerFlowError):
    def __init__(self, iteration: int, detail: Optional[str] = None) -> None:
        msg = f"Singular Jacobian in Newton iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.iteration = iteration


class SimulationError(HostCapError):
    exit_code = EXIT_SIMULATION


class FitError(HostCapError):
    exit_code = EXIT_FIT


class GprFitError(FitError):
    pass


class LogitFitError(FitError):
    pass


class SolveError(HostCapError):
    exit_code = EXIT_SOLVE


class DomainError(ValueError):
    """
    An argument outside the domain of a pure numerical function, e.g. a probability outside (0, 1).
    """
    pass
