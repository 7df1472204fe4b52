#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Exception hierarchy shared by the simulation, analysis and CLI layers."""

from __future__ import annotations

from typing import List


class CircumnavError(Exception):
    """Base class for every error raised by circumnav."""


class ZeroRange(CircumnavError):
    """The UAV coincides with the target; bearing and polar dynamics are undefined."""


class InvalidGain(CircumnavError, ValueError):
    """A gain or speed makes a derived quantity impossible (e.g. k <= 1/r_d)."""


class NoCrossing(CircumnavError):
    """Both ends of a step lie on the same side of the aim circle."""


class AlreadyFrozen(CircumnavError):
    pass


class NotFrozen(CircumnavError):
    pass


class DomainError(CircumnavError, ValueError):
    """Argument outside the domain on which a function is defined."""


class GainConditionViolated(CircumnavError):
    """Raised by a run when gain validation fails and the failure is fatal."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(check.name for check in report.failures) or "unknown"
        super().__init__(f"gain conditions violated: {failed}")


class ParseError(CircumnavError):
    """Scenario text could not be parsed; the message carries the location."""


class ValidationError(CircumnavError):
    """Scenario parsed but failed validation; carries every violation found."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  - " + "\n  - ".join(self.errors))
