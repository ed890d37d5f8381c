"""Simulation and analytics for the penalized two-armed bandit."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
