"""Gaussian mixture ensembles for conditional density estimation."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
