"""Distributed PARAFAC decomposition over consensus networks."""

from ._dparafac import *  # noqa: F401,F403
from ._dparafac import __doc__  # noqa: F401
