"""Correlation search over time series with learned embeddings."""

from ._chronos import *  # noqa: F401,F403
from ._chronos import __version__  # noqa: F401
