"""Group-orthogonal low-rank adaptation toolkit (Python bindings)."""

from ._gola import *  # noqa: F401,F403
from ._gola import __doc__  # noqa: F401

__version__ = "1.0.0"
