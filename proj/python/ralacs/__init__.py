"""Road action recognition pipeline: native core plus thin Python access."""

from ._ralacs import *  # noqa: F401,F403
from ._ralacs import __doc__  # noqa: F401

__version__ = "0.1.0"
