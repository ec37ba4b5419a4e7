"""Python bindings for the iclcp library."""

from ._iclcp import *  # noqa: F401,F403
from ._iclcp import __doc__  # noqa: F401
