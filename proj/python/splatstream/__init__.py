"""Tiled, multi-quality 3D Gaussian splatting video streaming toolkit."""

from splatstream._core import *  # noqa: F401,F403
from splatstream._core import __doc__ as _core_doc

__doc__ = _core_doc or __doc__
