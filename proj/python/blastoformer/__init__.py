"""Blast pressure surrogate toolkit: BlastOFormer, FNO and CNN models with an
analytic desk-scale oracle, dataset pipeline, and training harness."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
