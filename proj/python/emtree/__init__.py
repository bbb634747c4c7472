"""Interpretable tree-based energy management controllers evolved with CMA-ES."""

from ._emtree import *  # noqa: F401,F403
from ._emtree import __version__  # noqa: F401
