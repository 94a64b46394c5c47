"""Contrastive auditing of behavioral differences between two language models."""
from ._core import BACKEND

__version__ = "0.1.0"
