"""
milkit: a deep multiple instance learning toolkit
"""

from milkit.config import settings

__version__ = settings.version
