"""
CSS-LDPC key reconciliation simulator for the classical phase of BB84.
"""
from . import coding
from . import services
from . import utils

__version__ = "0.1.0"
