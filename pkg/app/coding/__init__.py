"""
GF(2) algebra, code construction, CSS pairs and decoders.
"""
from .gf2 import BinMatrix, DimensionMismatch
from .construct import ConstructionError, LdpcCode, build_base, apply_mask, load_mask, efficient_encode
from .css import CssPair, KeyMap, CssConstructionError, build_css, make_key_map, coset_equal
from .decoders import DecodeResult, DecoderSetupError

__all__ = [
    'BinMatrix', 'DimensionMismatch',
    'ConstructionError', 'LdpcCode', 'build_base', 'apply_mask', 'load_mask', 'efficient_encode',
    'CssPair', 'KeyMap', 'CssConstructionError', 'build_css', 'make_key_map', 'coset_equal',
    'DecodeResult', 'DecoderSetupError',
]
