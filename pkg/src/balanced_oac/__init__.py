"""Over-the-air gradient aggregation with balanced number systems."""

from .numerals import (
    CodecConfig,
    DomainError,
    InvalidConfigError,
    average_numerals,
    counts_from_numerals,
    decode,
    encode,
    quantize,
    symbol_set,
)
from .phy import PhyConfig

__version__ = "0.1.0"
