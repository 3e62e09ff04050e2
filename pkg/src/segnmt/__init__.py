"""Segmentation-based neural machine translation at desk scale.

Small GRU encoder-decoder models, bidirectional confidence scoring of
sub-phrases, optimal sentence segmentation by dynamic programming, and an
experiment harness for control studies on a synthetic toy language.
"""

__version__ = "0.1.0"
