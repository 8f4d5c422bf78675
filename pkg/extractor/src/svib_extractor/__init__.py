"""Attention-feature and token-likelihood extraction from causal LMs."""

from .capture import Extractor, ExtractorConfig, featurize, mean_heads
from .formats import read_feature_file, write_feature_file

__version__ = "0.1.0"
