"""Keyword spotting toolkit: biased CTC prefix beam search, multi-stage
keyword matching, CTC confidence scoring, and F1/ATWV evaluation over
synthetic or externally produced posteriorgrams."""

__version__ = "0.1.0"
