"""Common object detection: metric losses, pair matching, sampling and evaluation."""

__version__ = "0.1.0"
