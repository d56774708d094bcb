"""Gaze-supervised attention network for video captioning."""

__version__ = "0.1.0"
