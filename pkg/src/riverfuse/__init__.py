"""Fuse satellite vessel detections with AIS tracks on inland waterways."""

__version__ = "0.1.0"
