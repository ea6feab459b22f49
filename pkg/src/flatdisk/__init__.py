"""Flat disks: billiards, unfolding and invariant translation surfaces."""

__all__ = [
    "bkm",
    "billiard",
    "cli",
    "config",
    "disk",
    "geometry",
    "server",
    "surface",
    "unfolding",
]

__version__ = "0.1.0"
