"""Decentralized primary frequency control through a multi-terminal HVDC grid."""

__version__ = "0.1.0"
