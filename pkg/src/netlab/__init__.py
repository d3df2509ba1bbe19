"""Desk-scale laboratory for moduli of continuity, tiled-cube families,
chessboard densities, separated-net generation and finite distortion
measurement."""

__version__ = "0.1.0"
