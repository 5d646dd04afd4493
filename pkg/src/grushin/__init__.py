"""Nehari-manifold and mountain-pass solvers for the degenerate Grushin problem."""
