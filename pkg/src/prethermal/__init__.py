"""Numerical laboratory for emergent charge conservation in strongly driven
spin lattices: exact operator arithmetic, colored-potential calculus, frame
renormalization engines, and dynamics verification."""

__version__ = "0.1.0"
