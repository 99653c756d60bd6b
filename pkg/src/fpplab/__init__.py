"""fpplab: first passage percolation on augmented Delaunay random graphs."""

__version__ = "0.1.0"
