"""Solver library for packing and covering semidefinite programs."""
