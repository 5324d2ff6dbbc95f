"""Variational toolkit for three-component critical Schroedinger systems with Hardy potentials."""

__version__ = "0.1.0"
