"""
Lattice Spectra - spectral analysis of two- and three-particle lattice
Schrödinger operators on a discretized 3-torus.

This package provides functionality for building the fiber operators of a
translation-invariant lattice Hamiltonian and checking its spectral structure.
It includes features for:
- Exact torus arithmetic and dual momentum grids
- Two-body bands, discrete spectra, Birman-Schwinger counts and Fredholm determinants
- Channel operators and the assembly of two-particle branches into bands
- Three-body essential spectrum, a brute-force oracle and the Faddeev operator
- A batch command-line front-end with JSON reports
"""

from typing import Final

__version__: Final[str] = "0.1.0"
