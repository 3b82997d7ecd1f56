"""
rnweights - Radon-Nikodym derivatives of weights on finite-dimensional
von Neumann algebras, plus a discretized Weyl-pair testbed.
"""

__version__ = '1.0.0'
