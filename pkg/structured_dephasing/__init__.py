"""
Structured Dephasing Lab.

Simulates the dephasing of a polarization qubit coupled to a transverse-momentum
environment shaped by two-beam interference, and quantifies the resulting
(non-)Markovian dynamics through the trace distance.
"""

__version__ = "0.1.0"
