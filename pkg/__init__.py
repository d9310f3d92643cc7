"""coherent-loops - Coherent Loop States and Wigner d-Matrix Asymptotics

A numerical toolkit for SU(2) coherent states on the sphere, the coherent
states of Bohr-Sommerfeld loops, and the complex stationary-phase
approximations of their inner products, checked against exact Wigner
d-matrices and dense quadrature.
"""

__version__ = "0.3.0"
__license__ = "MIT"
