"""Rate-distortion evaluation of generative decoders.

Estimates rate-distortion curves for decoder-based generative models with
annealed importance sampling over a beta-scaled posterior family, and ships
two independent oracles (a closed-form linear-Gaussian solution and low
dimensional quadrature) plus bidirectional sandwich bounds for validation.
"""

__version__ = "0.1.0"
