"""
fhe-regress - fixed-Hessian regression trainers with a CKKS-semantics ciphertext simulator
"""

__version__ = "0.1.0"
