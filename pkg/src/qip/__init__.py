"""Quantum feature encoding, information-gap measurement and information-preserving training."""
