"""Numerical core: diagrams, algebras, channels, schemes and error bases."""
