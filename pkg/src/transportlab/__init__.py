"""transportlab: a numerical laboratory for transport equations with rough
drift, mollification commutators, and noise-driven uniqueness experiments."""

__version__ = "0.1.0"
