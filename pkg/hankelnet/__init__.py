"""
hankelnet - randomized digital nets for quasi-Monte Carlo integration
"""

__version__ = "1.0.0"
