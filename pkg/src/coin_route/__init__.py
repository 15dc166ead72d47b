"""COIN routing with the Wonderful Life Utility, plus shortest-path baselines."""

__version__ = "0.1.0"
