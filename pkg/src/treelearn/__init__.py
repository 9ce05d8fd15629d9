"""Learning definable node classifiers on labeled trees."""

__version__ = "0.1.0"
