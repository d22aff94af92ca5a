"""Vacant-lot conversion modelling: spatial features, classifiers, experiments."""
__version__ = "0.1.0"
