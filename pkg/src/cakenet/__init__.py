"""Cake-moisture regression with a from-scratch multilayer perceptron."""

__version__ = "0.1.0"
