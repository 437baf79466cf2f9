"""Physics-guided neural network feedforward for hybrid stepper motors."""

__version__ = "0.1.0"
