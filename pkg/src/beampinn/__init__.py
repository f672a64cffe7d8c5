"""Physics-informed neural training for a moving load on a simply supported beam."""

__version__ = "0.1.0"
