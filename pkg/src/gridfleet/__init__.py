"""Column-generation vehicle scheduling for an isolated solar microgrid."""

__version__ = "0.1.0"
