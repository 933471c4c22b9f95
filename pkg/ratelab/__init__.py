"""ratelab: QKD key rates under arbitrary qubit channels, channel estimation and desk-scale postprocessing."""

__version__ = "0.1.0"
