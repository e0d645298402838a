"""Edge resource provisioning and safe-speed analysis for edge-assisted AVs."""

__version__ = "0.1.0"
