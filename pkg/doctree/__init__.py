"""Document hierarchy inference: RWR path sampling with per-node topics."""

__version__ = "0.4.0"
