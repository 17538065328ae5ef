"""Entity-aware table retrieval and cell-level question answering."""

__version__ = "0.1.0"
