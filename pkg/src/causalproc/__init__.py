"""Process matrices, quantum/classical control of causal order, and SDP
membership checks."""

__version__ = "0.1.0"
