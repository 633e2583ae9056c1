"""compshare: share component compositions across a peer group."""

__version__ = "0.1.0"
