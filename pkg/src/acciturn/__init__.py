"""Learning canonical object pose from turntable-style SfM annotations."""

__version__ = "0.1.0"
