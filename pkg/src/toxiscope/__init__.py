"""toxiscope: toxic-content detection and conversation analysis platform."""

__version__ = "0.1.0"
