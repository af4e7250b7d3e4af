"""EEG motor-imagery classification from topographic map sequences."""

__version__ = "0.1.0"
