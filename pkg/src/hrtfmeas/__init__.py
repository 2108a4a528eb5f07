"""Continuous HRTF measurement toolkit.

Synthesizes rigid-sphere ground truth, simulates noisy rotating-subject
measurements, identifies the time-variant responses with NLMS / Kalman
baselines and a segmented EM-learned Kalman smoother, and scores everything
with system-distance metrics.  A FastAPI service wraps the library; the CLI
is a thin client of that service.
"""

__version__ = "0.1.0"
