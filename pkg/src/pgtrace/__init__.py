"""Deterministic CPU path tracer with screen-space per-pixel mixture
guiding, trained online over virtual point lights."""

__version__ = "0.1.0"
