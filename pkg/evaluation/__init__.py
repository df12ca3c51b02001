"""Grounding, step-error, retrieval and text-alignment metrics."""
