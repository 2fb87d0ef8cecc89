"""Replicated statistical experiments."""
