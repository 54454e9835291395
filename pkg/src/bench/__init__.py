"""Synthetic corpora, scaling experiments, reports and benchmark history."""
