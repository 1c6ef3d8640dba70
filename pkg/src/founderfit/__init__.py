"""Founder-idea fit evaluation: retrieval of similar founders/ideas, multi-analyst
LLM rating, and score aggregation."""

__version__ = "0.1.0"
