"""Synthesize robot demonstration datasets by replaying DMP-encoded subtask segments."""

__version__ = "0.1.0"
