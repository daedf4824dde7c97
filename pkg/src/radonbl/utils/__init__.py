"""radonbl utility functions."""
