"""radonbl numerical core."""
