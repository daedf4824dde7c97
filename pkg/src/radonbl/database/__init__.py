"""radonbl run ledger."""
