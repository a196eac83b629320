"""Click tests."""
