"""Command orchestration test cases."""
