"""Report writer test cases."""
