"""IteLab tests."""

import sys

sys.path.append(".")
