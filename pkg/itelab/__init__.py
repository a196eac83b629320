"""Interior transmission eigenvalue toolkit."""

from itelab.click_opt.run_config import RunConfig, parse_config
from itelab.itelab import IteLab, run_command

__version__ = "1.0.0"
__all__ = ["IteLab", "RunConfig", "__version__", "parse_config", "run_command"]
