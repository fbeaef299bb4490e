from .benchmark import cmd_benchmark
from .compare import cmd_compare
from .oracle import cmd_oracle_check
from .robustness import cmd_ci, cmd_stability
from .score import cmd_score

COMMANDS = {
    "score": cmd_score,
    "compare": cmd_compare,
    "stability": cmd_stability,
    "ci": cmd_ci,
    "oracle-check": cmd_oracle_check,
    "benchmark": cmd_benchmark,
}
