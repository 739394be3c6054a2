"""
CLI UI components for schwarz-adjoint

Messages go to stderr so CSV written to stdout stays machine-readable.
"""

import sys
import time
from enum import Enum
from typing import Optional, TextIO

from schwarz_adjoint.models import ErrorReport, Recommendation


class LogLevel(Enum):
    DEBUG = "debug"
    INFO = "info"
    SUCCESS = "success"
    WARNING = "warning"
    ERROR = "error"


class Colors:
    """ANSI color codes for terminal output"""

    RESET = "\033[0m"
    BOLD = "\033[1m"
    DIM = "\033[2m"

    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    BLUE = "\033[34m"
    CYAN = "\033[36m"


class ProgressBar:
    """Simple progress bar for table sweeps"""

    def __init__(self, total: int, width: int = 40, stream: Optional[TextIO] = None):
        self.total = total
        self.current = 0
        self.width = width
        self.stream = stream
        self.start_time = time.time()

    def update(self, amount: int = 1):
        self.current = min(self.current + amount, self.total)
        self._draw()

    def _draw(self):
        stream = self.stream or sys.stderr
        percent = 100.0 if self.total == 0 else (self.current / self.total) * 100
        filled = self.width if self.total == 0 else int(self.width * self.current // self.total)
        bar = "#" * filled + "-" * (self.width - filled)
        elapsed = time.time() - self.start_time
        stream.write(
            f"\r{Colors.CYAN}[{bar}]{Colors.RESET} {percent:6.1f}% ({self.current}/{self.total}) {elapsed:.1f}s"
        )
        stream.flush()

    def finish(self):
        self.current = self.total
        self._draw()
        (self.stream or sys.stderr).write("\n")


class ModernCLI:
    """Terminal presentation for experiment runs"""

    def __init__(self, verbose: bool = False, stream: Optional[TextIO] = None):
        self.verbose = verbose
        self.stream = stream
        self.current_step = 0
        self.total_steps = 0

    def _print(self, text: str):
        print(text, file=self.stream or sys.stderr)

    def set_total_steps(self, total: int):
        self.total_steps = total
        self.current_step = 0

    def step(self, title: str):
        """Move to next step"""
        self.current_step += 1
        if self.total_steps > 0:
            progress = f"({self.current_step}/{self.total_steps})"
        else:
            progress = f"({self.current_step})"
        self._print(f"{Colors.BOLD}{Colors.BLUE}> Step {progress}: {title}{Colors.RESET}")

    def log(self, level: LogLevel, message: str, details: Optional[str] = None):
        """Log a message with appropriate styling"""
        if level == LogLevel.DEBUG and not self.verbose:
            return
        icon, color = self._get_log_style(level)
        self._print(f"{color}{icon} {message}{Colors.RESET}")
        if details and (self.verbose or level in [LogLevel.ERROR, LogLevel.WARNING]):
            for line in details.split("\n"):
                if line.strip():
                    self._print(f"  {Colors.DIM}{line}{Colors.RESET}")

    def _get_log_style(self, level: LogLevel) -> tuple[str, str]:
        styles = {
            LogLevel.DEBUG: ("..", Colors.DIM),
            LogLevel.INFO: ("i", Colors.BLUE),
            LogLevel.SUCCESS: ("ok", Colors.GREEN),
            LogLevel.WARNING: ("!", Colors.YELLOW),
            LogLevel.ERROR: ("x", Colors.RED),
        }
        return styles.get(level, ("*", Colors.RESET))

    def success(self, message: str, details: Optional[str] = None):
        self.log(LogLevel.SUCCESS, message, details)

    def info(self, message: str, details: Optional[str] = None):
        self.log(LogLevel.INFO, message, details)

    def warning(self, message: str, details: Optional[str] = None):
        self.log(LogLevel.WARNING, message, details)

    def error(self, message: str, details: Optional[str] = None):
        self.log(LogLevel.ERROR, message, details)

    def debug(self, message: str, details: Optional[str] = None):
        self.log(LogLevel.DEBUG, message, details)

    def show_report(self, report: ErrorReport, title: str = "Error estimate"):
        """Show the split of the QoI error"""
        self._print(f"{Colors.BOLD}{Colors.GREEN}{title}{Colors.RESET}")
        rows = [
            ("total", report.eta_total, report.ref_total_err, report.gamma),
            ("discretization", report.eta_disc, report.ref_disc_err, report.gamma_D),
            ("iteration", report.eta_iter, report.ref_iter_err, None),
        ]
        for name, estimate, reference, ratio in rows:
            line = f"  {Colors.CYAN}*{Colors.RESET} {name:<15} {estimate: .3e}"
            if reference is not None:
                line += f"   reference {reference: .3e}"
            if ratio is not None:
                line += f"   ratio {ratio:.3f}"
            self._print(line)
        if len(report.S) > 1:
            parts = ", ".join(f"S_{i}={s:.2e}" for i, s in enumerate(report.S, start=1))
            self._print(f"  {Colors.CYAN}*{Colors.RESET} subdomains      {parts}")

    def show_recommendation(self, rec: Recommendation):
        if rec.action == "refine_subdomain":
            self.info(
                f"Refine subdomain {rec.target}: S_{rec.target}={rec.current:.2e}, expected about {rec.predicted:.2e} after refinement"
            )
        elif rec.action == "increase_overlap":
            self.info(f"Increase overlap to beta={rec.new_beta:g}", rec.reason)
        else:
            self.info("No further action needed", rec.reason)

    def create_progress_bar(self, total: int) -> ProgressBar:
        return ProgressBar(total, stream=self.stream)


# Global CLI instance
ui = ModernCLI()


def set_verbose(verbose: bool):
    """Set verbose mode globally"""
    global ui
    ui.verbose = verbose
