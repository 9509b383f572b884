import functools
import platform
import sys
import traceback
from pathlib import Path

import numpy as np
import scipy

from .constants import ERROR_LOG_NAME


# Directory receiving the error log; set once the output dir is resolved.
LOG_DIR = None


def set_log_dir(path):
    global LOG_DIR
    LOG_DIR = None if path is None else Path(path)
    return LOG_DIR


# Returns a string containing the platform, Python, numpy and scipy versions.
def get_system_info():
    info = (
        "\n"
        "System Information:\n"
        f" Platform: {platform.platform()}\n"
        f" Python version: {platform.python_version()}\n"
        f" numpy version: {np.__version__}\n"
        f" scipy version: {scipy.__version__}\n"
    )
    return info

# Decorator to wrap the command line entry point with error logging.
# If the wrapped function raises an exception, the error is logged (with system info)
# under the output directory when one is known, printed to the terminal, and the
# process exits with status 1.
def health_check_decorator(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception:
            system_info = get_system_info()
            error_trace = traceback.format_exc()
            print("ERROR: Command failed. Details:", file=sys.stderr)
            print(system_info, file=sys.stderr)
            print(error_trace, file=sys.stderr)
            if LOG_DIR is not None:
                try:
                    LOG_DIR.mkdir(parents=True, exist_ok=True)
                    log_path = LOG_DIR / ERROR_LOG_NAME
                    with open(log_path, "w") as log_file:
                        log_file.write("An unhandled exception occurred:\n")
                        log_file.write(system_info)
                        log_file.write(error_trace)
                    print(f"Error log saved at: {log_path}", file=sys.stderr, flush=True)
                except OSError as e:
                    print("Warning: Could not write error log:", e, file=sys.stderr)
            sys.exit(1)
    return wrapper
