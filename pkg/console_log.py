"""
Console Log Module
Timestamped console buffer shared by every module of the toolkit.
Entries go to stderr so that stdout stays free for CSV/JSON payloads.
"""
import sys
import threading
import time
from typing import List

MAX_CONSOLE_LINES = 500

console_log_buffer: List[str] = []
console_log_lock = threading.Lock()  # Lock for thread-safe access to console buffer
verbosity = 1  # 0 = errors only, 1 = info, 2 = debug

_LEVEL_RANK = {'ERROR': 0, 'WARN': 1, 'INFO': 1, 'DEBUG': 2}


def set_verbosity(level: int):
    """Set how much of the buffer is echoed to stderr."""
    global verbosity
    verbosity = max(0, int(level))


def log_to_console(message: str, level: str = 'INFO'):
    """Add a message to the console log buffer and echo it to stderr."""
    global console_log_buffer
    timestamp = time.strftime("%Y-%m-%d %H:%M:%S", time.localtime())
    log_entry = f"[{timestamp}] [{level}] {message}"
    with console_log_lock:
        console_log_buffer.append(log_entry)
        # Keep only the last MAX_CONSOLE_LINES
        if len(console_log_buffer) > MAX_CONSOLE_LINES:
            console_log_buffer = console_log_buffer[-MAX_CONSOLE_LINES:]
    if _LEVEL_RANK.get(level, 1) <= verbosity:
        print(log_entry, file=sys.stderr)


def get_console_lines(last: int = None, timestamps: bool = True) -> List[str]:
    """Return a copy of the buffered lines (optionally only the last few).

    With timestamps=False the leading "[YYYY-mm-dd HH:MM:SS] " is dropped,
    so the lines depend only on what was logged.
    """
    with console_log_lock:
        lines = list(console_log_buffer)
    if last is not None:
        lines = lines[-last:]
    if not timestamps:
        lines = [line.split("] ", 1)[1] for line in lines]
    return lines


def clear_console():
    """Empty the console buffer."""
    global console_log_buffer
    with console_log_lock:
        console_log_buffer = []
