"""
Scan Manager Module
Runs independent scan rows on background worker threads and hands the
results back in submission order.
"""
import os
import sys
import threading
from queue import Empty, Queue
from typing import Any, Callable, Dict, List, Optional, Sequence

from tqdm import tqdm

import console_log
from console_log import log_to_console

THREADS_ENV = 'TORUS_STRI_THREADS'


def thread_budget(requested: int = 1) -> int:
    """min(TORUS_STRI_THREADS, requested), at least 1."""
    env = os.environ.get(THREADS_ENV)
    cap = requested
    if env:
        try:
            cap = min(requested, int(env))
        except ValueError:
            log_to_console(f"ignoring non-integer {THREADS_ENV}={env!r}", 'WARN')
    return max(1, cap)


class ScanManager:
    """
    Background worker pool for pure row jobs.
    """

    def __init__(self, threads: int = 1):
        """
        Initialize the scan manager.

        Args:
            threads: Number of worker threads
        """
        self.threads = max(1, threads)
        self.results: Dict[int, Any] = {}
        self.errors: Dict[int, BaseException] = {}
        self.lock = threading.Lock()
        self.running = False
        self.workers: List[threading.Thread] = []
        self.request_queue: Queue = Queue()
        self.submitted = 0

    def start(self):
        """Start the worker threads."""
        if not self.running:
            self.running = True
            for _ in range(self.threads):
                worker = threading.Thread(target=self._worker_loop, daemon=True)
                worker.start()
                self.workers.append(worker)
            log_to_console(f"[ScanManager] Started {self.threads} worker thread(s)", 'DEBUG')

    def stop(self):
        """Stop the worker threads."""
        if self.running:
            self.running = False
            for worker in self.workers:
                if worker.is_alive():
                    worker.join(timeout=2.0)
            self.workers = []
            log_to_console("[ScanManager] Workers stopped", 'DEBUG')

    def _worker_loop(self):
        while self.running:
            try:
                index, job, arg = self.request_queue.get(timeout=0.1)
            except Empty:
                continue
            try:
                result = job(arg)
                with self.lock:
                    self.results[index] = result
            except BaseException as e:  # re-raised in collect()
                with self.lock:
                    self.errors[index] = e
            finally:
                self.request_queue.task_done()

    def submit(self, job: Callable[[Any], Any], arg: Any) -> int:
        """Queue one row; returns its submission index."""
        index = self.submitted
        self.submitted += 1
        self.request_queue.put((index, job, arg))
        return index

    def done_count(self) -> int:
        with self.lock:
            return len(self.results) + len(self.errors)

    def collect(self) -> List[Any]:
        """Wait for every submitted row and return results in submission order."""
        self.request_queue.join()
        with self.lock:
            if self.errors:
                first = min(self.errors)
                raise self.errors[first]
            return [self.results[i] for i in range(self.submitted)]


def run_scan(job: Callable[[Any], Any], args: Sequence[Any], threads: int = 1,
             desc: Optional[str] = None) -> List[Any]:
    """Evaluate job over args; the output order never depends on the thread count."""
    threads = thread_budget(threads)
    show = console_log.verbosity >= 1 and len(args) > 1
    if threads == 1:
        return [job(arg) for arg in tqdm(args, desc=desc, file=sys.stderr, disable=not show)]
    manager = ScanManager(threads)
    manager.start()
    try:
        for arg in args:
            manager.submit(job, arg)
        return manager.collect()
    finally:
        manager.stop()
