import logging
from concurrent.futures import ThreadPoolExecutor

# Get the logger configured in settings.py
logger = logging.getLogger('distributed')


class RegionPoolMixin:
    """
    A mixin for distributed runners to dispatch per-region work.

    Work items are submitted to a thread pool sized by `threads`; results
    are always returned in region order so every reduction done by the
    coordinator is reproducible at a fixed thread count. numpy/LAPACK
    release the GIL, so the local factorizations overlap in practice.
    """
    threads = 1

    def map_regions(self, func, *iterables):
        """
        Applies func to every region's arguments, returning results in order.
        """
        if self.threads <= 1:
            return [func(*args) for args in zip(*iterables)]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = [pool.submit(func, *args) for args in zip(*iterables)]
            # Collect in submission order; the first failure propagates.
            return [future.result() for future in futures]

    def log_iteration(self, row):
        logger.info(
            f"{self.algorithm} it={row['iteration']} "
            f"consensus={row['consensus_violation']:.3e} dual={row['dual_residual']:.3e} "
            f"objective={row['objective']:.6f}"
        )
