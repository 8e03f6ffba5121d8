import threading
import time

from django.test import SimpleTestCase

from .exceptions import CaseFileError, OpfError, SubproblemError
from .mixins import RegionPoolMixin


class Pool(RegionPoolMixin):
    algorithm = 'pool'

    def __init__(self, threads):
        self.threads = threads


class ExceptionTests(SimpleTestCase):

    def test_case_file_error_keeps_location(self):
        """
        The nested detail survives and the message starts with the path.
        """
        error = CaseFileError({'tie_lines': {0: {'ac_bus': ["Unknown bus."]}}}, 'cases/x.json')
        self.assertIsInstance(error, OpfError)
        self.assertIn('ac_bus', error.detail['tie_lines'][0])
        self.assertTrue(str(error).startswith('cases/x.json: '))

    def test_subproblem_error_message(self):
        """
        Without a solution the status reads 'unknown'.
        """
        error = SubproblemError('ac2')
        self.assertEqual(error.region_id, 'ac2')
        self.assertIn("'unknown'", str(error))


class RegionPoolTests(SimpleTestCase):

    def test_results_follow_region_order(self):
        """
        Results come back in submission order even when later work finishes first.
        """
        def work(index, delay):
            time.sleep(delay)
            return index

        delays = [0.05, 0.03, 0.01, 0.0]
        for threads in (1, 4):
            self.assertEqual(Pool(threads).map_regions(work, range(4), delays), [0, 1, 2, 3])

    def test_work_runs_on_worker_threads(self):
        """
        With several threads the work leaves the calling thread.
        """
        caller = threading.get_ident()
        idents = Pool(3).map_regions(lambda _: threading.get_ident(), range(3))
        self.assertNotIn(caller, idents)

    def test_failure_propagates(self):
        """
        The first failing region's exception reaches the caller.
        """
        def work(index):
            if index == 2:
                raise SubproblemError(f'ac{index}')
            return index

        with self.assertRaises(SubproblemError):
            Pool(2).map_regions(work, range(4))
