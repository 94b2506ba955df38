"""
Runs per second of whole campaigns: snapshot against naive restarts, and
the thread and process backends over a range of worker counts.
"""
from base import Benchmark

from faultscope.campaign import run_campaign


class CampaignThroughputBenchmark(Benchmark):
    NUMBER = 1

    ARGUMENTS = (
        {
            'name': 'fixture',
            'values': ['straight-line', 'pin-check']
        },
        {
            'name': 'naive',
            'values': [False, True]
        },
        {
            'name': 'backend',
            'values': ['thread', 'process']
        },
        {
            'name': 'workers',
            'values': [1, 2, 4]
        },
    )

    def setup(self, fixture, naive, backend, workers):
        self.config = self.get_config(fixture, models='standard',
                                      backend=backend, workers=workers)
        self.runs = 0

    def run(self, fixture, naive, backend, workers):
        report = run_campaign(self.config, naive=naive)
        self.runs = report.counters['runs_executed']

    def units(self, fixture, naive, backend, workers):
        return self.runs


if __name__ == '__main__':
    CampaignThroughputBenchmark().run_benchmark()
