"Instructions per second of the emulator on the case-study fixtures"
from base import Benchmark


class EmulatorThroughputBenchmark(Benchmark):

    ARGUMENTS = (
        {
            'name': 'fixture',
            'values': ['pin-check', 'secure-boot', 'aes']
        },
        {
            'name': 'snapshot',
            'values': [False, True]
        },
    )

    def setup(self, fixture, snapshot):
        self.emu = self.get_fixture(fixture).load(start=False)
        self.snapshot = self.emu.snapshot()
        self.budget = 100000
        self.executed = self.emu.clone().run_until(
            (), self.budget).executed

    def run(self, fixture, snapshot):
        if snapshot:
            self.emu.restore(self.snapshot)
            emu = self.emu
        else:
            emu = self.get_fixture(fixture).load(start=False)
        emu.run_until((), self.budget)

    def units(self, fixture, snapshot):
        return self.executed


if __name__ == '__main__':
    EmulatorThroughputBenchmark().run_benchmark()
