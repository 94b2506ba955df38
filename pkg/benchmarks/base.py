import functools
import itertools
import sys
import timeit

from faultscope.fixtures import get_fixture


class Benchmark:
    ARGUMENTS = ()
    NUMBER = 10

    def __init__(self):
        self._fixtures = {}

    def get_fixture(self, name):
        if name not in self._fixtures:
            self._fixtures[name] = get_fixture(name)
        return self._fixtures[name]

    def get_config(self, name, **kwargs):
        "A fresh campaign config for the fixture ``name``"
        return self.get_fixture(name).config(**kwargs)

    def setup(self, **kwargs):
        pass

    def run(self, **kwargs):
        pass

    def units(self, **kwargs):
        "Work done by one call of ``run``, or None to report time only"
        return None

    def run_benchmark(self):
        group_names = [group['name'] for group in self.ARGUMENTS]
        group_values = [group['values'] for group in self.ARGUMENTS]
        for value_set in itertools.product(*group_values):
            pairs = list(zip(group_names, value_set))
            arg_string = ', '.join(['%s=%s' % (p[0], p[1]) for p in pairs])
            sys.stdout.write('Benchmark: %s... ' % arg_string)
            sys.stdout.flush()
            kwargs = dict(pairs)
            setup = functools.partial(self.setup, **kwargs)
            run = functools.partial(self.run, **kwargs)
            t = timeit.timeit(stmt=run, setup=setup, number=self.NUMBER)
            units = self.units(**kwargs)
            if units:
                sys.stdout.write('%f (%.0f/s)\n'
                                 % (t, units * self.NUMBER / t))
            else:
                sys.stdout.write('%f\n' % t)
            sys.stdout.flush()
