import pytest
import random
from faultscope.emulator import DEFAULT_FLASH_BASE, DEFAULT_RAM_BASE, Emulator
from faultscope.fixtures import get_fixture
from faultscope.utils import UNICORN_AVAILABLE


STACK_TOP = DEFAULT_RAM_BASE + 0x1000


def pytest_addoption(parser):
    parser.addoption('--skip-slow', action='store_true', default=False,
                     help="skip the exhaustive sweeps marked `slow`")


def pytest_configure(config):
    config.addinivalue_line('markers',
                            'slow: exhaustive sweep, skipped by --skip-slow')


def pytest_collection_modifyitems(config, items):
    if not config.getoption('--skip-slow'):
        return
    skip = pytest.mark.skip(reason='--skip-slow given')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


def skip_if_no_unicorn():
    return pytest.mark.skipif(not UNICORN_AVAILABLE,
                              reason='the unicorn extra is not installed')


def make_emulator(halfwords, profile=None, arch='v6m', registers=None,
                  base=DEFAULT_FLASH_BASE):
    """
    Helper for tests that run a few raw instructions

    Places ``halfwords`` at ``base``, points the PC at them and the SP at
    ``STACK_TOP``. ``registers`` maps register numbers to values.
    """
    emu = Emulator(arch=arch, profile=profile)
    data = b''.join(hw.to_bytes(2, 'little') for hw in halfwords)
    emu.memory.write_bytes(base, data)
    emu.pc = base
    emu.sp = STACK_TOP
    for reg, value in (registers or {}).items():
        emu.set_register(reg, value)
    return emu


@pytest.fixture()
def rng():
    return random.Random(0x5eed)


@pytest.fixture()
def straight_line():
    return get_fixture('straight-line')


@pytest.fixture()
def pin_check():
    return get_fixture('pin-check')


@pytest.fixture()
def secure_boot():
    return get_fixture('secure-boot')


@pytest.fixture()
def double_fault():
    return get_fixture('double-fault')


@pytest.fixture(scope='session')
def aes_fixture():
    return get_fixture('aes')
