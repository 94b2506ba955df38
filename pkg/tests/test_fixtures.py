import pytest

from faultscope.crypto import Sha256Reference
from faultscope.emulator import HALTING_POINT
from faultscope.exceptions import ConfigError
from faultscope.fixtures import (
    FIRMWARE,
    FIXTURES,
    PIN,
    get_fixture,
    pin_check as build_pin_check,
    secure_boot as build_secure_boot,
)


def run_to(fixture, *symbols):
    emu = fixture.load()
    outcome = emu.run_until([fixture.address(s) for s in symbols],
                            fixture.timeout)
    assert outcome.kind == HALTING_POINT
    return emu, outcome


class TestFaultFreeRuns:
    def test_straight_line(self, straight_line):
        emu, outcome = run_to(straight_line, 'done')
        assert outcome.executed == 5
        assert emu.read_memory(emu.resolve('result'), 4) == \
            (3).to_bytes(4, 'little')

    def test_pin_check_denies_a_wrong_pin(self, pin_check):
        _, outcome = run_to(pin_check, 'grant', 'deny')
        assert outcome.address == pin_check.address('deny')

    def test_pin_check_grants_the_right_pin(self):
        fixture = build_pin_check(entered=PIN)
        emu, outcome = run_to(fixture, 'grant', 'deny')
        assert outcome.address == fixture.address('grant')

    def test_secure_boot_reports_an_error(self, secure_boot):
        emu, outcome = run_to(secure_boot, 'execute_firmware',
                              'report_error')
        assert outcome.address == secure_boot.address('report_error')
        assert emu.regs[0] == 1
        assert emu.read_memory(emu.resolve('digest'), 32) == \
            Sha256Reference().unpadded_digest(FIRMWARE)

    def test_secure_boot_hashes_on_the_target(self, rng):
        firmware = bytes(rng.getrandbits(8) for _ in range(128))
        fixture = build_secure_boot(firmware)
        emu, outcome = run_to(fixture, 'execute_firmware', 'report_error')
        assert emu.read_memory(emu.resolve('digest'), 32) == \
            Sha256Reference().unpadded_digest(firmware)
        assert outcome.executed > 5000
        assert outcome.executed < fixture.timeout

    def test_secure_boot_firmware_size(self):
        with pytest.raises(ConfigError):
            build_secure_boot(bytes(64))

    def test_double_fault_denies(self, double_fault):
        emu, outcome = run_to(double_fault, 'grant', 'deny')
        assert outcome.address == double_fault.address('deny')
        assert emu.regs[3] == double_fault.address('table')

    def test_aes_start_point(self, aes_fixture):
        emu = aes_fixture.load()
        assert emu.pc == aes_fixture.address('round_loop')
        assert emu.regs[6] == 8


class TestRegistry:
    def test_names(self):
        assert sorted(FIXTURES) == ['aes', 'double-fault', 'pin-check',
                                    'secure-boot', 'straight-line']

    def test_unknown(self):
        with pytest.raises(ConfigError) as e:
            get_fixture('blinky')
        assert 'straight-line' in str(e.value)

    def test_configs_are_independent(self, straight_line):
        first = straight_line.config()
        second = straight_line.config()
        assert first.oracle is not second.oracle
        assert first.emulator is not second.emulator

    def test_double_fault_models(self, double_fault):
        config = double_fault.config()
        assert [m.id for m in config.models] == ['redirect', 'offset']
