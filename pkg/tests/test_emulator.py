import pytest
from unittest import mock

from faultscope.decoder import LR, PC, SP, V7M, XPSR
from faultscope.emulator import (
    C_FLAG,
    DEFAULT_RAM_BASE,
    ERROR,
    EXECUTED,
    HALTED,
    HALTING_POINT,
    N_FLAG,
    PAGE_SIZE,
    T_BIT,
    TIMEOUT,
    V_FLAG,
    Z_FLAG,
    Emulator,
    add_with_carry,
    shift_with_carry,
)
from faultscope.exceptions import ConfigError, FaultError, SnapshotError
from faultscope.faults import (
    CLEAR,
    REGISTER,
    TRANSIENT,
    ConcreteFault,
    install,
)
from faultscope.utils import MASK32, sign_extend
from .conftest import STACK_TOP, make_emulator


SCRATCH = DEFAULT_RAM_BASE + 0x10

ADDS = 0x1840   # adds r0, r0, r1
SUBS = 0x1A40   # subs r0, r0, r1
ADCS = 0x4148   # adcs r0, r1
SBCS = 0x4188   # sbcs r0, r1
CMP = 0x4288    # cmp r0, r1


def flags_of(xpsr):
    return ((xpsr >> 31) & 1, (xpsr >> 30) & 1, (xpsr >> 29) & 1,
            (xpsr >> 28) & 1)


def wide_flags(a, b, carry_in, subtract):
    "N, Z, C, V of a +/- b computed with unbounded integers"
    if subtract:
        b = ~b & MASK32
    unsigned = a + b + carry_in
    result = unsigned & MASK32
    signed = sign_extend(a, 32) + sign_extend(b, 32) + carry_in
    return result, (result >> 31, int(result == 0), int(unsigned >> 32 != 0),
                    int(signed != sign_extend(result, 32)))


class TestArithmetic:
    def test_adds_wraps_to_zero(self):
        emu = make_emulator([ADDS], registers={0: 0xFFFFFFFF, 1: 1})
        assert emu.step().status == EXECUTED
        assert emu.get_register(0) == 0
        assert emu.flags['z'] == 1
        assert emu.flags['c'] == 1
        assert emu.flags['v'] == 0
        assert emu.flags['n'] == 0

    def test_adds_signed_overflow(self):
        emu = make_emulator([ADDS], registers={0: 0x7FFFFFFF, 1: 1})
        emu.step()
        assert emu.get_register(0) == 0x80000000
        assert emu.flags['n'] == 1
        assert emu.flags['v'] == 1
        assert emu.flags['c'] == 0

    def test_subs_borrow(self):
        emu = make_emulator([SUBS], registers={0: 0, 1: 1})
        emu.step()
        assert emu.get_register(0) == 0xFFFFFFFF
        assert emu.flags['n'] == 1
        assert emu.flags['c'] == 0

    def test_pc_reads_as_address_plus_four(self):
        # mov r0, pc
        emu = make_emulator([0x4678])
        emu.step()
        assert emu.get_register(0) == 0x8004
        assert emu.pc == 0x8002

    def test_bl_links(self):
        emu = make_emulator([0xF000, 0xF802])
        emu.step()
        assert emu.pc == 0x8008
        assert emu.get_register(LR) == 0x8005

    def test_reserved_xpsr_bits_survive_flag_updates(self):
        emu = make_emulator([ADDS], registers={0: 1, 1: 1})
        emu.xpsr |= 0x00000200
        emu.step()
        assert emu.xpsr & 0x00000200
        assert emu.xpsr & T_BIT

    @pytest.mark.parametrize('shift,value,amount,expected', [
        ('lsl', 0x80000001, 1, (0x00000002, 1)),
        ('lsr', 0x00000003, 1, (0x00000001, 1)),
        ('asr', 0x80000000, 4, (0xF8000000, 0)),
        ('asr', 0x80000000, 40, (0xFFFFFFFF, 1)),
        ('lsl', 0x00000001, 33, (0, 0)),
        ('ror', 0x00000001, 1, (0x80000000, 1)),
    ])
    def test_shift_with_carry(self, shift, value, amount, expected):
        assert shift_with_carry(value, shift, amount, 0) == expected

    def test_shift_by_zero_keeps_carry(self):
        assert shift_with_carry(5, 'lsr', 0, 1) == (5, 1)


class TestFlagOracle:
    @pytest.mark.slow
    def test_add_with_carry_matches_wide_arithmetic(self, rng):
        for _ in range(100000):
            a = rng.getrandbits(32)
            b = rng.getrandbits(32)
            carry = rng.getrandbits(1)
            subtract = rng.getrandbits(1)
            expected, flags = wide_flags(a, b, carry, subtract)
            y = ~b & MASK32 if subtract else b
            result, c, v = add_with_carry(a, y, carry)
            assert result == expected
            assert (c, v) == flags[2:]

    @pytest.mark.parametrize('halfword,subtract,uses_carry,writes', [
        (ADDS, False, False, True),
        (SUBS, True, False, True),
        (ADCS, False, True, True),
        (SBCS, True, True, True),
        (CMP, True, False, False),
    ])
    def test_emulated_flags(self, rng, halfword, subtract, uses_carry,
                            writes):
        for _ in range(500):
            a = rng.getrandbits(32)
            b = rng.getrandbits(32)
            carry = rng.getrandbits(1)
            emu = make_emulator([halfword], registers={0: a, 1: b})
            if carry:
                emu.xpsr |= C_FLAG
            emu.step()
            carry_in = carry if uses_carry else int(subtract)
            result, flags = wide_flags(a, b, carry_in, subtract)
            assert flags_of(emu.xpsr) == flags
            assert emu.get_register(0) == (result if writes else a)


class TestExecution:
    def test_run_until_halting_point(self):
        # movs r0, #1; movs r1, #2; b .
        emu = make_emulator([0x2001, 0x2102, 0xE7FE])
        outcome = emu.run_until({0x8004}, 100)
        assert outcome.kind == HALTING_POINT
        assert outcome.address == 0x8004
        assert outcome.executed == 2
        assert emu.instr_count == 2

    def test_self_branch_times_out(self):
        emu = make_emulator([0xE7FE])
        outcome = emu.run_until((), 1000)
        assert outcome.kind == TIMEOUT
        assert outcome.executed == 1000
        assert emu.pc == 0x8000

    def test_run_until_needs_a_budget(self):
        emu = make_emulator([0xE7FE])
        with pytest.raises(ValueError):
            emu.run_until((), 0)

    def test_store_to_flash_is_a_memory_error(self):
        # str r0, [r1]
        emu = make_emulator([0x6008], registers={1: 0x8100})
        outcome = emu.step()
        assert outcome.status == ERROR
        assert outcome.error.classification == 'MemoryError'
        assert outcome.error.address == 0x8000

    def test_unmapped_fetch(self):
        emu = make_emulator([0xBF00])
        emu.pc = 0x100
        outcome = emu.run_until((), 10)
        assert outcome.kind == 'error'
        assert outcome.classification == 'MemoryError'

    def test_bkpt_halts(self):
        emu = make_emulator([0xBE01])
        outcome = emu.step()
        assert outcome.status == HALTED

    def test_svc_is_a_hard_fault(self):
        emu = make_emulator([0xDF00])
        outcome = emu.step()
        assert outcome.status == ERROR
        assert outcome.error.classification == 'HardFault'

    def test_undefined_instruction(self):
        emu = make_emulator([0xDE00])
        outcome = emu.step()
        assert outcome.error.classification == 'Undefined'
        assert outcome.error.encoding == (0xDE00,)

    def test_unaligned_word_load(self):
        # ldr r0, [r1]
        emu = make_emulator([0x6808], registers={1: SCRATCH + 1})
        assert emu.step().error.classification == 'MemoryError'
        emu = make_emulator([0x6808], profile='stm32f407',
                            registers={1: SCRATCH + 1})
        emu.write_memory(SCRATCH, bytes.fromhex('0011223344'))
        assert emu.step().status == EXECUTED
        assert emu.get_register(0) == 0x44332211

    def test_it_block_on_v7m(self):
        # it eq; movs r0, #1
        emu = make_emulator([0xBF08, 0x2001], arch=V7M)
        emu.run_until((), 2)
        assert emu.get_register(0) == 0
        emu = make_emulator([0xBF08, 0x2001], arch=V7M)
        emu.xpsr |= Z_FLAG
        emu.run_until((), 2)
        assert emu.get_register(0) == 1
        assert emu.flags['z'] == 1

    def test_after_execute_hook(self):
        emu = make_emulator([0x2001, 0x2102])
        seen = []
        emu.hooks.add('after_execute',
                      lambda emu, address, insn: seen.append(
                          (address, insn.mnemonic)))
        emu.run_until((), 2)
        assert seen == [(0x8000, 'movs'), (0x8002, 'movs')]

    def test_register_read_hook_substitutes(self):
        emu = make_emulator([ADDS], registers={0: 1, 1: 1})
        callback = mock.Mock(side_effect=lambda emu, reg, value:
                             0 if reg == 1 else None)
        emu.hooks.add('after_register_read', callback)
        emu.step()
        assert emu.get_register(0) == 1
        assert callback.called

    def test_carry_in_goes_through_the_read_hooks(self):
        # lsls r0, r1 with r1 == 0 keeps the carry
        emu = make_emulator([0x4088], registers={0: 5, 1: 0})
        emu.xpsr |= C_FLAG
        seen = []
        emu.hooks.add('after_register_read',
                      lambda emu, reg, value: seen.append(reg))
        emu.step()
        assert XPSR in seen
        assert emu.flags['c'] == 1

    def test_transient_xpsr_fault_reaches_the_shift(self):
        emu = make_emulator([0x4088], registers={0: 5, 1: 0})
        emu.xpsr |= C_FLAG
        fault = ConcreteFault(0, REGISTER, XPSR, None, 20, TRANSIENT, CLEAR,
                              32, 0x8000)
        handle = install(fault, emu)
        emu.step()
        assert emu.get_register(0) == 5
        assert emu.flags['c'] == 0
        assert emu.xpsr & T_BIT
        assert [e.action for e in handle.events][:2] == ['inject', 'read']

    def test_kept_flags_go_through_the_read_hooks(self):
        # movs r0, #1 keeps C and V
        emu = make_emulator([0x2001])
        emu.xpsr |= C_FLAG | V_FLAG
        emu.hooks.add('after_register_read',
                      lambda emu, reg, value:
                      value & ~(C_FLAG | V_FLAG) if reg == XPSR else None)
        emu.step()
        assert flags_of(emu.xpsr) == (0, 0, 0, 0)
        assert emu.xpsr & T_BIT


    def test_hook_event_must_exist(self):
        emu = Emulator()
        with pytest.raises(ValueError):
            emu.hooks.add('on_tuesday', lambda *args: None)


class TestState:
    def test_resolve(self):
        emu = Emulator()
        emu.symbols['grant'] = 0x8010
        assert emu.resolve('grant') == 0x8010
        assert emu.resolve(0x8020) == 0x8020
        assert emu.resolve('0x8030') == 0x8030
        with pytest.raises(ConfigError):
            emu.resolve('missing')

    def test_registers_include_xpsr(self):
        emu = make_emulator([0xBF00], registers={3: 0x1234})
        registers = emu.registers()
        assert registers['r3'] == 0x1234
        assert registers['sp'] == STACK_TOP
        assert registers['xpsr'] == emu.xpsr

    def test_set_register(self):
        emu = Emulator()
        emu.set_register(PC, 0x8003)
        emu.set_register(SP, 0x20000007)
        emu.set_register(XPSR, N_FLAG | T_BIT)
        assert emu.pc == 0x8002
        assert emu.sp == 0x20000004
        assert emu.flags['n'] == 1

    def test_invalid_arch(self):
        with pytest.raises(ConfigError):
            Emulator(arch='armv8')

    def test_snapshot_restore(self):
        # movs r0, #1; str r0, [r1]
        emu = make_emulator([0x2001, 0x6008], registers={1: SCRATCH})
        before = emu.machine_state()
        snapshot = emu.snapshot()
        emu.run_until((), 2)
        assert emu.machine_state() != before
        copied = emu.restore(snapshot)
        assert emu.machine_state() == before
        assert copied == 0x14

    def test_restore_drops_newer_snapshots(self):
        emu = make_emulator([0x2001, 0x6008, 0x2002],
                            registers={1: SCRATCH})
        first = emu.snapshot()
        emu.step()
        second = emu.snapshot()
        emu.step()
        emu.restore(first)
        assert emu.instr_count == 0
        assert not second.tracker.live
        with pytest.raises(SnapshotError):
            emu.restore(second)
        assert emu.instr_count == 0

    def test_released_snapshot_cannot_be_restored(self):
        emu = make_emulator([0x2001])
        snapshot = emu.snapshot()
        emu.release(snapshot)
        with pytest.raises(SnapshotError):
            emu.restore(snapshot)

    def test_pages_are_copied_on_first_write(self):
        emu = make_emulator([0xBF00])
        emu.write_memory(STACK_TOP - 4, b'\x11\x22\x33\x44')
        snapshot = emu.snapshot()
        assert snapshot.pages == {}
        emu.write_memory(STACK_TOP - 4, b'\xaa')
        emu.write_memory(STACK_TOP - 3, b'\xbb')
        page = (STACK_TOP - 4 - DEFAULT_RAM_BASE) // PAGE_SIZE
        assert list(snapshot.pages) == [page]
        assert snapshot.tracker.touched == 1
        assert emu.restore(snapshot) == 4
        assert emu.read_memory(STACK_TOP - 4, 4) == b'\x11\x22\x33\x44'
        assert snapshot.pages == {}

    def test_nested_snapshots_keep_their_own_pages(self):
        emu = make_emulator([0xBF00])
        outer = emu.snapshot()
        emu.write_memory(SCRATCH, b'\x01')
        inner = emu.snapshot()
        emu.write_memory(SCRATCH, b'\x02')
        emu.write_memory(SCRATCH + PAGE_SIZE, b'\x03')
        assert len(outer.pages) == 2
        assert len(inner.pages) == 2
        emu.restore(inner)
        assert emu.read_memory(SCRATCH, 1) == b'\x01'
        assert emu.read_memory(SCRATCH + PAGE_SIZE, 1) == b'\x00'
        emu.restore(outer)
        assert emu.read_memory(SCRATCH, 1) == b'\x00'

    def test_restore_rolls_back_flash_patches(self):
        emu = make_emulator([0xBF00])
        snapshot = emu.snapshot()
        emu.write_memory(0x8000, b'\xfe\xe7')
        assert emu.fetch(0x8000) == 0xE7FE
        emu.restore(snapshot)
        assert emu.fetch(0x8000) == 0xBF00

    def test_release_removes_tracking(self):
        emu = make_emulator([0xBF00])
        snapshot = emu.snapshot()
        assert len(emu.hooks) == 1
        emu.release(snapshot)
        assert len(emu.hooks) == 0

    def test_clone_is_independent(self):
        emu = make_emulator([0x2001])
        other = emu.clone()
        other.step()
        assert other.get_register(0) == 1
        assert emu.get_register(0) == 0
        assert emu.instr_count == 0

    def test_clone_refuses_installed_faults(self):
        emu = make_emulator([0x2001])
        install(ConcreteFault(0, REGISTER, 0, None, 1, TRANSIENT, CLEAR, 32,
                              0x8000), emu)
        with pytest.raises(FaultError):
            emu.clone()


RAM_WORD = STACK_TOP - 0x100


class TestUndefinedBehaviorProfiles:
    @pytest.mark.parametrize('halfword', [
        0x44FF, 0x4508, 0x4778, 0x47F8, 0x4709, 0xBC00, 0xB400, 0xC800,
        0xC000, 0xC103,
    ])
    def test_default_profile_aborts(self, halfword):
        emu = make_emulator([halfword], registers={0: RAM_WORD,
                                                   1: RAM_WORD})
        outcome = emu.step()
        assert outcome.status == ERROR
        assert outcome.error.classification == 'Undefined'
        assert outcome.error.condition is not None

    @pytest.mark.parametrize('profile', ['xmc1100', 'stm32f407'])
    def test_add_pc_pc_faults(self, profile):
        emu = make_emulator([0x44FF], profile=profile)
        assert emu.step().error.classification == 'HardFault'

    @pytest.mark.parametrize('profile', ['xmc1100', 'stm32f407'])
    def test_cmp_low_registers_compares(self, profile):
        emu = make_emulator([0x4508], profile=profile,
                            registers={0: 5, 1: 5})
        assert emu.step().status == EXECUTED
        assert emu.flags['z'] == 1
        assert emu.flags['c'] == 1

    def test_bx_pc_on_xmc1100_branches_ahead(self):
        emu = make_emulator([0x4778], profile='xmc1100')
        assert emu.step().status == EXECUTED
        assert emu.pc == 0x8004
        assert emu.xpsr & T_BIT

    def test_blx_pc_on_xmc1100_links(self):
        emu = make_emulator([0x47F8], profile='xmc1100')
        emu.step()
        assert emu.pc == 0x8004
        assert emu.get_register(LR) == 0x8003

    def test_bx_pc_on_stm32f407_faults(self):
        emu = make_emulator([0x4778], profile='stm32f407')
        assert emu.step().error.classification == 'HardFault'

    def test_bx_nonzero_sbz_bits_on_xmc1100_clears_t_bit(self):
        emu = make_emulator([0x4709], profile='xmc1100',
                            registers={1: 0x8101})
        assert emu.step().status == EXECUTED
        assert emu.pc == 0x8100
        assert not emu.xpsr & T_BIT
        assert emu.step().error.classification == 'HardFault'

    def test_bx_nonzero_sbz_bits_on_stm32f407_branches(self):
        emu = make_emulator([0x4709], profile='stm32f407',
                            registers={1: 0x8101})
        emu.step()
        assert emu.pc == 0x8100
        assert emu.xpsr & T_BIT

    def test_empty_pop(self):
        emu = make_emulator([0xBC00], profile='xmc1100')
        emu.write_memory(STACK_TOP, (0x1234).to_bytes(4, 'little'))
        emu.step()
        assert emu.get_register(LR) == 0x1234
        assert emu.sp == STACK_TOP
        emu = make_emulator([0xBC00], profile='stm32f407',
                            registers={LR: 7})
        emu.step()
        assert emu.get_register(LR) == 7
        assert emu.sp == STACK_TOP

    def test_empty_push(self):
        emu = make_emulator([0xB400], profile='xmc1100',
                            registers={LR: 0xCAFE})
        emu.step()
        assert emu.read_memory(STACK_TOP, 4) == (0xCAFE).to_bytes(4, 'little')
        assert emu.sp == STACK_TOP
        emu = make_emulator([0xB400], profile='stm32f407',
                            registers={LR: 0xCAFE})
        emu.step()
        assert emu.read_memory(STACK_TOP, 4) == bytes(4)

    def test_empty_ldm(self):
        emu = make_emulator([0xC800], profile='xmc1100',
                            registers={0: RAM_WORD})
        emu.write_memory(RAM_WORD, (0xBEEF).to_bytes(4, 'little'))
        emu.step()
        assert emu.get_register(LR) == 0xBEEF
        assert emu.get_register(0) == RAM_WORD

    def test_empty_stm(self):
        emu = make_emulator([0xC000], profile='xmc1100',
                            registers={0: RAM_WORD, LR: 0xF00D})
        emu.step()
        assert emu.read_memory(RAM_WORD, 4) == (0xF00D).to_bytes(4, 'little')
        assert emu.get_register(0) == RAM_WORD + 4
        emu = make_emulator([0xC000], profile='stm32f407',
                            registers={0: RAM_WORD, LR: 0xF00D})
        emu.step()
        assert emu.get_register(0) == RAM_WORD

    @pytest.mark.parametrize('profile', ['xmc1100', 'stm32f407'])
    def test_stm_base_not_lowest_stores_current_base(self, profile):
        emu = make_emulator([0xC103], profile=profile,
                            registers={0: 0x11, 1: RAM_WORD})
        emu.step()
        assert emu.read_memory(RAM_WORD, 8) == \
            (0x11).to_bytes(4, 'little') + RAM_WORD.to_bytes(4, 'little')
        assert emu.get_register(1) == RAM_WORD + 8

    def test_overflow_flag_constant(self):
        assert V_FLAG == 1 << 28
