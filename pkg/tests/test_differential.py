"""
Random ARMv6-M instructions executed by faultscope and by unicorn must leave
the same low registers, flags and memory behind.
"""
import pytest

from faultscope.emulator import DEFAULT_FLASH_BASE, DEFAULT_RAM_BASE
from faultscope.utils import UNICORN_AVAILABLE
from .conftest import STACK_TOP, make_emulator, skip_if_no_unicorn

if UNICORN_AVAILABLE:
    from unicorn import UC_ARCH_ARM, UC_MODE_MCLASS, UC_MODE_THUMB, Uc
    from unicorn import arm_const


# cmp r6, r7: gives both emulators the same random flags
FLAG_PROLOGUE = 0x42BE

WINDOW = 0x100
CODE_SIZE = 0x20000
RAM_SIZE = 0x10000


def shift_immediate(rng):
    op = rng.choice((0, 1, 2))
    return (op << 11) | (rng.getrandbits(5) << 6) | (rng.getrandbits(3) << 3) \
        | rng.getrandbits(3)


def add_subtract(rng):
    return (0b00011 << 11) | (rng.getrandbits(2) << 9) | \
        (rng.getrandbits(3) << 6) | (rng.getrandbits(3) << 3) | \
        rng.getrandbits(3)


def immediate8(rng):
    return (0b001 << 13) | (rng.getrandbits(2) << 11) | \
        (rng.getrandbits(3) << 8) | rng.getrandbits(8)


def data_processing(rng):
    return (0b010000 << 10) | (rng.getrandbits(4) << 6) | \
        (rng.getrandbits(3) << 3) | rng.getrandbits(3)


def extend(rng):
    return 0xB200 | (rng.getrandbits(2) << 6) | (rng.getrandbits(3) << 3) | \
        rng.getrandbits(3)


def reverse(rng):
    return 0xBA00 | (rng.choice((0, 1, 3)) << 6) | \
        (rng.getrandbits(3) << 3) | rng.getrandbits(3)


ALU_CLASSES = (shift_immediate, add_subtract, immediate8, data_processing,
               extend, reverse)

# str, ldr, strb, ldrb, strh and ldrh with an immediate offset
MEMORY_OPCODES = (0b01100, 0b01101, 0b01110, 0b01111, 0b10000, 0b10001)


class Reference:
    """
    A unicorn Cortex-M with the same memory map. Every case gets fresh code
    addresses so no translated block is reused.
    """

    def __init__(self):
        self.uc = Uc(UC_ARCH_ARM, UC_MODE_THUMB | UC_MODE_MCLASS)
        self.uc.mem_map(DEFAULT_FLASH_BASE, CODE_SIZE)
        self.uc.mem_map(DEFAULT_RAM_BASE, RAM_SIZE)
        self.low = [getattr(arm_const, 'UC_ARM_REG_R%d' % i)
                    for i in range(8)]
        self.status = getattr(arm_const, 'UC_ARM_REG_XPSR',
                              arm_const.UC_ARM_REG_CPSR)
        self.next_address = DEFAULT_FLASH_BASE

    def allocate(self, halfwords):
        address = self.next_address
        self.next_address += 2 * len(halfwords)
        assert self.next_address <= DEFAULT_FLASH_BASE + CODE_SIZE
        return address

    def run(self, address, halfwords, registers, ram):
        uc = self.uc
        code = b''.join(hw.to_bytes(2, 'little') for hw in halfwords)
        uc.mem_write(address, code)
        uc.mem_write(DEFAULT_RAM_BASE, ram)
        for reg, value in registers.items():
            uc.reg_write(self.low[reg], value)
        uc.reg_write(arm_const.UC_ARM_REG_SP, STACK_TOP)
        uc.emu_start(address | 1, DEFAULT_FLASH_BASE + CODE_SIZE,
                     count=len(halfwords))
        return ([uc.reg_read(reg) & 0xFFFFFFFF for reg in self.low],
                uc.reg_read(self.status) >> 28 & 0xF,
                bytes(uc.mem_read(DEFAULT_RAM_BASE, WINDOW)))


def run_faultscope(address, halfwords, registers, ram):
    emu = make_emulator(halfwords, registers=registers, base=address)
    emu.memory.write_bytes(DEFAULT_RAM_BASE, ram)
    for _ in halfwords:
        outcome = emu.step()
        assert outcome.error is None, (halfwords, outcome)
    return (list(emu.regs[:8]), emu.xpsr >> 28,
            emu.read_memory(DEFAULT_RAM_BASE, WINDOW))


def random_context(rng):
    registers = dict((i, rng.getrandbits(32)) for i in range(8))
    ram = bytes(rng.getrandbits(8) for _ in range(WINDOW))
    return registers, ram


def memory_case(rng):
    opcode = rng.choice(MEMORY_OPCODES)
    base = rng.randrange(8)
    target = rng.randrange(8)
    offset = rng.getrandbits(5)
    registers, ram = random_context(rng)
    # keep base + offset inside the compared window
    registers[base] = DEFAULT_RAM_BASE + rng.randrange(0, WINDOW - 128, 4)
    instruction = (opcode << 11) | (offset << 6) | (base << 3) | target
    return instruction, registers, ram


def compare(reference, instruction, registers, ram):
    halfwords = [FLAG_PROLOGUE, instruction]
    address = reference.allocate(halfwords)
    expected = reference.run(address, halfwords, registers, ram)
    got = run_faultscope(address, halfwords, registers, ram)
    assert got == expected, '%04x with %r' % (instruction, registers)


@pytest.fixture(scope='module')
def reference():
    return Reference()


@skip_if_no_unicorn()
class TestDifferential:
    @pytest.mark.parametrize('generate', ALU_CLASSES,
                             ids=[f.__name__ for f in ALU_CLASSES])
    def test_alu_class(self, reference, rng, generate):
        for _ in range(200):
            registers, ram = random_context(rng)
            compare(reference, generate(rng), registers, ram)

    def test_loads_and_stores(self, reference, rng):
        for _ in range(300):
            compare(reference, *memory_case(rng))

    @pytest.mark.slow
    def test_ten_thousand_instructions(self, reference, rng):
        for _ in range(10000):
            if rng.random() < 0.2:
                compare(reference, *memory_case(rng))
            else:
                registers, ram = random_context(rng)
                compare(reference, rng.choice(ALU_CLASSES)(rng), registers,
                        ram)
