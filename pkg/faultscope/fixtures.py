"""
Small firmware images that exercise the simulator.

Each fixture is assembled with :py:mod:`faultscope.testkit` when it is
requested, so the images are byte-exact and need no external toolchain.

``straight-line``
    Five ALU and memory instructions storing one word of output.
``pin-check``
    A four-digit PIN comparison loop guarding a grant branch.
``secure-boot``
    A bootloader that hashes a 128-byte firmware with an unpadded SHA-256
    on the target and compares the digest with the one stored in flash.
    The digests never match, so the fault-free run always ends in
    ``report_error``.
``double-fault``
    A grant that needs two faults: ``mov r2, sp`` turned into ``mov pc,
    pc`` skips a ``b deny``, and a corrupted load offset then picks the
    magic byte of a table.
``aes``
    AES-128 encryption of one block with precomputed round keys.
    ``round_loop`` is reached once per round; its 8th arrival is the state
    entering round 8.
"""
from faultscope.campaign import CampaignConfig
from faultscope.config import advance_to
from faultscope.crypto import (
    SBOX,
    SHA256_H,
    SHA256_K,
    Sha256Reference,
    expand_key,
)
from faultscope.decoder import V6M
from faultscope.emulator import DEFAULT_RAM_BASE
from faultscope.exceptions import ConfigError
from faultscope.faults import (
    BIT_FLIP,
    BYTE_SET,
    INSTRUCTION,
    TRANSIENT,
    FaultModelSpec,
    InstructionFilter,
)
from faultscope.testkit import assemble


AES_KEY = bytes(range(16))
AES_PLAINTEXT = bytes.fromhex('00112233445566778899aabbccddeeff')
AES_CIPHERTEXT = bytes.fromhex('69c4e0d86a7b0430d8cdb78070b4c55a')

PIN = bytes((1, 2, 3, 4))
ENTERED_PIN = bytes((1, 2, 3, 5))

FIRMWARE = bytes((i * 7 + 3) & 0xFF for i in range(128))
SECURE_BOOT_DIGEST = DEFAULT_RAM_BASE + 0x100


def _byte_lines(data, per_line=16):
    return '\n'.join(
        '    .byte ' + ', '.join('0x%02x' % b for b in data[i:i + per_line])
        for i in range(0, len(data), per_line))


class Fixture:
    """
    An assembled program with what a campaign over it needs: the oracle (as
    a dict, so every config gets a fresh one), extra halting points, RAM
    preloads and an optional start point given as ``(symbol, hits)``.
    """

    def __init__(self, name, program, oracle, halting_points=(),
                 preload=(), start=None, timeout=10000, models='skip'):
        self.name = name
        self.program = program
        self.oracle = oracle
        self.halting_points = tuple(halting_points)
        self.preload = tuple(preload)
        self.start = start
        self.timeout = timeout
        self.models = models

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__, self.name)

    def address(self, symbol):
        return self.program.address(symbol)

    def load(self, profile=None, arch=V6M, start=True):
        """
        Returns an emulator at the program entry with the preloads applied,
        advanced to the start point unless ``start`` is false.
        """
        emu = self.program.load('start', profile=profile, arch=arch)
        for location, data in self.preload:
            emu.memory.write_bytes(emu.resolve(location), data)
        if start and self.start is not None:
            symbol, hits = self.start
            advance_to(emu, symbol, hits, self.timeout)
        return emu

    def config(self, models=None, profile=None, **kwargs):
        "A :py:class:`~faultscope.campaign.CampaignConfig` for this fixture"
        kwargs.setdefault('timeout', self.timeout)
        kwargs.setdefault('halting_points', self.halting_points)
        return CampaignConfig(self.load(profile), models or self.models,
                              dict(self.oracle), binary=self.name, **kwargs)


def straight_line():
    program = assemble("""
    .equ result, 0x%08x
start:
    ldr r5, =result
    movs r0, #7
    adds r1, r0, #3
    subs r2, r1, r0
    str r2, [r5]
done:
    b .
""" % DEFAULT_RAM_BASE)
    return Fixture('straight-line', program,
                   {'name': 'output-mismatch', 'address': 'result',
                    'length': 4, 'done': 'done'},
                   timeout=100)


def pin_check(entered=ENTERED_PIN, pin=PIN):
    program = assemble("""
    .equ entered, 0x%08x
    .equ granted_flag, 0x%08x
start:
    ldr r0, =entered
    ldr r1, =pin
    movs r2, #0
check_loop:
    ldrb r3, [r0, r2]
    ldrb r4, [r1, r2]
    cmp r3, r4
    bne deny
    adds r2, #1
    cmp r2, #4
    bne check_loop
grant:
    ldr r0, =granted_flag
    movs r1, #1
    str r1, [r0]
    b done
deny:
    movs r1, #0
done:
    b .
    .pool
pin:
%s
""" % (DEFAULT_RAM_BASE, DEFAULT_RAM_BASE + 0x10, _byte_lines(pin)))
    return Fixture('pin-check', program,
                   {'name': 'address-reached', 'target': 'grant'},
                   halting_points=('deny',),
                   preload=(('entered', bytes(entered)),),
                   timeout=200)


SECURE_BOOT_SOURCE = """
    .equ digest, 0x%08x
    .equ hash, 0x%08x
    .equ schedule, 0x%08x
    .equ work, 0x%08x
start:
    ldr r0, =firmware
    movs r1, #2
    bl sha256
    bl verify_digest
    cmp r0, #0
    bne report_error
execute_firmware:
    b .
report_error:
    b .

verify_digest:
    push {r4, r5, lr}
    ldr r1, =digest
    ldr r2, =expected
    movs r3, #0
verify_loop:
    ldrb r4, [r1, r3]
    ldrb r5, [r2, r3]
    cmp r4, r5
    bne verify_fail
    adds r3, #1
    cmp r3, #32
    bne verify_loop
    movs r0, #0
    pop {r4, r5, pc}
verify_fail:
    movs r0, #1
    pop {r4, r5, pc}
    .pool

; unpadded SHA-256 of r1 64-byte blocks at r0 (word aligned) into digest
sha256:
    push {r4, r5, r6, r7, lr}
    ldr r2, =hash
    ldr r3, =sha_init
    movs r4, #0
sha_init_loop:
    ldr r5, [r3, r4]
    str r5, [r2, r4]
    adds r4, #4
    cmp r4, #32
    bne sha_init_loop
sha_block:
    push {r0, r1}
    ldr r2, =schedule
    movs r4, #0
sha_load:
    ldr r5, [r0, r4]
    rev r5, r5
    str r5, [r2, r4]
    adds r4, #4
    cmp r4, #64
    bne sha_load

; w[i] from w[i-16], w[i-15], w[i-7] and w[i-2]; r6 points at w[i-16]
    movs r6, r2
    ldr r7, =schedule + 192
sha_expand:
    ldr r3, [r6, #4]
    movs r5, r3
    movs r4, #7
    rors r5, r4
    movs r2, r3
    movs r4, #18
    rors r2, r4
    eors r5, r2
    lsrs r3, r3, #3
    eors r5, r3
    ldr r3, [r6, #56]
    movs r2, r3
    movs r4, #17
    rors r2, r4
    movs r1, r3
    movs r4, #19
    rors r1, r4
    eors r2, r1
    lsrs r3, r3, #10
    eors r2, r3
    adds r5, r5, r2
    ldr r3, [r6, #0]
    adds r5, r5, r3
    ldr r3, [r6, #36]
    adds r5, r5, r3
    str r5, [r6, #64]
    adds r6, #4
    cmp r6, r7
    bne sha_expand

; w[i] += k[i]
    ldr r2, =schedule
    ldr r3, =sha_k
    movs r4, #252
sha_add_k:
    ldr r5, [r2, r4]
    ldr r1, [r3, r4]
    adds r5, r5, r1
    str r5, [r2, r4]
    subs r4, #4
    bpl sha_add_k

; work holds h, g, f, e, d, c, b, a of round i at word i; round i writes
; the new e over d and the new a at word i + 8
    ldr r2, =hash
    ldr r3, =work + 28
    movs r4, #8
sha_prime:
    ldr r5, [r2, #0]
    str r5, [r3, #0]
    adds r2, #4
    subs r3, #4
    subs r4, #1
    bne sha_prime
    ldr r6, =work
    ldr r7, =schedule
    ldr r0, =work + 256
    mov ip, r0
sha_round:
    ldr r0, [r6, #12]
    movs r1, r0
    movs r2, #6
    rors r1, r2
    movs r3, r0
    movs r2, #11
    rors r3, r2
    eors r1, r3
    movs r3, r0
    movs r2, #25
    rors r3, r2
    eors r1, r3
    ldr r2, [r6, #8]
    ands r2, r0
    ldr r3, [r6, #4]
    bics r3, r0
    eors r2, r3
    adds r1, r1, r2
    ldr r2, [r6, #0]
    adds r1, r1, r2
    ldr r2, [r7, #0]
    adds r1, r1, r2
    ldr r2, [r6, #16]
    adds r2, r2, r1
    str r2, [r6, #16]
    ldr r0, [r6, #28]
    movs r2, r0
    movs r3, #2
    rors r2, r3
    movs r4, r0
    movs r3, #13
    rors r4, r3
    eors r2, r4
    movs r4, r0
    movs r3, #22
    rors r4, r3
    eors r2, r4
    adds r1, r1, r2
    ldr r3, [r6, #24]
    ldr r4, [r6, #20]
    movs r5, r0
    ands r5, r3
    orrs r3, r0
    ands r3, r4
    orrs r3, r5
    adds r1, r1, r3
    str r1, [r6, #32]
    adds r6, #4
    adds r7, #4
    cmp r6, ip
    bne sha_round

; hash[k] += a, b, ... h, found at words 71 down to 64
    ldr r2, =hash
    adds r6, #28
    movs r4, #8
sha_fold:
    ldr r3, [r2, #0]
    ldr r5, [r6, #0]
    adds r3, r3, r5
    str r3, [r2, #0]
    adds r2, #4
    subs r6, #4
    subs r4, #1
    bne sha_fold
    pop {r0, r1}
    adds r0, #64
    subs r1, #1
    beq sha_output_start
    b sha_block
sha_output_start:
    ldr r2, =hash
    ldr r3, =digest
    movs r4, #0
sha_output:
    ldr r5, [r2, r4]
    rev r5, r5
    str r5, [r3, r4]
    adds r4, #4
    cmp r4, #32
    bne sha_output
    pop {r4, r5, r6, r7, pc}
sha256_end:
    .pool
    .align
sha_k:
%s
sha_init:
%s
expected:
%s
    .align
firmware:
%s
"""


def _word_lines(words, per_line=4):
    return '\n'.join(
        '    .word ' + ', '.join('0x%08x' % w for w in words[i:i + per_line])
        for i in range(0, len(words), per_line))


def secure_boot(firmware=FIRMWARE):
    """
    The bootloader hashes ``firmware`` on the target with an unpadded
    SHA-256 (``sha256`` up to ``sha256_end``) and compares the result with
    an expected digest stored in flash, which belongs to a different image.
    """
    if len(firmware) != 128:
        raise ConfigError('The secure-boot firmware is 128 bytes')
    expected = Sha256Reference().unpadded_digest(
        bytes((firmware[0] ^ 0xFF,)) + firmware[1:])
    program = assemble(SECURE_BOOT_SOURCE % (
        SECURE_BOOT_DIGEST, SECURE_BOOT_DIGEST + 0x20,
        SECURE_BOOT_DIGEST + 0x100, SECURE_BOOT_DIGEST + 0x200,
        _word_lines(SHA256_K), _word_lines(SHA256_H), _byte_lines(expected),
        _byte_lines(firmware)))
    return Fixture('secure-boot', program,
                   {'name': 'address-reached', 'target': 'execute_firmware'},
                   halting_points=('report_error',), timeout=15000)


def double_fault():
    program = assemble("""
start:
    ldr r3, =table
redirect:
    mov r2, sp
    b deny
lookup:
    ldrb r1, [r3, #1]
    cmp r1, #0x5a
    beq grant
deny:
    b .
grant:
    b .
    .align
table:
    .byte 0x11, 0x22, 0x33, 0x5a
""")
    return Fixture('double-fault', program,
                   {'name': 'address-reached', 'target': 'grant'},
                   halting_points=('deny',), timeout=50,
                   models=double_fault_models(program))


def double_fault_models(program):
    """
    A byte-set restricted to ``mov r2, sp`` and a bit-flip restricted to
    the table lookup; neither is exploitable alone.
    """
    return [
        FaultModelSpec('redirect', INSTRUCTION, TRANSIENT, BYTE_SET,
                       instructions=InstructionFilter(
                           [program.address('redirect')])),
        FaultModelSpec('offset', INSTRUCTION, TRANSIENT, BIT_FLIP,
                       instructions=InstructionFilter(
                           [program.address('lookup')])),
    ]


AES_SOURCE = """
    .equ state, 0x%08x
start:
    ldr r0, =state
    ldr r1, =plaintext
    movs r2, #0
copy_loop:
    ldrb r3, [r1, r2]
    strb r3, [r0, r2]
    adds r2, #1
    cmp r2, #16
    bne copy_loop
    ldr r1, =round_keys
    ldr r7, =sbox
    bl add_round_key
    movs r6, #1
round_loop:
    bl sub_bytes
    bl shift_rows
    cmp r6, #10
    beq final_round
    bl mix_columns
    bl add_round_key
    adds r6, #1
    b round_loop
final_round:
    bl add_round_key
report_done:
    b .
    .pool

; r0 = state, r1 = round key (advanced by 16)
add_round_key:
    movs r2, #0
ark_loop:
    ldrb r3, [r0, r2]
    ldrb r4, [r1, r2]
    eors r3, r4
    strb r3, [r0, r2]
    adds r2, #1
    cmp r2, #16
    bne ark_loop
    adds r1, #16
    bx lr

; r0 = state, r7 = sbox
sub_bytes:
    movs r2, #0
sub_loop:
    ldrb r3, [r0, r2]
    ldrb r3, [r7, r3]
    strb r3, [r0, r2]
    adds r2, #1
    cmp r2, #16
    bne sub_loop
    bx lr

shift_rows:
    ldrb r2, [r0, #1]
    ldrb r3, [r0, #5]
    strb r3, [r0, #1]
    ldrb r3, [r0, #9]
    strb r3, [r0, #5]
    ldrb r3, [r0, #13]
    strb r3, [r0, #9]
    strb r2, [r0, #13]
    ldrb r2, [r0, #2]
    ldrb r3, [r0, #10]
    strb r3, [r0, #2]
    strb r2, [r0, #10]
    ldrb r2, [r0, #6]
    ldrb r3, [r0, #14]
    strb r3, [r0, #6]
    strb r2, [r0, #14]
    ldrb r2, [r0, #15]
    ldrb r3, [r0, #11]
    strb r3, [r0, #15]
    ldrb r3, [r0, #7]
    strb r3, [r0, #11]
    ldrb r3, [r0, #3]
    strb r3, [r0, #7]
    strb r2, [r0, #3]
    bx lr

; column pointer r7, end pointer ip, column bytes r1-r4, t = r5
mix_columns:
    push {r0, r1, r4, r5, r6, r7, lr}
    mov r7, r0
    adds r0, #16
    mov ip, r0
mix_column:
    ldrb r1, [r7, #0]
    ldrb r2, [r7, #1]
    ldrb r3, [r7, #2]
    ldrb r4, [r7, #3]
    movs r5, r1
    eors r5, r2
    eors r5, r3
    eors r5, r4
    movs r6, r1
    eors r6, r2
    bl xtime
    eors r6, r5
    eors r6, r1
    strb r6, [r7, #0]
    movs r6, r2
    eors r6, r3
    bl xtime
    eors r6, r5
    eors r6, r2
    strb r6, [r7, #1]
    movs r6, r3
    eors r6, r4
    bl xtime
    eors r6, r5
    eors r6, r3
    strb r6, [r7, #2]
    movs r6, r4
    eors r6, r1
    bl xtime
    eors r6, r5
    eors r6, r4
    strb r6, [r7, #3]
    adds r7, #4
    cmp r7, ip
    bne mix_column
    pop {r0, r1, r4, r5, r6, r7, pc}

; r6 = xtime(r6), clobbers r0
xtime:
    lsls r6, r6, #1
    cmp r6, #0xff
    bls xtime_done
    movs r0, #0x1b
    eors r6, r0
    uxtb r6, r6
xtime_done:
    bx lr

    .align
plaintext:
%s
round_keys:
%s
sbox:
%s
"""


def aes(key=AES_KEY, plaintext=AES_PLAINTEXT):
    """
    The campaign starts at the 8th arrival at ``round_loop``; the oracle
    checks the ciphertext left in ``state`` at ``report_done``.
    """
    program = assemble(AES_SOURCE % (
        DEFAULT_RAM_BASE + 0x200, _byte_lines(plaintext),
        _byte_lines(b''.join(expand_key(key))), _byte_lines(bytes(SBOX))))
    return Fixture('aes', program,
                   {'name': 'dfa-aes', 'key': bytes(key).hex(),
                    'plaintext': bytes(plaintext).hex(), 'address': 'state',
                    'done': 'report_done'},
                   start=('round_loop', 8), timeout=20000)


FIXTURES = {
    'straight-line': straight_line,
    'pin-check': pin_check,
    'secure-boot': secure_boot,
    'double-fault': double_fault,
    'aes': aes,
}


def get_fixture(name):
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ConfigError('Unknown fixture `%s`; choose one of %s'
                          % (name, ', '.join(sorted(FIXTURES))))
