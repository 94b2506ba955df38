"""
Thumb instruction decoding for ARMv6-M with a declared ARMv7-M subset.

``decode`` is total over the halfword space: every input yields either a
:py:class:`DecodedInstruction` or raises one of the classified
:py:class:`~faultscope.exceptions.DecodeError` subclasses.

Encodings that are architecturally UNPREDICTABLE but have been profiled on
real silicon are *not* rejected here. They decode normally and carry the
undefined-behavior condition in ``ub``; the executor asks the active
:py:class:`~faultscope.profiles.UbProfile` what to do with them.
"""
from functools import lru_cache

from faultscope.exceptions import (
    NotInConfiguredArch,
    UndefinedInstruction,
    UnpredictableInstruction,
)
from faultscope.utils import sign_extend, u32


V6M = 'v6m'
V7M = 'v7m-subset'
ARCH_LEVELS = (V6M, V7M)

# Extension subset implemented on top of ARMv6-M when arch=v7m-subset
V7M_CAPABILITIES = (
    'cbz', 'cbnz', 'it', 'movw', 'movt',
    'and.w', 'bic.w', 'orr.w', 'orn.w', 'eor.w', 'add.w', 'adc.w',
    'sbc.w', 'sub.w', 'rsb.w', 'mov.w', 'mvn.w', 'tst.w', 'teq.w',
    'cmp.w', 'cmn.w',
    'ldr.w', 'ldrb.w', 'ldrh.w', 'str.w', 'strb.w', 'strh.w',
    'b.w',
)

SP = 13
LR = 14
PC = 15
XPSR = 16

REGISTER_NAMES = ['r%d' % i for i in range(13)] + ['sp', 'lr', 'pc', 'xpsr']

CONDITIONS = ('eq', 'ne', 'cs', 'cc', 'mi', 'pl', 'vs', 'vc',
              'hi', 'ls', 'ge', 'lt', 'gt', 'le', 'al')

# instruction kinds
ALU = 'alu'
LOAD = 'load'
STORE = 'store'
BRANCH = 'branch'
SYSTEM = 'system'
HINT = 'hint'

SHIFT_OPS = ('lsl', 'lsr', 'asr', 'ror')

# 16-bit data processing group, indexed by opcode bits [9:6]
DATA_PROCESSING_OPS = (
    'and', 'eor', 'lsl', 'lsr', 'asr', 'adc', 'sbc', 'ror',
    'tst', 'rsb', 'cmp', 'cmn', 'orr', 'mul', 'bic', 'mvn',
)

# register-offset load/store, indexed by opB bits [11:9]
LOAD_STORE_REGISTER_OPS = (
    ('str', 4, False, False), ('strh', 2, False, False),
    ('strb', 1, False, False), ('ldrsb', 1, True, True),
    ('ldr', 4, True, False), ('ldrh', 2, True, False),
    ('ldrb', 1, True, False), ('ldrsh', 2, True, True),
)

HINTS = ('nop', 'yield', 'wfe', 'wfi', 'sev')

# wide data processing (modified immediate), indexed by op bits [8:5]
WIDE_IMMEDIATE_OPS = {
    0b0000: 'and', 0b0001: 'bic', 0b0010: 'orr', 0b0011: 'orn',
    0b0100: 'eor', 0b1000: 'add', 0b1010: 'adc', 0b1011: 'sbc',
    0b1101: 'sub', 0b1110: 'rsb',
}
WIDE_LOGICAL_OPS = ('and', 'bic', 'orr', 'orn', 'eor')

SPECIAL_REGISTERS = {
    0: 'apsr', 1: 'iapsr', 2: 'eapsr', 3: 'xpsr', 5: 'ipsr', 6: 'epsr',
    7: 'iepsr', 8: 'msp', 9: 'psp', 16: 'primask', 20: 'control',
}


class DecodedInstruction:
    """
    A classified Thumb instruction.

    ``op`` selects the executor, ``mnemonic`` is the display name. Operand
    attributes that do not apply to an instruction are ``None``.
    ``it_sensitive`` marks 16-bit encodings whose flag setting is suppressed
    inside an IT block. ``ub`` is an ``(instruction class, condition)``
    pair when the encoding hits a profiled undefined-behavior condition.
    """

    def __init__(self, op, mnemonic, kind, encoding, arch_level=V6M,
                 rd=None, rn=None, rm=None, rt=None, imm=None,
                 registers=None, cond=None, setflags=False,
                 it_sensitive=False, carry=None, wback=False, size=None,
                 signed=False, shift=None, ub=None, sysm=None):
        self.op = op
        self.mnemonic = mnemonic
        self.kind = kind
        self.encoding = tuple(encoding)
        self.width = 16 * len(self.encoding)
        self.arch_level = arch_level
        self.rd = rd
        self.rn = rn
        self.rm = rm
        self.rt = rt
        self.imm = imm
        self.registers = registers
        self.cond = cond
        self.setflags = setflags
        self.it_sensitive = it_sensitive
        self.carry = carry
        self.wback = wback
        self.size = size
        self.signed = signed
        self.shift = shift
        self.ub = ub
        self.sysm = sysm

    def __repr__(self):
        return '%s<%s %s>' % (
            type(self).__name__,
            ' '.join('%04x' % hw for hw in self.encoding),
            self.text(),
        )

    @property
    def size_bytes(self):
        return len(self.encoding) * 2

    @property
    def raw(self):
        "The encoding as little-endian memory bytes"
        return b''.join(hw.to_bytes(2, 'little') for hw in self.encoding)

    def operands(self):
        names = ('rd', 'rn', 'rm', 'rt', 'imm', 'registers', 'cond',
                 'shift', 'sysm')
        return dict((name, getattr(self, name)) for name in names
                    if getattr(self, name) is not None)

    def text(self, address=None):
        return disassemble(self, address)

    @classmethod
    def skip(cls, width):
        "A synthetic instruction that only advances the PC by ``width`` bits"
        return cls('skip', 'nop', HINT, (0xBF00,) * (width // 16))


def is_wide(halfword):
    "True when ``halfword`` is the first half of a 32-bit encoding"
    return (halfword >> 11) in (0b11101, 0b11110, 0b11111)


def decode(halfwords, arch=V6M):
    """
    Decodes one instruction from ``halfwords``.

    Only as many halfwords as the instruction needs are consumed; pass two
    whenever the first one is a 32-bit prefix (see :py:func:`is_wide`).
    """
    if arch not in ARCH_LEVELS:
        raise ValueError('Unknown architecture level %r' % (arch,))
    if not halfwords:
        raise ValueError('decode() needs at least one halfword')
    first = halfwords[0] & 0xFFFF
    if is_wide(first):
        if len(halfwords) < 2:
            raise ValueError('halfword 0x%04x starts a 32-bit encoding; '
                             'a second halfword is required' % first)
        return _decode32(first, halfwords[1] & 0xFFFF, arch)
    return _decode16(first, arch)


def register_name(reg):
    return REGISTER_NAMES[reg]


def thumb_expand_imm(imm12, carry_in=0):
    """
    Expands a 12-bit modified immediate. Returns ``(value, carry_out)``.
    """
    if imm12 >> 10 == 0:
        imm8 = imm12 & 0xFF
        kind = (imm12 >> 8) & 3
        if kind != 0 and imm8 == 0:
            raise UnpredictableInstruction('zero modified immediate')
        if kind == 0:
            return imm8, carry_in
        if kind == 1:
            return (imm8 << 16) | imm8, carry_in
        if kind == 2:
            return (imm8 << 24) | (imm8 << 8), carry_in
        return imm8 * 0x01010101, carry_in
    unrotated = 0x80 | (imm12 & 0x7F)
    amount = imm12 >> 7
    value = u32((unrotated >> amount) | (unrotated << (32 - amount)))
    return value, value >> 31


def _unpredictable(message):
    return UnpredictableInstruction(message)


@lru_cache(maxsize=1 << 16)
def _decode16(hw, arch):
    top = hw >> 11
    if hw >> 14 == 0:
        return _decode_shift_add_sub(hw)
    if hw >> 10 == 0b010000:
        return _decode_data_processing(hw)
    if hw >> 10 == 0b010001:
        return _decode_special(hw)
    if top == 0b01001:
        return DecodedInstruction('ldr_lit', 'ldr', LOAD, (hw,),
                                  rt=(hw >> 8) & 7, imm=(hw & 0xFF) * 4,
                                  size=4)
    if hw >> 12 == 0b0101:
        op, size, load, signed = LOAD_STORE_REGISTER_OPS[(hw >> 9) & 7]
        return DecodedInstruction(
            'ldr_reg' if load else 'str_reg', op, LOAD if load else STORE,
            (hw,), rt=hw & 7, rn=(hw >> 3) & 7, rm=(hw >> 6) & 7,
            size=size, signed=signed)
    if hw >> 13 == 0b011 or hw >> 12 == 0b1000:
        if hw >> 13 == 0b011:
            size = 1 if hw & 0x1000 else 4
        else:
            size = 2
        load = bool(hw & 0x0800)
        mnemonic = ('ldr' if load else 'str') + {1: 'b', 2: 'h', 4: ''}[size]
        return DecodedInstruction(
            'ldr_imm' if load else 'str_imm', mnemonic,
            LOAD if load else STORE, (hw,), rt=hw & 7, rn=(hw >> 3) & 7,
            imm=((hw >> 6) & 0x1F) * size, size=size)
    if hw >> 12 == 0b1001:
        load = bool(hw & 0x0800)
        return DecodedInstruction(
            'ldr_imm' if load else 'str_imm', 'ldr' if load else 'str',
            LOAD if load else STORE, (hw,), rt=(hw >> 8) & 7, rn=SP,
            imm=(hw & 0xFF) * 4, size=4)
    if top == 0b10100:
        return DecodedInstruction('adr', 'adr', ALU, (hw,),
                                  rd=(hw >> 8) & 7, imm=(hw & 0xFF) * 4)
    if top == 0b10101:
        return DecodedInstruction('add_imm', 'add', ALU, (hw,),
                                  rd=(hw >> 8) & 7, rn=SP,
                                  imm=(hw & 0xFF) * 4)
    if hw >> 12 == 0b1011:
        return _decode_misc(hw, arch)
    if top == 0b11000:
        return _decode_stm(hw)
    if top == 0b11001:
        rn = (hw >> 8) & 7
        registers = _register_list(hw & 0xFF)
        ub = None if registers else ('ldm', 'empty-list')
        return DecodedInstruction('ldm', 'ldm', LOAD, (hw,), rn=rn,
                                  registers=registers,
                                  wback=rn not in registers, ub=ub)
    if hw >> 12 == 0b1101:
        cond = (hw >> 8) & 0xF
        if cond == 0b1110:
            raise UndefinedInstruction('permanently undefined (udf)')
        if cond == 0b1111:
            return DecodedInstruction('svc', 'svc', SYSTEM, (hw,),
                                      imm=hw & 0xFF)
        return DecodedInstruction('b', 'b' + CONDITIONS[cond], BRANCH,
                                  (hw,), cond=cond,
                                  imm=sign_extend((hw & 0xFF) << 1, 9))
    if top == 0b11100:
        return DecodedInstruction('b', 'b', BRANCH, (hw,),
                                  imm=sign_extend((hw & 0x7FF) << 1, 12))
    # 0b11101 / 0b11110 / 0b11111 are wide prefixes, handled by decode()
    raise ValueError('halfword 0x%04x is a 32-bit prefix' % hw)


def _decode_shift_add_sub(hw):
    opcode = (hw >> 9) & 0x1F
    rd = hw & 7
    rn = (hw >> 3) & 7
    if opcode >> 2 in (0, 1, 2):
        rm = rn
        imm5 = (hw >> 6) & 0x1F
        shift = SHIFT_OPS[opcode >> 2]
        if shift == 'lsl' and imm5 == 0:
            return DecodedInstruction('mov_reg', 'movs', ALU, (hw,), rd=rd,
                                      rm=rm, setflags=True,
                                      it_sensitive=True)
        amount = imm5 or 32
        return DecodedInstruction('shift_imm', shift + 's', ALU, (hw,),
                                  rd=rd, rm=rm, imm=amount, shift=shift,
                                  setflags=True, it_sensitive=True)
    if opcode in (0b01100, 0b01101):
        op = 'add_reg' if opcode == 0b01100 else 'sub_reg'
        return DecodedInstruction(op, op[:3] + 's', ALU, (hw,), rd=rd,
                                  rn=rn, rm=(hw >> 6) & 7, setflags=True,
                                  it_sensitive=True)
    if opcode in (0b01110, 0b01111):
        op = 'add_imm' if opcode == 0b01110 else 'sub_imm'
        return DecodedInstruction(op, op[:3] + 's', ALU, (hw,), rd=rd,
                                  rn=rn, imm=(hw >> 6) & 7, setflags=True,
                                  it_sensitive=True)
    rdn = (hw >> 8) & 7
    imm8 = hw & 0xFF
    group = opcode >> 2
    if group == 0b100:
        return DecodedInstruction('mov_imm', 'movs', ALU, (hw,), rd=rdn,
                                  imm=imm8, setflags=True, it_sensitive=True)
    if group == 0b101:
        return DecodedInstruction('cmp_imm', 'cmp', ALU, (hw,), rn=rdn,
                                  imm=imm8, setflags=True)
    op = 'add_imm' if group == 0b110 else 'sub_imm'
    return DecodedInstruction(op, op[:3] + 's', ALU, (hw,), rd=rdn, rn=rdn,
                              imm=imm8, setflags=True, it_sensitive=True)


def _decode_data_processing(hw):
    name = DATA_PROCESSING_OPS[(hw >> 6) & 0xF]
    rdn = hw & 7
    rm = (hw >> 3) & 7
    if name in ('tst', 'cmp', 'cmn'):
        return DecodedInstruction(name + '_reg', name, ALU, (hw,), rn=rdn,
                                  rm=rm, setflags=True)
    if name == 'rsb':
        return DecodedInstruction('rsb_imm', 'rsbs', ALU, (hw,), rd=rdn,
                                  rn=rm, imm=0, setflags=True,
                                  it_sensitive=True)
    if name == 'mul':
        return DecodedInstruction('mul', 'muls', ALU, (hw,), rd=rdn, rn=rm,
                                  rm=rdn, setflags=True, it_sensitive=True)
    if name == 'mvn':
        return DecodedInstruction('mvn_reg', 'mvns', ALU, (hw,), rd=rdn,
                                  rm=rm, setflags=True, it_sensitive=True)
    if name in SHIFT_OPS:
        return DecodedInstruction('shift_reg', name + 's', ALU, (hw,),
                                  rd=rdn, rn=rdn, rm=rm, shift=name,
                                  setflags=True, it_sensitive=True)
    return DecodedInstruction(name + '_reg', name + 's', ALU, (hw,), rd=rdn,
                              rn=rdn, rm=rm, setflags=True,
                              it_sensitive=True)


def _decode_special(hw):
    op = (hw >> 8) & 3
    rm = (hw >> 3) & 0xF
    rdn = ((hw >> 4) & 0x8) | (hw & 7)
    if op == 0:
        ub = ('add', 'pc-pc') if rdn == PC and rm == PC else None
        return DecodedInstruction('add_reg', 'add', ALU, (hw,), rd=rdn,
                                  rn=rdn, rm=rm, ub=ub)
    if op == 1:
        if rdn == PC or rm == PC:
            raise _unpredictable('cmp with pc operand')
        ub = ('cmp', 'low-registers') if rdn < 8 and rm < 8 else None
        return DecodedInstruction('cmp_reg', 'cmp', ALU, (hw,), rn=rdn,
                                  rm=rm, setflags=True, ub=ub)
    if op == 2:
        return DecodedInstruction('mov_reg', 'mov', ALU, (hw,), rd=rdn,
                                  rm=rm)
    link = bool(hw & 0x80)
    name = 'blx' if link else 'bx'
    ub = None
    if rm == PC:
        ub = (name, 'pc')
    elif hw & 7:
        ub = (name, 'sbz-bits')
    return DecodedInstruction(name, name, BRANCH, (hw,), rm=rm, ub=ub)


def _decode_misc(hw, arch):
    op = (hw >> 8) & 0xF
    if op == 0b0000:
        name = 'sub_imm' if hw & 0x80 else 'add_imm'
        return DecodedInstruction(name, name[:3], ALU, (hw,), rd=SP, rn=SP,
                                  imm=(hw & 0x7F) * 4)
    if op in (0b0001, 0b0011, 0b1001, 0b1011):
        nonzero = bool(hw & 0x0800)
        insn = DecodedInstruction(
            'cbz', 'cbnz' if nonzero else 'cbz', BRANCH, (hw,), arch_level=V7M,
            rn=hw & 7, imm=(((hw >> 9) & 1) << 6) | (((hw >> 3) & 0x1F) << 1),
            cond=1 if nonzero else 0)
        return _gate(insn, arch)
    if op == 0b0010:
        name = ('sxth', 'sxtb', 'uxth', 'uxtb')[(hw >> 6) & 3]
        return DecodedInstruction('extend', name, ALU, (hw,), rd=hw & 7,
                                  rm=(hw >> 3) & 7,
                                  size=1 if name[-1] == 'b' else 2,
                                  signed=name[0] == 's')
    if op in (0b0100, 0b0101):
        registers = _register_list(hw & 0xFF)
        if hw & 0x100:
            registers = registers + (LR,)
        ub = None if registers else ('push', 'empty-list')
        return DecodedInstruction('push', 'push', STORE, (hw,), rn=SP,
                                  registers=registers, ub=ub)
    if op in (0b1100, 0b1101):
        registers = _register_list(hw & 0xFF)
        if hw & 0x100:
            registers = registers + (PC,)
        ub = None if registers else ('pop', 'empty-list')
        return DecodedInstruction('pop', 'pop', LOAD, (hw,), rn=SP,
                                  registers=registers, ub=ub)
    if op == 0b0110:
        if (hw >> 5) & 7 != 0b011:
            raise UndefinedInstruction('undefined miscellaneous encoding')
        if hw & 0xF != 0b0010:
            raise _unpredictable('cps with unsupported interrupt mask')
        disable = bool(hw & 0x10)
        return DecodedInstruction('cps', 'cpsid' if disable else 'cpsie',
                                  SYSTEM, (hw,), imm=int(disable))
    if op == 0b1010:
        kind = (hw >> 6) & 3
        if kind == 2:
            raise UndefinedInstruction('undefined reverse encoding')
        name = ('rev', 'rev16', None, 'revsh')[kind]
        return DecodedInstruction('rev', name, ALU, (hw,), rd=hw & 7,
                                  rm=(hw >> 3) & 7)
    if op == 0b1110:
        return DecodedInstruction('bkpt', 'bkpt', SYSTEM, (hw,),
                                  imm=hw & 0xFF)
    if op == 0b1111:
        mask = hw & 0xF
        firstcond = (hw >> 4) & 0xF
        if mask:
            if firstcond == 0b1111:
                raise _unpredictable('it with condition 0b1111')
            if firstcond == 0b1110 and bin(mask).count('1') != 1:
                raise _unpredictable('it al with else slots')
            insn = DecodedInstruction('it', 'it', SYSTEM, (hw,),
                                      arch_level=V7M, cond=firstcond,
                                      imm=mask)
            return _gate(insn, arch)
        name = HINTS[firstcond] if firstcond < len(HINTS) else 'nop'
        return DecodedInstruction('nop', name, HINT, (hw,))
    raise UndefinedInstruction('undefined miscellaneous encoding')


def _decode_stm(hw):
    rn = (hw >> 8) & 7
    registers = _register_list(hw & 0xFF)
    ub = None
    if not registers:
        ub = ('stm', 'empty-list')
    elif rn in registers and registers[0] != rn:
        ub = ('stm', 'base-not-lowest')
    return DecodedInstruction('stm', 'stm', STORE, (hw,), rn=rn,
                              registers=registers, wback=True, ub=ub)


def _register_list(bits):
    return tuple(i for i in range(16) if bits & (1 << i))


def _gate(insn, arch):
    if insn.arch_level == V7M and arch == V6M:
        raise NotInConfiguredArch('%s requires %s' % (insn.mnemonic, V7M))
    return insn


@lru_cache(maxsize=1 << 16)
def _decode32(hw1, hw2, arch):
    encoding = (hw1, hw2)
    if hw1 >> 11 == 0b11110 and hw2 & 0x8000:
        return _decode_branch_control(hw1, hw2, arch)
    if hw1 >> 11 == 0b11110 and not hw2 & 0x8000:
        if not hw1 & 0x0200:
            return _gate(_decode_wide_immediate(hw1, hw2), arch)
        if hw1 & 0xFB70 == 0xF240:
            rd = (hw2 >> 8) & 0xF
            if arch == V6M:
                raise NotInConfiguredArch('movw/movt requires %s' % V7M)
            if rd in (SP, PC):
                raise _unpredictable('movw/movt to sp or pc')
            imm = (((hw1 & 0xF) << 12) | (((hw1 >> 10) & 1) << 11)
                   | (((hw2 >> 12) & 7) << 8) | (hw2 & 0xFF))
            top = bool(hw1 & 0x0080)
            insn = DecodedInstruction('movt' if top else 'movw',
                                      'movt' if top else 'movw', ALU,
                                      encoding, arch_level=V7M, rd=rd,
                                      imm=imm)
            return _gate(insn, arch)
    if hw1 & 0xFF80 == 0xF880 or hw1 & 0xFF7F == 0xF85F:
        return _gate(_decode_wide_load_store(hw1, hw2), arch)
    raise NotInConfiguredArch(
        'wide encoding %04x %04x is outside the configured subset'
        % (hw1, hw2))


def _decode_branch_control(hw1, hw2, arch):
    encoding = (hw1, hw2)
    op = (hw1 >> 4) & 0x7F
    op1 = (hw2 >> 12) & 0x7
    s = (hw1 >> 10) & 1
    j1 = (hw2 >> 13) & 1
    j2 = (hw2 >> 11) & 1
    if op1 & 0b101 == 0b101:
        return DecodedInstruction('bl', 'bl', BRANCH, encoding,
                                  imm=_branch_offset_t4(hw1, hw2))
    if op1 == 0b010 and op == 0x7F:
        raise UndefinedInstruction('permanently undefined (udf.w)')
    if op1 & 0b101 == 0b100:
        raise UndefinedInstruction('blx immediate is undefined on M-profile')
    if op1 & 0b101 == 0b001:
        insn = DecodedInstruction('b', 'b.w', BRANCH, encoding,
                                  arch_level=V7M,
                                  imm=_branch_offset_t4(hw1, hw2))
        return _gate(insn, arch)
    if op1 & 0b101 == 0b000:
        if (op >> 3) & 0x7 != 0b111:
            cond = (hw1 >> 6) & 0xF
            imm = sign_extend(
                (s << 20) | (j2 << 19) | (j1 << 18)
                | ((hw1 & 0x3F) << 12) | ((hw2 & 0x7FF) << 1), 21)
            insn = DecodedInstruction('b', 'b%s.w' % CONDITIONS[cond],
                                      BRANCH, encoding, arch_level=V7M,
                                      cond=cond, imm=imm)
            return _gate(insn, arch)
        if op == 0x38 and hw2 & 0x0F00 == 0x0800:
            sysm = hw2 & 0xFF
            if sysm not in SPECIAL_REGISTERS:
                raise _unpredictable('msr to unknown special register')
            return DecodedInstruction('msr', 'msr', SYSTEM, encoding,
                                      rn=hw1 & 0xF, sysm=sysm)
        if op == 0x3B and hw1 & 0xF == 0xF and hw2 & 0x0F00 == 0x0F00:
            kind = (hw2 >> 4) & 0xF
            if kind in (0b0100, 0b0101, 0b0110):
                name = {0b0100: 'dsb', 0b0101: 'dmb', 0b0110: 'isb'}[kind]
                return DecodedInstruction('nop', name, SYSTEM, encoding,
                                          imm=hw2 & 0xF)
            raise UndefinedInstruction('undefined barrier encoding')
        if op == 0x3E and hw1 & 0xF == 0xF:
            sysm = hw2 & 0xFF
            if sysm not in SPECIAL_REGISTERS:
                raise _unpredictable('mrs from unknown special register')
            rd = (hw2 >> 8) & 0xF
            if rd in (SP, PC):
                raise _unpredictable('mrs into sp or pc')
            return DecodedInstruction('mrs', 'mrs', SYSTEM, encoding, rd=rd,
                                      sysm=sysm)
    raise NotInConfiguredArch(
        'wide encoding %04x %04x is outside the configured subset'
        % (hw1, hw2))


def _branch_offset_t4(hw1, hw2):
    s = (hw1 >> 10) & 1
    i1 = 1 ^ ((hw2 >> 13) & 1) ^ s
    i2 = 1 ^ ((hw2 >> 11) & 1) ^ s
    return sign_extend(
        (s << 24) | (i1 << 23) | (i2 << 22)
        | ((hw1 & 0x3FF) << 12) | ((hw2 & 0x7FF) << 1), 25)


def _decode_wide_immediate(hw1, hw2):
    encoding = (hw1, hw2)
    op = (hw1 >> 5) & 0xF
    setflags = bool(hw1 & 0x10)
    rn = hw1 & 0xF
    rd = (hw2 >> 8) & 0xF
    name = WIDE_IMMEDIATE_OPS.get(op)
    if name is None:
        raise NotInConfiguredArch('wide immediate op %s' % bin(op))
    imm12 = (((hw1 >> 10) & 1) << 11) | (((hw2 >> 12) & 7) << 8) \
        | (hw2 & 0xFF)
    logical = name in WIDE_LOGICAL_OPS
    if logical:
        # the carry out of the expansion only matters when the rotation
        # form is used; None leaves C unchanged
        value, carry = thumb_expand_imm(imm12, None)
    else:
        value, carry = thumb_expand_imm(imm12, 0)
        carry = None

    compare = {'and': 'tst', 'eor': 'teq', 'add': 'cmn', 'sub': 'cmp'}
    if rd == PC and setflags and name in compare:
        name = compare[name]
        if rn in (SP, PC) and name in ('tst', 'teq'):
            raise _unpredictable('%s.w with sp or pc' % name)
        if rn == PC:
            raise _unpredictable('%s.w with pc' % name)
        return DecodedInstruction(name + '_imm', name + '.w', ALU, encoding,
                                  arch_level=V7M, rn=rn, imm=value,
                                  setflags=True, carry=carry)
    if name in ('orr', 'orn') and rn == PC:
        name = 'mov' if name == 'orr' else 'mvn'
        if rd in (SP, PC):
            raise _unpredictable('%s.w to sp or pc' % name)
        return DecodedInstruction(name + '_imm', name + ('s.w' if setflags
                                                         else '.w'),
                                  ALU, encoding, arch_level=V7M, rd=rd,
                                  imm=value, setflags=setflags, carry=carry)
    if rd == PC or rn == PC:
        raise _unpredictable('%s.w with pc operand' % name)
    if rd == SP and not (name in ('add', 'sub') and rn == SP):
        raise _unpredictable('%s.w writing sp' % name)
    if rn == SP and name not in ('add', 'sub'):
        raise _unpredictable('%s.w reading sp' % name)
    return DecodedInstruction(name + '_imm', name + ('s.w' if setflags
                                                     else '.w'),
                              ALU, encoding, arch_level=V7M, rd=rd, rn=rn,
                              imm=value, setflags=setflags, carry=carry)


def _decode_wide_load_store(hw1, hw2):
    encoding = (hw1, hw2)
    rt = (hw2 >> 12) & 0xF
    if hw1 & 0xFF7F == 0xF85F:
        imm = hw2 & 0xFFF
        add = bool(hw1 & 0x80)
        return DecodedInstruction('ldr_lit', 'ldr.w', LOAD, encoding,
                                  arch_level=V7M, rt=rt,
                                  imm=imm if add else -imm, size=4)
    size = {0: 1, 1: 2, 2: 4}.get((hw1 >> 5) & 3)
    if size is None:
        raise UndefinedInstruction('undefined wide load/store size')
    load = bool(hw1 & 0x10)
    rn = hw1 & 0xF
    suffix = {1: 'b', 2: 'h', 4: ''}[size]
    if rn == PC:
        if not load:
            raise UndefinedInstruction('wide store with pc base')
        raise NotInConfiguredArch('ldr%s.w literal' % suffix)
    if load:
        if rt == PC and size != 4:
            raise NotInConfiguredArch('preload hint')
        if rt == SP and size != 4:
            raise _unpredictable('ldr%s.w into sp' % suffix)
    elif rt == PC or (rt == SP and size != 4):
        raise _unpredictable('str%s.w from sp or pc' % suffix)
    return DecodedInstruction(
        'ldr_imm' if load else 'str_imm',
        ('ldr' if load else 'str') + suffix + '.w', LOAD if load else STORE,
        encoding, arch_level=V7M, rt=rt, rn=rn, imm=hw2 & 0xFFF, size=size)


def _format_registers(registers):
    return '{%s}' % ', '.join(REGISTER_NAMES[r] for r in registers)


def _format_target(insn, address):
    if address is None:
        return '#%d' % insn.imm
    return '0x%08x' % u32(address + 4 + insn.imm)


def disassemble(insn, address=None):
    """
    Renders ``insn`` as text with lowercase mnemonics and canonical register
    names. Branch targets are absolute when ``address`` is given.
    """
    r = REGISTER_NAMES
    op = insn.op
    m = insn.mnemonic
    if op in ('nop', 'skip', 'bkpt', 'svc', 'cps'):
        if insn.imm is not None and op in ('bkpt', 'svc'):
            return '%s #%d' % (m, insn.imm)
        return m
    if op in ('b', 'bl'):
        return '%s %s' % (m, _format_target(insn, address))
    if op == 'cbz':
        return '%s %s, %s' % (m, r[insn.rn], _format_target(insn, address))
    if op in ('bx', 'blx'):
        return '%s %s' % (m, r[insn.rm])
    if op == 'it':
        return 'it %s' % CONDITIONS[insn.cond]
    if op in ('push', 'pop'):
        return '%s %s' % (m, _format_registers(insn.registers))
    if op in ('ldm', 'stm'):
        return '%s %s%s, %s' % (m, r[insn.rn], '!' if insn.wback else '',
                                _format_registers(insn.registers))
    if op == 'ldr_lit':
        return '%s %s, [pc, #%d]' % (m, r[insn.rt], insn.imm)
    if op in ('ldr_imm', 'str_imm'):
        return '%s %s, [%s, #%d]' % (m, r[insn.rt], r[insn.rn], insn.imm)
    if op in ('ldr_reg', 'str_reg'):
        return '%s %s, [%s, %s]' % (m, r[insn.rt], r[insn.rn], r[insn.rm])
    if op == 'adr':
        return 'adr %s, pc, #%d' % (r[insn.rd], insn.imm)
    if op == 'msr':
        return 'msr %s, %s' % (SPECIAL_REGISTERS[insn.sysm], r[insn.rn])
    if op == 'mrs':
        return 'mrs %s, %s' % (r[insn.rd], SPECIAL_REGISTERS[insn.sysm])
    if op == 'shift_imm':
        return '%s %s, %s, #%d' % (m, r[insn.rd], r[insn.rm], insn.imm)
    parts = [r[reg] for reg in (insn.rd, insn.rn, insn.rm) if reg is not None]
    if insn.imm is not None:
        parts.append('#%d' % insn.imm)
    return '%s %s' % (m, ', '.join(parts))
