"""
A small Thumb assembler for building test programs.

Supports the ARMv6-M 16-bit instructions plus ``BL``, literal-pool loads
(``LDR Rt, =value``) and the ``.byte``, ``.hword``, ``.word``, ``.align``,
``.space``, ``.equ`` and ``.pool`` directives. Labels end with ``:``;
comments start with ``;``, ``@`` or ``//``. ``.`` is the address of the
current instruction, so ``b .`` is a self-loop.

Literals collected since the last ``.pool`` are placed, word-aligned, at the
next ``.pool`` directive or after the last statement.
"""
import re

from faultscope.decoder import CONDITIONS, LR, PC, SP
from faultscope.emulator import DEFAULT_FLASH_BASE, DEFAULT_RAM_BASE, \
    DEFAULT_RAM_SIZE
from faultscope.exceptions import (
    AssemblerError,
    BranchOutOfRangeError,
    UnknownMnemonicError,
)


REGISTERS = dict(('r%d' % i, i) for i in range(16))
REGISTERS.update({'sp': SP, 'lr': LR, 'pc': PC, 'ip': 12, 'fp': 11})

CONDITION_CODES = dict((name, code) for code, name in enumerate(CONDITIONS))
CONDITION_CODES.update({'hs': 2, 'lo': 3})
del CONDITION_CODES['al']

# (opcode for the ``op Rdn, Rm`` data processing group)
DATA_PROCESSING = {
    'ands': 0, 'eors': 1, 'adcs': 5, 'sbcs': 6, 'rors': 7, 'tst': 8,
    'cmn': 11, 'orrs': 12, 'bics': 14, 'mvns': 15,
}
# (T1 register offset opcode, immediate base, immediate scale)
LOAD_STORE = {
    'str': (0x5000, 0x6000, 4), 'strh': (0x5200, 0x8000, 2),
    'strb': (0x5400, 0x7000, 1), 'ldrsb': (0x5600, None, 1),
    'ldr': (0x5800, 0x6800, 4), 'ldrh': (0x5A00, 0x8800, 2),
    'ldrb': (0x5C00, 0x7800, 1), 'ldrsh': (0x5E00, None, 2),
}
EXTENDS = {'sxth': 0xB200, 'sxtb': 0xB240, 'uxth': 0xB280, 'uxtb': 0xB2C0}
REVERSES = {'rev': 0xBA00, 'rev16': 0xBA40, 'revsh': 0xBAC0}
SHIFTS = {'lsls': (0x0000, 2), 'lsrs': (0x0800, 3), 'asrs': (0x1000, 4)}
FIXED = {'nop': 0xBF00, 'yield': 0xBF10, 'wfe': 0xBF20, 'wfi': 0xBF30,
         'sev': 0xBF40}

_TERM = re.compile(r'[+-]|[^+\-\s]+')
_LABEL = re.compile(r'^\s*([A-Za-z_.$][\w.$]*)\s*:')


class Literal:
    def __init__(self, expression):
        self.expression = expression
        self.address = None


class Statement:
    def __init__(self, kind, name, operands, text, line):
        self.kind = kind
        self.name = name
        self.operands = operands
        self.text = text
        self.line = line
        self.literal = None


class Program:
    "An assembled flat image with its symbol table"

    def __init__(self, base, image, symbols):
        self.base = base
        self.image = bytes(image)
        self.symbols = dict(symbols)

    def __repr__(self):
        return '%s<0x%08x %d bytes>' % (type(self).__name__, self.base,
                                        len(self.image))

    def __len__(self):
        return len(self.image)

    @property
    def end(self):
        return self.base + len(self.image)

    def address(self, symbol):
        try:
            return self.symbols[symbol]
        except KeyError:
            raise AssemblerError('Undefined symbol `%s`' % symbol)

    def halfwords(self, start=None, count=None):
        if start is None:
            start = self.base
        elif isinstance(start, str):
            start = self.address(start)
        offset = start - self.base
        data = self.image[offset:]
        if count is not None:
            data = data[:2 * count]
        return [int.from_bytes(data[i:i + 2], 'little')
                for i in range(0, len(data) - 1, 2)]

    def load(self, entry='start', sp=DEFAULT_RAM_BASE + DEFAULT_RAM_SIZE,
             **kwargs):
        """
        Returns an emulator with this program in flash, the PC at ``entry``
        (a symbol or address) and the given stack pointer.
        """
        from faultscope.loader import load_binary
        if isinstance(entry, str):
            pc = self.symbols.get(entry, self.base)
        else:
            pc = entry
        return load_binary(self.image, base=self.base,
                           boot={'pc': pc, 'sp': sp}, symbols=self.symbols,
                           **kwargs)


class ProgramBuilder:
    """
    Collects assembly statements and lays them out into a :py:class:`Program`.

    Statements may reference labels defined later; everything is resolved by
    :py:meth:`build`.
    """

    def __init__(self, base=DEFAULT_FLASH_BASE):
        if base % 4:
            raise AssemblerError('Program base must be word-aligned')
        self.base = base
        self.statements = []
        self._line = 0

    def emit(self, *lines):
        "Appends source lines; returns the builder for chaining"
        for text in lines:
            for line in text.splitlines():
                self._line += 1
                self._parse_line(line)
        return self

    def label(self, name):
        self.statements.append(Statement('label', name, (), name, self._line))
        return self

    def build(self):
        symbols, layout = self._layout()
        image = bytearray()
        for address, statement in layout:
            image += self._encode(address, statement, symbols)
        return Program(self.base, image, dict(
            (name, value) for name, value in symbols.items()
            if not name.startswith('.')))

    def _parse_line(self, line):
        for marker in (';', '@', '//'):
            if marker in line:
                line = line[:line.index(marker)]
        while True:
            match = _LABEL.match(line)
            if match is None:
                break
            self.label(match.group(1))
            line = line[match.end():]
        line = line.strip()
        if not line:
            return
        parts = line.split(None, 1)
        name = parts[0].lower()
        operands = _split_operands(parts[1]) if len(parts) > 1 else []
        kind = 'directive' if name.startswith('.') else 'insn'
        self.statements.append(Statement(kind, name, operands, line,
                                         self._line))

    def _layout(self):
        symbols = {}
        layout = []
        pending = {}
        address = self.base
        for statement in self.statements:
            kind = statement.kind
            name = statement.name
            if kind == 'label':
                if name in symbols:
                    raise AssemblerError('Label `%s` defined twice' % name)
                symbols[name] = address
                continue
            if kind == 'insn':
                if name == 'ldr' and len(statement.operands) == 2 \
                        and statement.operands[1].startswith('='):
                    expression = statement.operands[1][1:].strip()
                    if expression not in pending:
                        pending[expression] = Literal(expression)
                    statement.literal = pending[expression]
                layout.append((address, statement))
                address += 4 if name == 'bl' else 2
                continue
            if name == '.equ':
                if len(statement.operands) != 2:
                    raise self._error(statement, '.equ needs a name and a '
                                      'value')
                symbols[statement.operands[0]] = _evaluate(
                    statement.operands[1], symbols, address)
            elif name == '.pool':
                address = self._place_pool(address, pending, layout)
                pending = {}
            elif name == '.align':
                boundary = _evaluate(statement.operands[0], symbols, address) \
                    if statement.operands else 4
                padding = (-address) % boundary
                layout.append((address, Statement('space', None, (padding,),
                                                  '', statement.line)))
                address += padding
            elif name == '.space':
                size = _evaluate(statement.operands[0], symbols, address)
                layout.append((address, Statement('space', None, (size,), '',
                                                  statement.line)))
                address += size
            elif name in ('.byte', '.hword', '.word'):
                width = {'.byte': 1, '.hword': 2, '.word': 4}[name]
                layout.append((address, statement))
                address += width * len(statement.operands)
            else:
                raise UnknownMnemonicError('Unknown directive `%s` on line %d'
                                           % (name, statement.line))
        if pending:
            self._place_pool(address, pending, layout)
        return symbols, layout

    def _place_pool(self, address, pending, layout):
        padding = (-address) % 4
        if padding:
            layout.append((address, Statement('space', None, (padding,), '',
                                              None)))
            address += padding
        for literal in pending.values():
            literal.address = address
            layout.append((address, Statement('literal', None, (), '', None)))
            layout[-1][1].literal = literal
            address += 4
        return address

    def _error(self, statement, message):
        return AssemblerError('%s on line %s: `%s`'
                              % (message, statement.line, statement.text))

    def _encode(self, address, statement, symbols):
        kind = statement.kind
        if kind == 'space':
            return bytes(statement.operands[0])
        if kind == 'literal':
            value = _evaluate(statement.literal.expression, symbols, address)
            return (value & 0xFFFFFFFF).to_bytes(4, 'little')
        if kind == 'directive':
            width = {'.byte': 1, '.hword': 2, '.word': 4}[statement.name]
            mask = (1 << (8 * width)) - 1
            return b''.join(
                (_evaluate(value, symbols, address) & mask).to_bytes(
                    width, 'little') for value in statement.operands)
        encoder = _Encoder(self, statement, address, symbols)
        halfwords = encoder.encode()
        return b''.join(hw.to_bytes(2, 'little') for hw in halfwords)


def assemble(source, base=DEFAULT_FLASH_BASE):
    "Assembles ``source`` text into a :py:class:`Program`"
    return ProgramBuilder(base).emit(source).build()


def _split_operands(text):
    operands = []
    depth = 0
    current = ''
    for char in text:
        if char in '[{':
            depth += 1
        elif char in ']}':
            depth -= 1
        if char == ',' and depth == 0:
            operands.append(current.strip())
            current = ''
        else:
            current += char
    if current.strip():
        operands.append(current.strip())
    return operands


def _evaluate(expression, symbols, here):
    expression = expression.strip()
    if expression.startswith('#'):
        expression = expression[1:]
    terms = _TERM.findall(expression)
    if not terms:
        raise AssemblerError('Empty expression')
    total = 0
    sign = 1
    for term in terms:
        if term == '-':
            sign = -sign
            continue
        if term == '+':
            continue
        if term == '.':
            value = here
        elif term in symbols:
            value = symbols[term]
        else:
            try:
                value = int(term, 0)
            except ValueError:
                raise AssemblerError('Undefined symbol `%s`' % term)
        total += sign * value
        sign = 1
    return total


class _Encoder:
    "Encodes one instruction statement"

    def __init__(self, builder, statement, address, symbols):
        self.builder = builder
        self.statement = statement
        self.address = address
        self.symbols = symbols
        self.operands = statement.operands

    def error(self, message):
        return self.builder._error(self.statement, message)

    def encode(self):
        name = self.statement.name
        method = getattr(self, 'encode_' + name, None)
        if method is not None:
            return method()
        if name in FIXED:
            self.expect(0)
            return [FIXED[name]]
        if name in DATA_PROCESSING:
            return self.encode_data_processing(DATA_PROCESSING[name])
        if name in LOAD_STORE:
            return self.encode_load_store(name)
        if name in EXTENDS or name in REVERSES:
            self.expect(2)
            rd, rm = self.low(0), self.low(1)
            return [(EXTENDS.get(name) or REVERSES[name]) | (rm << 3) | rd]
        if name in SHIFTS:
            return self.encode_shift(name)
        if name.startswith('b') and name[1:] in CONDITION_CODES:
            return self.encode_conditional(CONDITION_CODES[name[1:]])
        raise UnknownMnemonicError('Unknown mnemonic `%s` on line %s'
                                   % (name, self.statement.line))

    # operand helpers
    def expect(self, *counts):
        if len(self.operands) not in counts:
            raise self.error('Wrong number of operands')

    def register(self, index):
        try:
            return REGISTERS[self.operands[index].lower()]
        except (KeyError, IndexError):
            raise self.error('Expected a register')

    def low(self, index):
        reg = self.register(index)
        if reg > 7:
            raise self.error('Expected a low register')
        return reg

    def is_immediate(self, index):
        return self.operands[index].startswith('#')

    def immediate(self, index, limit, scale=1):
        value = _evaluate(self.operands[index], self.symbols, self.address)
        if value % scale or not 0 <= value // scale < limit:
            raise self.error('Immediate %d out of range' % value)
        return value // scale

    def target(self, index):
        return _evaluate(self.operands[index], self.symbols, self.address)

    def branch_offset(self, index, bits):
        offset = self.target(index) - (self.address + 4)
        limit = 1 << bits
        if offset % 2 or not -limit <= offset < limit:
            raise BranchOutOfRangeError(
                'Branch target out of range on line %s: `%s`'
                % (self.statement.line, self.statement.text))
        return offset

    def register_list(self, index, allowed):
        text = self.operands[index].strip()
        if not (text.startswith('{') and text.endswith('}')):
            raise self.error('Expected a register list')
        registers = set()
        for item in text[1:-1].split(','):
            item = item.strip().lower()
            if not item:
                continue
            if '-' in item:
                first, last = (REGISTERS.get(part.strip())
                               for part in item.split('-'))
                if first is None or last is None:
                    raise self.error('Bad register range')
                registers.update(range(first, last + 1))
            elif item in REGISTERS:
                registers.add(REGISTERS[item])
            else:
                raise self.error('Expected a register')
        if any(reg not in allowed for reg in registers):
            raise self.error('Register not allowed in this list')
        return registers

    def memory(self, index):
        "Parses ``[Rn]``, ``[Rn, #imm]`` or ``[Rn, Rm]``"
        text = self.operands[index].strip()
        if not (text.startswith('[') and text.endswith(']')):
            raise self.error('Expected a memory operand')
        parts = [part.strip() for part in text[1:-1].split(',')]
        base = REGISTERS.get(parts[0].lower())
        if base is None:
            raise self.error('Expected a base register')
        if len(parts) == 1:
            return base, '#0'
        if len(parts) != 2:
            raise self.error('Bad memory operand')
        return base, parts[1]

    # encoders
    def encode_movs(self):
        self.expect(2)
        rd = self.low(0)
        if self.is_immediate(1):
            return [0x2000 | (rd << 8) | self.immediate(1, 256)]
        return [(self.low(1) << 3) | rd]

    def encode_mov(self):
        self.expect(2)
        if self.is_immediate(1):
            raise self.error('Use movs for immediates')
        rd = self.register(0)
        rm = self.register(1)
        return [0x4600 | ((rd & 8) << 4) | (rm << 3) | (rd & 7)]

    def _add_sub(self, flags_t1_reg, t1_imm3, t2_imm8):
        if len(self.operands) == 2:
            if self.is_immediate(1):
                rdn = self.low(0)
                return [t2_imm8 | (rdn << 8) | self.immediate(1, 256)]
            rd = self.low(0)
            return [flags_t1_reg | (self.low(1) << 6) | (rd << 3) | rd]
        self.expect(3)
        rd = self.low(0)
        rn = self.low(1)
        if self.is_immediate(2):
            value = _evaluate(self.operands[2], self.symbols, self.address)
            if 0 <= value < 8:
                return [t1_imm3 | (value << 6) | (rn << 3) | rd]
            if rd == rn:
                return [t2_imm8 | (rd << 8) | self.immediate(2, 256)]
            raise self.error('Immediate %d out of range' % value)
        return [flags_t1_reg | (self.low(2) << 6) | (rn << 3) | rd]

    def encode_adds(self):
        return self._add_sub(0x1800, 0x1C00, 0x3000)

    def encode_subs(self):
        return self._add_sub(0x1A00, 0x1E00, 0x3800)

    def _sp_adjust(self, opcode):
        # add/sub sp, sp, #imm  or  add/sub sp, #imm
        index = len(self.operands) - 1
        return [opcode | self.immediate(index, 128, 4)]

    def encode_add(self):
        self.expect(2, 3)
        rd = self.register(0)
        if rd == SP and self.is_immediate(len(self.operands) - 1):
            return self._sp_adjust(0xB000)
        if len(self.operands) == 3:
            if self.register(1) == SP and self.is_immediate(2):
                return [0xA800 | (self.low(0) << 8)
                        | self.immediate(2, 256, 4)]
            if self.register(1) != rd:
                raise self.error('High-register add needs Rd == Rn')
            rm = self.register(2)
        else:
            rm = self.register(1)
        return [0x4400 | ((rd & 8) << 4) | (rm << 3) | (rd & 7)]

    def encode_sub(self):
        self.expect(2, 3)
        if self.register(0) != SP:
            raise self.error('Use subs for low registers')
        return self._sp_adjust(0xB080)

    def encode_cmp(self):
        self.expect(2)
        rn = self.register(0)
        if self.is_immediate(1):
            if rn > 7:
                raise self.error('Expected a low register')
            return [0x2800 | (rn << 8) | self.immediate(1, 256)]
        rm = self.register(1)
        if rn < 8 and rm < 8:
            return [0x4280 | (rm << 3) | rn]
        return [0x4500 | ((rn & 8) << 4) | (rm << 3) | (rn & 7)]

    def encode_data_processing(self, opcode):
        self.expect(2, 3)
        rdn = self.low(0)
        rm = self.low(len(self.operands) - 1)
        if len(self.operands) == 3 and self.low(1) != rdn:
            raise self.error('Two-operand instruction needs Rd == Rn')
        return [0x4000 | (opcode << 6) | (rm << 3) | rdn]

    def encode_muls(self):
        # muls rd, rm  or  muls rd, rn, rd
        self.expect(2, 3)
        rdm = self.low(0)
        if len(self.operands) == 3:
            if self.low(2) != rdm:
                raise self.error('muls needs Rd == Rm')
            rn = self.low(1)
        else:
            rn = self.low(1)
        return [0x4340 | (rn << 3) | rdm]

    def encode_negs(self):
        self.expect(2)
        return [0x4240 | (self.low(1) << 3) | self.low(0)]

    def encode_rsbs(self):
        self.expect(3)
        if self.immediate(2, 1) != 0:
            raise self.error('rsbs only takes #0')
        return [0x4240 | (self.low(1) << 3) | self.low(0)]

    def encode_shift(self, name):
        t1, opcode = SHIFTS[name]
        self.expect(2, 3)
        rd = self.low(0)
        if len(self.operands) == 3 and self.is_immediate(2):
            rm = self.low(1)
            amount = _evaluate(self.operands[2], self.symbols, self.address)
            limit = 32 if name == 'lsls' else 33
            if not (0 <= amount < limit) or (name != 'lsls' and amount == 0):
                raise self.error('Shift amount %d out of range' % amount)
            return [t1 | ((amount & 0x1F) << 6) | (rm << 3) | rd]
        rm = self.low(len(self.operands) - 1)
        return [0x4000 | (opcode << 6) | (rm << 3) | rd]

    def encode_load_store(self, name):
        register_opcode, immediate_opcode, scale = LOAD_STORE[name]
        self.expect(2)
        rt = self.low(0)
        operand = self.operands[1]
        if name == 'ldr' and operand.startswith('='):
            return [self._literal_load(rt, self.statement.literal.address)]
        if name == 'ldr' and not operand.startswith('['):
            return [self._literal_load(rt, self.target(1))]
        base, offset = self.memory(1)
        if not offset.startswith('#'):
            rm = REGISTERS.get(offset.lower())
            if rm is None or rm > 7 or base > 7:
                raise self.error('Register offset needs low registers')
            return [register_opcode | (rm << 6) | (base << 3) | rt]
        value = _evaluate(offset, self.symbols, self.address)
        if base == PC and name == 'ldr':
            return [self._literal_load(
                rt, ((self.address + 4) & ~3) + value)]
        if base == SP and name in ('ldr', 'str'):
            if value % 4 or not 0 <= value < 1024:
                raise self.error('Offset %d out of range' % value)
            return [(0x9800 if name == 'ldr' else 0x9000) | (rt << 8)
                    | (value // 4)]
        if immediate_opcode is None or base > 7:
            raise self.error('Unsupported addressing mode')
        if value % scale or not 0 <= value // scale < 32:
            raise self.error('Offset %d out of range' % value)
        return [immediate_opcode | ((value // scale) << 6) | (base << 3) | rt]

    def _literal_load(self, rt, target):
        offset = target - ((self.address + 4) & ~3)
        if offset % 4 or not 0 <= offset < 1024:
            raise BranchOutOfRangeError(
                'Literal out of range on line %s: `%s`'
                % (self.statement.line, self.statement.text))
        return 0x4800 | (rt << 8) | (offset // 4)

    def encode_adr(self):
        self.expect(2)
        rd = self.low(0)
        offset = self.target(1) - ((self.address + 4) & ~3)
        if offset % 4 or not 0 <= offset < 1024:
            raise BranchOutOfRangeError(
                'adr target out of range on line %s' % self.statement.line)
        return [0xA000 | (rd << 8) | (offset // 4)]

    def encode_b(self):
        self.expect(1)
        offset = self.branch_offset(0, 11)
        return [0xE000 | ((offset >> 1) & 0x7FF)]

    def encode_conditional(self, cond):
        self.expect(1)
        offset = self.branch_offset(0, 8)
        return [0xD000 | (cond << 8) | ((offset >> 1) & 0xFF)]

    def encode_bl(self):
        self.expect(1)
        offset = self.branch_offset(0, 24)
        s = (offset >> 24) & 1
        i1 = (offset >> 23) & 1
        i2 = (offset >> 22) & 1
        j1 = (1 ^ i1) ^ s
        j2 = (1 ^ i2) ^ s
        return [0xF000 | (s << 10) | ((offset >> 12) & 0x3FF),
                0xD000 | (j1 << 13) | (j2 << 11) | ((offset >> 1) & 0x7FF)]

    def encode_bx(self):
        self.expect(1)
        return [0x4700 | (self.register(0) << 3)]

    def encode_blx(self):
        self.expect(1)
        return [0x4780 | (self.register(0) << 3)]

    def encode_push(self):
        self.expect(1)
        registers = self.register_list(0, set(range(8)) | {LR})
        return [0xB400 | (0x100 if LR in registers else 0)
                | _mask(registers - {LR})]

    def encode_pop(self):
        self.expect(1)
        registers = self.register_list(0, set(range(8)) | {PC})
        return [0xBC00 | (0x100 if PC in registers else 0)
                | _mask(registers - {PC})]

    def _multiple(self, opcode):
        self.expect(2)
        text = self.operands[0].strip()
        rn = REGISTERS.get(text.rstrip('!').strip().lower())
        if rn is None or rn > 7:
            raise self.error('Expected a low base register')
        registers = self.register_list(1, set(range(8)))
        return [opcode | (rn << 8) | _mask(registers)]

    def encode_ldm(self):
        return self._multiple(0xC800)

    def encode_stm(self):
        return self._multiple(0xC000)

    encode_ldmia = encode_ldm
    encode_stmia = encode_stm

    def encode_bkpt(self):
        self.expect(0, 1)
        return [0xBE00 | (self.immediate(0, 256) if self.operands else 0)]

    def encode_svc(self):
        self.expect(1)
        return [0xDF00 | self.immediate(0, 256)]

    def encode_udf(self):
        self.expect(0, 1)
        return [0xDE00 | (self.immediate(0, 256) if self.operands else 0)]

    def encode_cpsid(self):
        return [0xB672]

    def encode_cpsie(self):
        return [0xB662]


def _mask(registers):
    mask = 0
    for reg in registers:
        mask |= 1 << reg
    return mask

