import io
import json
import struct

import pytest

from faultscope.emulator import (
    DEFAULT_FLASH_BASE,
    DEFAULT_RAM_BASE,
    DEFAULT_RAM_SIZE,
)
from faultscope.exceptions import ConfigError, ImageError
from faultscope.loader import (
    is_elf,
    load_binary,
    load_elf,
    load_image,
    load_symbols,
)
from faultscope.testkit import assemble


RAM_TOP = DEFAULT_RAM_BASE + DEFAULT_RAM_SIZE

STT_OBJECT = 1
STT_FUNC = 2
STB_GLOBAL = 1
SHN_ABS = 0xFFF1


def build_elf(segments, entry, symbols=()):
    """
    Writes a little-endian ELF32 ARM executable.

    ``segments`` is a list of ``(address, data, memsz)`` tuples and
    ``symbols`` a list of ``(name, value, type)`` tuples.
    """
    shstrtab = b'\0.shstrtab\0.symtab\0.strtab\0'
    strtab = b'\0'
    symtab = bytes(16)
    for name, value, kind in symbols:
        offset = len(strtab)
        strtab += name.encode() + b'\0'
        symtab += struct.pack('<IIIBBH', offset, value, 0,
                              (STB_GLOBAL << 4) | kind, 0, SHN_ABS)

    phoff = 52
    offset = phoff + 32 * len(segments)
    program_headers = b''
    contents = b''
    for address, data, memsz in segments:
        program_headers += struct.pack('<IIIIIIII', 1, offset + len(contents),
                                       address, address, len(data), memsz,
                                       5, 4)
        contents += data + bytes((-len(data)) % 4)
    offset += len(contents)

    tables = b''
    placed = []
    for table in (shstrtab, symtab, strtab):
        placed.append((offset + len(tables), len(table)))
        tables += table + bytes((-len(table)) % 4)
    shoff = offset + len(tables)

    section_headers = bytes(40)
    section_headers += struct.pack('<IIIIIIIIII', 1, 3, 0, 0,
                                   placed[0][0], placed[0][1], 0, 0, 1, 0)
    section_headers += struct.pack('<IIIIIIIIII', 11, 2, 0, 0,
                                   placed[1][0], placed[1][1], 3, 1, 4, 16)
    section_headers += struct.pack('<IIIIIIIIII', 19, 3, 0, 0,
                                   placed[2][0], placed[2][1], 0, 0, 1, 0)

    ident = b'\x7fELF' + bytes([1, 1, 1, 0]) + bytes(8)
    header = ident + struct.pack('<HHIIIIIHHHHHH', 2, 40, 1, entry, phoff,
                                 shoff, 0x05000200, 52, 32, len(segments),
                                 40, 4, 1)
    return header + program_headers + contents + tables + section_headers


@pytest.fixture()
def program():
    return assemble('''
        start:
            movs r0, #5
        done:
            b done
    ''')


class TestLoadBinary:
    def test_vector_table_boot(self):
        image = struct.pack('<II', 0x20001000, 0x8009) + bytes.fromhex(
            '0520fee7')
        emu = load_binary(image)
        assert emu.sp == 0x20001000
        assert emu.pc == 0x8008
        assert emu.flags['t'] == 1
        assert emu.read_memory(0x8008, 2) == bytes.fromhex('0520')

    def test_explicit_boot(self, program):
        emu = load_binary(program.image,
                          boot={'pc': '0x8000', 'sp': 0x20000800})
        assert (emu.pc, emu.sp) == (0x8000, 0x20000800)

    def test_explicit_boot_masks_thumb_bit(self, program):
        emu = load_binary(program.image, boot={'pc': 0x8001, 'sp': 0x2000})
        assert emu.pc == 0x8000

    def test_other_base(self):
        image = assemble('b .', base=0x10000).image
        emu = load_binary(image, base=0x10000,
                          boot={'pc': 0x10000, 'sp': RAM_TOP})
        assert emu.memory.flash.base == 0x10000
        assert emu.decode_at(0x10000).op == 'b'

    def test_symbols_are_attached(self, program):
        emu = load_binary(program.image, boot={'pc': 0x8000, 'sp': RAM_TOP},
                          symbols=program.symbols)
        assert emu.resolve('done') == 0x8002

    def test_image_too_small_for_vector_table(self):
        with pytest.raises(ImageError):
            load_binary(b'\x00\x00')

    def test_image_too_large(self):
        with pytest.raises(ImageError):
            load_binary(bytes(0x100), flash_size=0x80)

    def test_unaligned_base(self):
        with pytest.raises(ImageError):
            load_binary(bytes(8), base=0x8002)

    @pytest.mark.parametrize('boot', ['reset', {'pc': 1}, {'pc': 'x',
                                                           'sp': 0}])
    def test_bad_boot(self, boot):
        with pytest.raises(ConfigError):
            load_binary(bytes(8), boot=boot)


class TestLoadElf:
    def test_segments_entry_and_symbols(self, program):
        data = build_elf(
            [(DEFAULT_FLASH_BASE, program.image, len(program.image)),
             (DEFAULT_RAM_BASE, b'\x11\x22', 8)],
            entry=DEFAULT_FLASH_BASE | 1,
            symbols=[('start', DEFAULT_FLASH_BASE | 1, STT_FUNC),
                     ('counter', DEFAULT_RAM_BASE, STT_OBJECT)])
        assert is_elf(data)
        emu = load_elf(io.BytesIO(data))
        assert emu.pc == DEFAULT_FLASH_BASE
        assert emu.sp == RAM_TOP
        assert emu.memory.flash.base == DEFAULT_FLASH_BASE
        assert emu.read_memory(DEFAULT_FLASH_BASE, len(program.image)) \
            == program.image
        # bss tail is zero-filled
        assert emu.read_memory(DEFAULT_RAM_BASE, 8) == b'\x11\x22' + bytes(6)
        assert emu.symbols == {'start': DEFAULT_FLASH_BASE,
                               'counter': DEFAULT_RAM_BASE}

    def test_explicit_stack_pointer(self, program):
        data = build_elf([(0x9000, program.image, len(program.image))],
                         entry=0x9001)
        emu = load_elf(io.BytesIO(data), sp=0x20000400)
        assert emu.sp == 0x20000400
        assert emu.memory.flash.base == 0x9000

    def test_not_an_elf_file(self):
        with pytest.raises(ImageError):
            load_elf(io.BytesIO(b'\x7fELF' + bytes(12)))

    def test_segment_outside_memory(self, program):
        data = build_elf([(DEFAULT_FLASH_BASE, program.image, 4),
                          (0x60000000, b'\x00' * 4, 4)],
                         entry=DEFAULT_FLASH_BASE)
        with pytest.raises(ImageError):
            load_elf(io.BytesIO(data))

    def test_only_ram_segments(self):
        data = build_elf([(DEFAULT_RAM_BASE, bytes(4), 4)],
                         entry=DEFAULT_RAM_BASE)
        with pytest.raises(ImageError):
            load_elf(io.BytesIO(data))

    def test_runs_after_loading(self, program):
        data = build_elf([(DEFAULT_FLASH_BASE, program.image,
                           len(program.image))],
                         entry=DEFAULT_FLASH_BASE | 1,
                         symbols=[('done', 0x8003, STT_FUNC)])
        emu = load_elf(io.BytesIO(data))
        emu.run_until([emu.resolve('done')], 5)
        assert emu.regs[0] == 5


class TestLoadImage:
    def test_detects_elf(self, tmpdir, program):
        path = tmpdir.join('firmware.elf')
        path.write_binary(build_elf(
            [(DEFAULT_FLASH_BASE, program.image, len(program.image))],
            entry=DEFAULT_FLASH_BASE))
        emu = load_image(str(path), boot='vector-table')
        assert emu.pc == DEFAULT_FLASH_BASE

    def test_flat_image(self, tmpdir, program):
        path = tmpdir.join('firmware.bin')
        path.write_binary(program.image)
        emu = load_image(str(path), boot={'pc': 0x8000, 'sp': RAM_TOP},
                         sp=0x1234)
        assert emu.read_memory(0x8000, 4) == program.image

    def test_forced_format(self, tmpdir, program):
        path = tmpdir.join('firmware.elf')
        path.write_binary(program.image)
        with pytest.raises(ImageError):
            load_image(str(path), format='elf')

    def test_unknown_format(self, tmpdir, program):
        path = tmpdir.join('firmware.hex')
        path.write_binary(program.image)
        with pytest.raises(ConfigError):
            load_image(str(path), format='ihex')

    def test_missing_file(self, tmpdir):
        with pytest.raises(ConfigError):
            load_image(str(tmpdir.join('missing.bin')))


class TestLoadSymbols:
    def test_json_map(self, tmpdir):
        path = tmpdir.join('symbols.json')
        path.write(json.dumps({'main': '0x8000', 'check': 32790}))
        assert load_symbols(str(path)) == {'main': 0x8000, 'check': 0x8016}

    def test_nm_output(self, tmpdir):
        path = tmpdir.join('symbols.txt')
        path.write('# produced by nm\n'
                   '00008000 T main\n'
                   '\n'
                   '20000000 counter\n')
        assert load_symbols(str(path)) == {'main': 0x8000,
                                           'counter': 0x20000000}

    def test_malformed_line(self, tmpdir):
        path = tmpdir.join('symbols.txt')
        path.write('00008000 T main extra words\n')
        with pytest.raises(ConfigError):
            load_symbols(str(path))

    def test_bad_address(self, tmpdir):
        path = tmpdir.join('symbols.txt')
        path.write('zzzz T main\n')
        with pytest.raises(ConfigError):
            load_symbols(str(path))

    def test_malformed_json(self, tmpdir):
        path = tmpdir.join('symbols.json')
        path.write('{"main": ')
        with pytest.raises(ConfigError):
            load_symbols(str(path))
