"""
Loading firmware images into an :py:class:`~faultscope.emulator.Emulator`.

Flat images are placed at a base address in flash; ELF files contribute
their ``PT_LOAD`` segments (at their physical addresses), their entry point
and their symbol table.
"""
import json
import logging
import os

from elftools.common.exceptions import ELFError
from elftools.elf.elffile import ELFFile

from faultscope.decoder import PC, SP, V6M
from faultscope.emulator import (
    DEFAULT_FLASH_BASE,
    DEFAULT_FLASH_SIZE,
    DEFAULT_RAM_BASE,
    DEFAULT_RAM_SIZE,
    T_BIT,
    Emulator,
)
from faultscope.exceptions import ConfigError, ImageError, MemoryAccessError
from faultscope.utils import to_int, u32


logger = logging.getLogger(__name__)


VECTOR_TABLE = 'vector-table'
ELF_MAGIC = b'\x7fELF'
FLAT = 'flat'
ELF = 'elf'


def is_elf(data):
    return bytes(data[:4]) == ELF_MAGIC


def _parse_boot(boot):
    if boot is None or boot == VECTOR_TABLE:
        return None
    if isinstance(boot, dict):
        try:
            return to_int(boot['pc']), to_int(boot['sp'])
        except (KeyError, TypeError, ValueError):
            raise ConfigError('Invalid value for `boot`: expected '
                              '"vector-table" or {"pc": ..., "sp": ...}')
    raise ConfigError('Invalid value for `boot`: %r' % (boot,))


def load_binary(image, base=DEFAULT_FLASH_BASE, boot=VECTOR_TABLE, arch=V6M,
                profile=None, flash_size=DEFAULT_FLASH_SIZE,
                ram_base=DEFAULT_RAM_BASE, ram_size=DEFAULT_RAM_SIZE,
                symbols=None):
    """
    Creates an emulator with the flat ``image`` placed at ``base``.

    ``boot`` is either ``"vector-table"`` (initial SP is the first word of
    the image, the reset vector the second) or a ``{"pc", "sp"}`` dict. The
    flash region starts at ``base``.
    """
    image = bytes(image)
    if base % 4:
        raise ImageError('Image base 0x%x is not word-aligned' % base)
    if len(image) > flash_size:
        raise ImageError('Image of %d bytes does not fit in %d bytes of flash'
                         % (len(image), flash_size))
    explicit = _parse_boot(boot)
    emu = Emulator(arch=arch, profile=profile, flash_base=base,
                   flash_size=flash_size, ram_base=ram_base,
                   ram_size=ram_size)
    emu.memory.write_bytes(base, image)
    if explicit is None:
        if len(image) < 8:
            raise ImageError('Vector-table boot needs at least 8 bytes')
        sp = int.from_bytes(image[0:4], 'little')
        pc = int.from_bytes(image[4:8], 'little')
    else:
        pc, sp = explicit
    emu.regs[SP] = u32(sp) & ~3
    emu.regs[PC] = u32(pc) & ~1
    emu.xpsr |= T_BIT
    if symbols:
        emu.symbols.update(symbols)
    logger.debug('loaded %d byte image at 0x%08x, pc=0x%08x sp=0x%08x',
                 len(image), base, emu.pc, emu.sp)
    return emu


def load_elf(source, arch=V6M, profile=None, flash_base=None,
             flash_size=DEFAULT_FLASH_SIZE, ram_base=DEFAULT_RAM_BASE,
             ram_size=DEFAULT_RAM_SIZE, sp=None):
    """
    Creates an emulator from an ELF file path or binary stream.

    Only ``PT_LOAD`` segments are loaded. The PC comes from the entry point
    in the header; SP defaults to the top of RAM.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, 'rb') as fp:
            return load_elf(fp, arch=arch, profile=profile,
                            flash_base=flash_base, flash_size=flash_size,
                            ram_base=ram_base, ram_size=ram_size, sp=sp)
    try:
        elffile = ELFFile(source)
        segments = [(segment['p_paddr'], segment['p_memsz'], segment.data())
                    for segment in elffile.iter_segments()
                    if segment['p_type'] == 'PT_LOAD']
        entry = elffile.header['e_entry']
        symbols = _elf_symbols(elffile)
    except ELFError as e:
        raise ImageError('Not a loadable ELF file: %s' % e)
    if not segments:
        raise ImageError('ELF file has no PT_LOAD segments')
    ram_end = ram_base + ram_size
    if flash_base is None:
        outside_ram = [address for address, _, _ in segments
                       if not ram_base <= address < ram_end]
        if not outside_ram:
            raise ImageError('ELF file has no segment outside RAM')
        flash_base = min(outside_ram) & ~3
    emu = Emulator(arch=arch, profile=profile, flash_base=flash_base,
                   flash_size=flash_size, ram_base=ram_base,
                   ram_size=ram_size)
    for address, memsz, data in segments:
        if memsz == 0:
            continue
        contents = data + bytes(max(0, memsz - len(data)))
        try:
            emu.memory.region(address, len(contents))
        except MemoryAccessError:
            raise ImageError('Segment at 0x%08x (%d bytes) is outside flash '
                             'and RAM' % (address, len(contents)))
        emu.memory.write_bytes(address, contents)
    emu.regs[PC] = entry & ~1
    emu.regs[SP] = u32(ram_end if sp is None else sp) & ~3
    emu.xpsr |= T_BIT
    emu.symbols.update(symbols)
    logger.debug('loaded ELF with %d segments, entry 0x%08x, %d symbols',
                 len(segments), emu.pc, len(symbols))
    return emu


def _elf_symbols(elffile):
    symtab = elffile.get_section_by_name('.symtab')
    if symtab is None:
        logger.warning('ELF file has no symbol table; was it stripped?')
        return {}
    symbols = {}
    for symbol in symtab.iter_symbols():
        kind = symbol['st_info']['type']
        if not symbol.name or kind in ('STT_SECTION', 'STT_FILE'):
            continue
        value = symbol['st_value']
        if kind == 'STT_FUNC':
            value &= ~1
        symbols.setdefault(symbol.name, value)
    return symbols


def load_symbols(path):
    """
    Reads a symbol map. Either a JSON object of name -> address, or
    ``nm``-style text lines (``address [type] name``).
    """
    try:
        with open(path) as fp:
            text = fp.read()
    except OSError as e:
        raise ConfigError('Cannot read symbol map %s: %s' % (path, e))
    if text.lstrip().startswith('{'):
        try:
            return dict((name, to_int(address))
                        for name, address in json.loads(text).items())
        except (ValueError, TypeError) as e:
            raise ConfigError('Malformed symbol map %s: %s' % (path, e))
    symbols = {}
    for number, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith('#'):
            continue
        if len(parts) not in (2, 3):
            raise ConfigError('Malformed symbol map %s, line %d'
                              % (path, number))
        try:
            address = int(parts[0], 16)
        except ValueError:
            raise ConfigError('Malformed symbol map %s, line %d'
                              % (path, number))
        symbols[parts[-1]] = address
    return symbols


def load_image(path, format=None, **kwargs):
    """
    Loads ``path`` as ELF or flat binary. ``format`` is ``elf``, ``flat`` or
    ``None`` to detect ELF files by their magic number. ``kwargs`` go to
    :py:func:`load_elf` or :py:func:`load_binary`.
    """
    try:
        with open(path, 'rb') as fp:
            data = fp.read()
    except OSError as e:
        raise ConfigError('Cannot read binary %s: %s' % (path, e))
    if format is None:
        format = ELF if is_elf(data) else FLAT
    if format == ELF:
        kwargs.pop('base', None)
        kwargs.pop('boot', None)
        kwargs.pop('symbols', None)
        with open(path, 'rb') as fp:
            return load_elf(fp, **kwargs)
    if format != FLAT:
        raise ConfigError('Invalid value for `format`: %r' % (format,))
    kwargs.pop('flash_base', None)
    kwargs.pop('sp', None)
    return load_binary(data, **kwargs)
