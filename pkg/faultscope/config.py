"""
Campaign configuration files.

A campaign is described by a JSON object, for example::

    {
        "binary": "bootloader.bin",
        "base": "0x8000",
        "symbols": "bootloader.map",
        "models": "standard",
        "oracle": {"name": "address-reached", "target": "execute_firmware"},
        "halting_points": ["report_error"],
        "timeout": 20000,
        "max_order": 2
    }

Paths are relative to the file. Integers may be written in decimal or as
``0x`` strings; addresses may also be symbol names.
"""
import json
import logging
import os

from faultscope.decoder import V6M
from faultscope.emulator import (
    DEFAULT_FLASH_BASE,
    DEFAULT_FLASH_SIZE,
    DEFAULT_RAM_BASE,
    DEFAULT_RAM_SIZE,
    HALTING_POINT,
)
from faultscope.exceptions import ConfigError
from faultscope.loader import VECTOR_TABLE, load_image, load_symbols
from faultscope.utils import to_bool, to_int


logger = logging.getLogger(__name__)


DEFAULT_TIMEOUT = 10000
DEFAULT_PROGRESS_INTERVAL = 10000
WORKERS_ENV = 'FAULTSCOPE_WORKERS'


def _positive(value):
    value = to_int(value)
    if value < 1:
        raise ValueError('must be positive')
    return value


def _choice(*choices):
    def parse(value):
        if value not in choices:
            raise ValueError('expected one of %s' % ', '.join(choices))
        return value
    return parse


CONFIG_ARGUMENT_PARSERS = {
    'timeout': _positive,
    'max_order': _positive,
    'workers': _positive,
    'progress_interval': to_int,
    'account_pruned': to_bool,
    'base': to_int,
    'backend': _choice('thread', 'process'),
    'format': _choice('flat', 'elf'),
    'arch': _choice(V6M, 'v7m-subset'),
}

KNOWN_KEYS = frozenset(CONFIG_ARGUMENT_PARSERS) | frozenset((
    'binary', 'boot', 'profile', 'flash', 'ram', 'symbols', 'models',
    'oracle', 'halting_points', 'excluded_ranges', 'preload', 'start',
))


def parse_value(name, value):
    "Casts ``value`` with the parser registered for ``name``"
    parser = CONFIG_ARGUMENT_PARSERS.get(name)
    if parser is None:
        return value
    try:
        return parser(value)
    except (TypeError, ValueError):
        raise ConfigError('Invalid value for `%s` in campaign config.' % name)


def _region(data, name, default_base, default_size):
    region = data.get(name) or {}
    if not isinstance(region, dict):
        raise ConfigError('Invalid value for `%s` in campaign config.' % name)
    try:
        base = region.get('base', default_base)
        return (to_int(base) if base is not None else None,
                to_int(region.get('size', default_size)))
    except (TypeError, ValueError):
        raise ConfigError('Invalid value for `%s` in campaign config.' % name)


def _relative(path, root):
    if root is None or os.path.isabs(path):
        return path
    return os.path.join(root, path)


def apply_preload(emu, preload):
    "Writes each ``address``/``hex`` item of ``preload`` into flash or RAM"
    for item in preload or ():
        try:
            address = emu.resolve(item['address'])
            data = bytes.fromhex(item['hex'].replace(' ', ''))
        except (KeyError, TypeError, ValueError, AttributeError):
            raise ConfigError('Invalid value for `preload` in campaign '
                              'config.')
        emu.memory.write_bytes(address, data)
        logger.debug('preloaded %d bytes at 0x%08x', len(data), address)
    return emu


def advance_to(emu, location, hits=1, budget=DEFAULT_TIMEOUT):
    """
    Runs ``emu`` until it is about to execute ``location`` for the
    ``hits``-th time. Raises :py:class:`~faultscope.exceptions.ConfigError`
    when that does not happen within ``budget`` instructions.
    """
    address = emu.resolve(location)
    if hits < 1:
        raise ConfigError('Invalid value for `start` in campaign config.')
    remaining = budget
    for seen in range(1, hits + 1):
        outcome = emu.run_until((address,), remaining) if remaining > 0 \
            else None
        if outcome is None or outcome.kind != HALTING_POINT:
            raise ConfigError('Start address 0x%08x was reached %d of %d '
                              'times' % (address, seen - 1, hits))
        remaining -= outcome.executed
        if seen < hits:
            step = emu.step()
            if step.error is not None:
                raise ConfigError('Run to the start address failed: %s'
                                  % step.error)
            remaining -= 1
    logger.info('start state: 0x%08x after %d instructions', address,
                emu.instr_count)
    return emu


def prepare_emulator(data, root=None):
    """
    Loads the binary of a parsed config and applies ``preload`` and
    ``start``. Returns the emulator a campaign starts from.
    """
    if not data.get('binary'):
        raise ConfigError('Campaign config needs a `binary`')
    flash_base, flash_size = _region(data, 'flash', None, DEFAULT_FLASH_SIZE)
    ram_base, ram_size = _region(data, 'ram', DEFAULT_RAM_BASE,
                                 DEFAULT_RAM_SIZE)
    symbols = data.get('symbols')
    if isinstance(symbols, str):
        symbols = load_symbols(_relative(symbols, root))
    elif symbols is not None:
        try:
            symbols = dict((name, to_int(value))
                           for name, value in symbols.items())
        except (AttributeError, TypeError, ValueError):
            raise ConfigError('Invalid value for `symbols` in campaign '
                              'config.')
    base = data.get('base')
    if base is None:
        base = flash_base if flash_base is not None else DEFAULT_FLASH_BASE
    path = _relative(data['binary'], root)
    emu = load_image(path, format=data.get('format'),
                     base=base, boot=data.get('boot', VECTOR_TABLE),
                     arch=data.get('arch', V6M), profile=data.get('profile'),
                     flash_base=flash_base, flash_size=flash_size,
                     ram_base=ram_base, ram_size=ram_size, symbols=symbols)
    if symbols:
        emu.symbols.update(symbols)
    apply_preload(emu, data.get('preload'))
    start = data.get('start')
    if start is not None:
        if not isinstance(start, dict) or 'address' not in start:
            raise ConfigError('Invalid value for `start` in campaign config.')
        try:
            hits = to_int(start.get('hits', 1))
        except (TypeError, ValueError):
            raise ConfigError('Invalid value for `start` in campaign config.')
        advance_to(emu, start['address'], hits,
                   data.get('timeout', DEFAULT_TIMEOUT))
    return emu


def parse_config(data, root=None):
    """
    Validates a config dict and returns the keyword arguments of
    :py:class:`~faultscope.campaign.CampaignConfig`.
    """
    if not isinstance(data, dict):
        raise ConfigError('A campaign config must be a JSON object')
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError('Unknown campaign config key(s): %s'
                          % ', '.join(unknown))
    data = dict((name, parse_value(name, value))
                for name, value in data.items())
    emulator = prepare_emulator(data, root)
    models = data.get('models', 'standard')
    if isinstance(models, str):
        candidate = _relative(models, root)
        if os.path.exists(candidate):
            models = candidate
    if 'oracle' not in data:
        raise ConfigError('Campaign config needs an `oracle`')
    ranges = []
    for item in data.get('excluded_ranges') or ():
        if isinstance(item, dict):
            item = (item.get('start'), item.get('end'))
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError('Invalid value for `excluded_ranges` in '
                              'campaign config.')
        ranges.append(tuple(item))
    kwargs = {
        'emulator': emulator,
        'models': models,
        'oracle': data['oracle'],
        'halting_points': data.get('halting_points') or (),
        'excluded_ranges': ranges,
        'binary': data['binary'],
    }
    for name in ('timeout', 'max_order', 'workers', 'backend',
                 'account_pruned', 'progress_interval'):
        if name in data:
            kwargs[name] = data[name]
    return kwargs


def load_config(path, **overrides):
    """
    Reads the JSON config at ``path``. Keyword arguments that are not
    ``None`` replace the corresponding keys of the file.
    """
    try:
        with open(path) as fp:
            data = json.load(fp)
    except OSError as e:
        raise ConfigError('Cannot read campaign config %s: %s' % (path, e))
    except ValueError as e:
        raise ConfigError('Campaign config %s is not valid JSON: %s'
                          % (path, e))
    if not isinstance(data, dict):
        raise ConfigError('A campaign config must be a JSON object')
    for name, value in overrides.items():
        if value is not None:
            data[name] = value
    return parse_config(data, os.path.dirname(os.path.abspath(path)))


def workers_from_env(default=1):
    "The worker count from ``FAULTSCOPE_WORKERS``, or ``default``"
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return default
    try:
        return _positive(value)
    except (TypeError, ValueError):
        raise ConfigError('Invalid value for `%s` in the environment.'
                          % WORKERS_ENV)
