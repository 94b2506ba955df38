try:
    import unicorn  # noqa
    UNICORN_AVAILABLE = True
except ImportError:
    UNICORN_AVAILABLE = False


MASK32 = 0xFFFFFFFF

FALSE_STRINGS = ('0', 'F', 'FALSE', 'N', 'NO', 'OFF')


def u32(value):
    return value & MASK32


def sign_extend(value, bits):
    "Interprets the low ``bits`` of ``value`` as a two's complement number"
    sign = 1 << (bits - 1)
    value &= (1 << bits) - 1
    return (value ^ sign) - sign


def bit_count(value):
    return bin(value).count('1')


def to_int(value):
    """
    Casts ``value`` to an int. Strings may be decimal or carry a 0x/0b
    prefix; bools are rejected.
    """
    if isinstance(value, bool):
        raise TypeError('booleans are not integers here')
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return int(value.strip().replace('_', ''), 0)
    raise TypeError('cannot convert %r to int' % (value,))


def to_bool(value):
    if value is None or value == '':
        return None
    if isinstance(value, str) and value.upper() in FALSE_STRINGS:
        return False
    return bool(value)


def hex_or_none(value):
    return None if value is None else '0x%08x' % value


def chunks(data, size):
    for offset in range(0, len(data), size):
        yield data[offset:offset + size]
