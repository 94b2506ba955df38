"""
Host-side AES-128 and SHA-256 references used to build oracles and
fixtures.
"""
from faultscope.utils import MASK32


SBOX = (
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5,
    0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0,
    0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc,
    0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a,
    0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0,
    0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b,
    0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85,
    0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17,
    0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88,
    0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c,
    0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9,
    0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6,
    0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e,
    0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94,
    0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68,
    0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
)

INV_SBOX = tuple(SBOX.index(i) for i in range(256))

RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36)

ROUNDS = 10
BLOCK_SIZE = 16


def xtime(a):
    return ((a << 1) & 0xff) ^ ((a >> 7) * 0x1b)


def gmul(a, b):
    "Multiplication in GF(2^8)"
    result = 0
    while b:
        if b & 1:
            result ^= a
        a = xtime(a)
        b >>= 1
    return result


# the state is a flat list of 16 bytes in column-major order, so byte
# (row, column) lives at index row + 4 * column
def sub_bytes(state, box=SBOX):
    return [box[b] for b in state]


def shift_rows(state):
    return [state[r + 4 * ((c + r) % 4)] for c in range(4) for r in range(4)]


def inv_shift_rows(state):
    return [state[r + 4 * ((c - r) % 4)] for c in range(4) for r in range(4)]


def _mix(state, coefficients):
    out = []
    for c in range(4):
        column = state[4 * c:4 * c + 4]
        for r in range(4):
            value = 0
            for i in range(4):
                value ^= gmul(column[i], coefficients[(i - r) % 4])
            out.append(value)
    return out


def mix_columns(state):
    return _mix(state, (2, 3, 1, 1))


def inv_mix_columns(state):
    return _mix(state, (14, 11, 13, 9))


def add_round_key(state, key):
    return [a ^ b for a, b in zip(state, key)]


def expand_key(key):
    "Returns the 11 AES-128 round keys as 16-byte ``bytes``"
    key = bytes(key)
    if len(key) != 16:
        raise ValueError('AES-128 keys are 16 bytes, got %d' % len(key))
    words = [list(key[i:i + 4]) for i in range(0, 16, 4)]
    for i in range(4, 4 * (ROUNDS + 1)):
        word = list(words[i - 1])
        if i % 4 == 0:
            word = word[1:] + word[:1]
            word = [SBOX[b] for b in word]
            word[0] ^= RCON[i // 4 - 1]
        words.append([a ^ b for a, b in zip(word, words[i - 4])])
    return [bytes(sum(words[4 * r:4 * r + 4], []))
            for r in range(ROUNDS + 1)]


class AesReference:
    """
    AES-128 with access to the intermediate states.

    ``round_inputs(plaintext)`` returns 11 states: index 0 is the plaintext
    and index ``r`` (1-10) the state entering round ``r``, that is after the
    AddRoundKey that closes round ``r - 1``. Round 10 has no MixColumns.
    """

    def __init__(self, key):
        self.key = bytes(key)
        self.round_keys = expand_key(self.key)

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__, self.key.hex())

    def _check(self, block):
        block = bytes(block)
        if len(block) != BLOCK_SIZE:
            raise ValueError('AES blocks are 16 bytes, got %d' % len(block))
        return block

    def _rounds(self, state, first_round, fault=None):
        keys = self.round_keys
        inputs = []
        for r in range(first_round, ROUNDS + 1):
            if fault is not None and fault[0] == r:
                state = list(state)
                state[fault[1]] ^= fault[2]
            inputs.append(bytes(state))
            state = shift_rows(sub_bytes(state))
            if r != ROUNDS:
                state = mix_columns(state)
            state = add_round_key(state, keys[r])
        return bytes(state), inputs

    def round_inputs(self, plaintext):
        plaintext = self._check(plaintext)
        state = add_round_key(plaintext, self.round_keys[0])
        inputs = self._rounds(state, 1)[1]
        return [plaintext] + inputs

    def encrypt(self, plaintext):
        plaintext = self._check(plaintext)
        state = add_round_key(plaintext, self.round_keys[0])
        return self._rounds(state, 1)[0]

    def forward_inject(self, plaintext, round, position, value):
        """
        Encrypts ``plaintext`` with ``value`` XORed into byte ``position`` of
        the state entering ``round`` (1-10).
        """
        if not 1 <= round <= ROUNDS:
            raise ValueError('Rounds are numbered 1-%d' % ROUNDS)
        plaintext = self._check(plaintext)
        state = add_round_key(plaintext, self.round_keys[0])
        return self._rounds(state, 1, fault=(round, position, value))[0]

    def backward_round_inputs(self, ciphertext):
        """
        Computes the round input states backwards from ``ciphertext``. The
        result is indexed like :py:meth:`round_inputs`.
        """
        keys = self.round_keys
        state = add_round_key(self._check(ciphertext), keys[ROUNDS])
        state = sub_bytes(inv_shift_rows(state), INV_SBOX)
        inputs = [bytes(state)]
        for r in range(ROUNDS - 1, 0, -1):
            state = inv_mix_columns(add_round_key(state, keys[r]))
            state = sub_bytes(inv_shift_rows(state), INV_SBOX)
            inputs.append(bytes(state))
        inputs.append(bytes(add_round_key(state, keys[0])))
        inputs.reverse()
        return inputs

    def decrypt(self, ciphertext):
        return self.backward_round_inputs(ciphertext)[0]


def _integer_root(n, k):
    "floor(n ** (1 / k)) for non-negative integers"
    if n < 2:
        return n
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def _primes(count):
    primes = []
    candidate = 2
    while len(primes) < count:
        if all(candidate % p for p in primes):
            primes.append(candidate)
        candidate += 1
    return primes


_PRIMES = _primes(64)
SHA256_K = tuple(_integer_root(p << 96, 3) & MASK32 for p in _PRIMES)
SHA256_H = tuple(_integer_root(p << 64, 2) & MASK32 for p in _PRIMES[:8])


def _rotr(x, n):
    return ((x >> n) | (x << (32 - n))) & MASK32


class Sha256Reference:
    """
    SHA-256 built from its compression function, so that the unpadded
    variant used by some bootloaders is available too.
    """
    block_size = 64
    digest_size = 32

    def compress(self, state, block):
        "Returns the chaining state after one 64-byte ``block``"
        w = [int.from_bytes(block[i:i + 4], 'big') for i in range(0, 64, 4)]
        for i in range(16, 64):
            s0 = _rotr(w[i - 15], 7) ^ _rotr(w[i - 15], 18) ^ (w[i - 15] >> 3)
            s1 = _rotr(w[i - 2], 17) ^ _rotr(w[i - 2], 19) ^ (w[i - 2] >> 10)
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & MASK32)
        a, b, c, d, e, f, g, h = state
        for i in range(64):
            s1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
            choice = (e & f) ^ (~e & g)
            t1 = (h + s1 + choice + SHA256_K[i] + w[i]) & MASK32
            s0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
            majority = (a & b) ^ (a & c) ^ (b & c)
            t2 = (s0 + majority) & MASK32
            h, g, f, e = g, f, e, (d + t1) & MASK32
            d, c, b, a = c, b, a, (t1 + t2) & MASK32
        return tuple((x + y) & MASK32
                     for x, y in zip(state, (a, b, c, d, e, f, g, h)))

    def pad(self, message):
        message = bytes(message)
        length = len(message) * 8
        padding = b'\x80' + bytes((55 - len(message)) % 64)
        return message + padding + length.to_bytes(8, 'big')

    def _digest_blocks(self, data):
        state = SHA256_H
        for i in range(0, len(data), self.block_size):
            state = self.compress(state, data[i:i + self.block_size])
        return b''.join(x.to_bytes(4, 'big') for x in state)

    def digest(self, message):
        return self._digest_blocks(self.pad(message))

    def hexdigest(self, message):
        return self.digest(message).hex()

    def unpadded_digest(self, message):
        """
        Runs the compression function over ``message`` without the final
        padding block. The length must be a multiple of 64 bytes.
        """
        message = bytes(message)
        if len(message) % self.block_size:
            raise ValueError('Unpadded SHA-256 needs a multiple of %d bytes'
                             % self.block_size)
        return self._digest_blocks(message)


def sha256(message):
    return Sha256Reference().digest(message)
