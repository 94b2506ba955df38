import hashlib

import pytest

from faultscope.crypto import (
    INV_SBOX,
    SBOX,
    AesReference,
    Sha256Reference,
    expand_key,
    gmul,
    inv_mix_columns,
    mix_columns,
    sha256,
    xtime,
)


FIPS_KEY = bytes(range(16))
FIPS_PLAINTEXT = bytes.fromhex('00112233445566778899aabbccddeeff')
FIPS_CIPHERTEXT = bytes.fromhex('69c4e0d86a7b0430d8cdb78070b4c55a')


class TestAesReference:
    def test_known_answer(self):
        assert AesReference(FIPS_KEY).encrypt(FIPS_PLAINTEXT) == \
            FIPS_CIPHERTEXT

    def test_decrypt(self):
        assert AesReference(FIPS_KEY).decrypt(FIPS_CIPHERTEXT) == \
            FIPS_PLAINTEXT

    def test_key_schedule(self):
        keys = expand_key(bytes.fromhex('2b7e151628aed2a6abf7158809cf4f3c'))
        assert len(keys) == 11
        assert keys[1] == bytes.fromhex('a0fafe1788542cb123a339392a6c7605')
        assert keys[10] == bytes.fromhex('d014f9a8c9ee2589e13f0cc8b6630ca6')

    def test_bad_sizes(self):
        with pytest.raises(ValueError):
            expand_key(bytes(15))
        with pytest.raises(ValueError):
            AesReference(FIPS_KEY).encrypt(bytes(17))

    def test_round_inputs(self):
        states = AesReference(FIPS_KEY).round_inputs(FIPS_PLAINTEXT)
        assert len(states) == 11
        assert states[0] == FIPS_PLAINTEXT
        assert states[1] == bytes.fromhex('00102030405060708090a0b0c0d0e0f0')
        assert states[2] == bytes.fromhex('89d810e8855ace682d1843d8cb128fe4')
        assert states[10] == bytes.fromhex(
            'bd6e7c3df2b5779e0b61216e8b10b689')

    def test_backward_matches_forward(self, rng):
        aes = AesReference(bytes(rng.getrandbits(8) for _ in range(16)))
        plaintext = bytes(rng.getrandbits(8) for _ in range(16))
        assert aes.backward_round_inputs(aes.encrypt(plaintext)) == \
            aes.round_inputs(plaintext)

    def test_forward_inject_without_difference(self):
        aes = AesReference(FIPS_KEY)
        assert aes.forward_inject(FIPS_PLAINTEXT, 9, 3, 0) == FIPS_CIPHERTEXT

    def test_forward_inject_changes_one_state_byte(self):
        aes = AesReference(FIPS_KEY)
        faulty = aes.forward_inject(FIPS_PLAINTEXT, 10, 5, 0x40)
        states = aes.backward_round_inputs(faulty)
        reference = aes.round_inputs(FIPS_PLAINTEXT)
        assert [i for i in range(16) if states[10][i] != reference[10][i]] \
            == [5]

    def test_forward_inject_round_range(self):
        with pytest.raises(ValueError):
            AesReference(FIPS_KEY).forward_inject(FIPS_PLAINTEXT, 0, 0, 1)
        with pytest.raises(ValueError):
            AesReference(FIPS_KEY).forward_inject(FIPS_PLAINTEXT, 11, 0, 1)


class TestFieldArithmetic:
    def test_tables_are_inverse(self):
        assert all(INV_SBOX[SBOX[i]] == i for i in range(256))

    def test_xtime(self):
        assert xtime(0x57) == 0xAE
        assert xtime(0xAE) == 0x47

    def test_gmul(self):
        assert gmul(0x57, 0x13) == 0xFE

    def test_mix_columns_roundtrip(self, rng):
        state = [rng.getrandbits(8) for _ in range(16)]
        assert list(inv_mix_columns(mix_columns(state))) == state

    def test_mix_columns_known_column(self):
        column = [0xdb, 0x13, 0x53, 0x45] * 4
        assert list(mix_columns(column))[:4] == [0x8e, 0x4d, 0xa1, 0xbc]


class TestSha256:
    def test_abc(self):
        assert Sha256Reference().hexdigest(b'abc') == (
            'ba7816bf8f01cfea414140de5dae2223'
            'b00361a396177a9cb410ff61f20015ad')

    def test_empty(self):
        assert sha256(b'') == hashlib.sha256(b'').digest()

    @pytest.mark.parametrize('length', [55, 56, 63, 64, 65, 127, 200])
    def test_block_boundaries(self, rng, length):
        message = bytes(rng.getrandbits(8) for _ in range(length))
        assert sha256(message) == hashlib.sha256(message).digest()

    def test_unpadded_digest_skips_padding(self, rng):
        sha = Sha256Reference()
        message = bytes(rng.getrandbits(8) for _ in range(40))
        assert sha.unpadded_digest(sha.pad(message)) == sha.digest(message)

    def test_unpadded_digest_differs_from_digest(self):
        sha = Sha256Reference()
        message = bytes(128)
        assert sha.unpadded_digest(message) != sha.digest(message)
        assert len(sha.unpadded_digest(message)) == 32

    def test_unpadded_needs_whole_blocks(self):
        with pytest.raises(ValueError):
            Sha256Reference().unpadded_digest(bytes(65))
