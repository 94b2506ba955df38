import pytest

from faultscope.decoder import V6M, decode
from faultscope.emulator import DEFAULT_FLASH_BASE, HALTING_POINT
from faultscope.exceptions import (
    AssemblerError,
    BranchOutOfRangeError,
    UnknownMnemonicError,
)
from faultscope.testkit import ProgramBuilder, assemble


class TestEncodings:
    def test_return(self):
        program = assemble('bx lr')
        assert program.halfwords() == [0x4770]

    def test_self_loop(self):
        program = assemble('b .')
        assert program.halfwords() == [0xE7FE]

    def test_nop(self):
        assert assemble('nop').halfwords() == [0xBF00]

    def test_movs_and_adds(self):
        program = assemble('''
            movs r0, #7
            adds r0, r0, r1
            subs r0, r0, r1
            adds r2, #200
        ''')
        assert program.halfwords() == [0x2007, 0x1840, 0x1A40, 0x32C8]

    def test_mov_high_registers(self):
        program = assemble('''
            mov r2, sp
            mov pc, pc
        ''')
        assert program.halfwords() == [0x466A, 0x46FF]

    def test_push_pop(self):
        program = assemble('''
            push {r4, lr}
            pop {r0-r2, pc}
        ''')
        assert program.halfwords() == [0xB510, 0xBD07]

    def test_loads_and_stores(self):
        program = assemble('''
            ldrb r1, [r3, #1]
            str r0, [r1]
            ldr r2, [sp, #8]
            ldrh r4, [r5, r6]
        ''')
        assert program.halfwords() == [0x7859, 0x6008, 0x9A02, 0x5BAC]

    def test_everything_decodes(self):
        program = assemble('''
            start:
                movs r0, #1
                lsls r1, r0, #3
                cmp r1, #8
                bne start
                muls r1, r0
                uxtb r2, r1
                rev r3, r2
                bkpt #0
        ''')
        for halfword in program.halfwords():
            decode((halfword,), V6M)


class TestLabels:
    def test_forward_reference(self):
        program = assemble('''
            start:
                b done
                nop
            done:
                bx lr
        ''')
        assert program.symbols == {'start': 0x8000, 'done': 0x8004}
        # b +0: target is pc + 4
        assert program.halfwords()[0] == 0xE000

    def test_backward_conditional_branch(self):
        program = assemble('''
            loop:
                subs r0, #1
                bne loop
        ''')
        assert program.halfwords()[1] == 0xD1FD

    def test_bl_to_label(self):
        program = assemble('''
                bl target
            target:
                bx lr
        ''')
        assert program.halfwords()[:2] == [0xF000, 0xF800]
        assert program.address('target') == 0x8004

    def test_equ(self):
        program = assemble('''
            .equ KEY, 0x5a
                movs r0, #KEY
        ''')
        assert program.halfwords() == [0x205A]
        assert program.symbols['KEY'] == 0x5a

    def test_duplicate_label(self):
        with pytest.raises(AssemblerError):
            assemble('a:\na:\n nop')

    def test_undefined_symbol(self):
        with pytest.raises(AssemblerError):
            assemble('b nowhere')

    def test_custom_base(self):
        program = assemble('here: b here', base=0x10000)
        assert program.base == 0x10000
        assert program.symbols['here'] == 0x10000
        assert program.end == 0x10002


class TestDataAndPools:
    def test_literal_pool_is_word_aligned(self):
        program = assemble('''
            ldr r0, =0xdeadbeef
            bx lr
        ''')
        # pool after bx lr at 0x8004
        assert len(program) == 8
        assert program.halfwords()[0] == 0x4800
        assert program.image[4:8] == bytes.fromhex('efbeadde')

    def test_identical_literals_share_a_slot(self):
        program = assemble('''
            ldr r0, =42
            ldr r1, =42
            nop
            .pool
        ''')
        assert len(program) == 12
        # both loads reach the same word at 0x8008
        assert program.halfwords()[:2] == [0x4801, 0x4901]

    def test_data_directives(self):
        program = assemble('''
            .byte 1, 2
            .hword 0x1234
            .word table
            table:
        ''')
        assert program.image == bytes.fromhex('0102341208800000')

    def test_align_and_space(self):
        program = assemble('''
            nop
            .align 4
            .space 3
            after:
        ''')
        assert program.symbols['after'] == 0x8007
        assert program.image[2:] == bytes(5)

    def test_halfwords_from_symbol(self):
        program = assemble('''
            nop
            second:
            bx lr
        ''')
        assert program.halfwords('second') == [0x4770]
        assert program.halfwords(count=1) == [0xBF00]


class TestErrors:
    def test_unknown_mnemonic(self):
        with pytest.raises(UnknownMnemonicError):
            assemble('frobnicate r0')

    def test_unknown_directive(self):
        with pytest.raises(UnknownMnemonicError):
            assemble('.section text')

    def test_immediate_out_of_range(self):
        with pytest.raises(AssemblerError):
            assemble('movs r0, #256')

    def test_high_register_rejected(self):
        with pytest.raises(AssemblerError):
            assemble('adds r8, r0, r1')

    def test_branch_out_of_range(self):
        with pytest.raises(BranchOutOfRangeError):
            assemble('beq far\n.space 512\nfar: nop')

    def test_wrong_operand_count(self):
        with pytest.raises(AssemblerError):
            assemble('bx lr, r0')

    def test_unaligned_base(self):
        with pytest.raises(AssemblerError):
            ProgramBuilder(base=0x8002)

    def test_line_number_in_message(self):
        with pytest.raises(AssemblerError) as info:
            assemble('nop\nmovs r0, #999')
        assert 'line 2' in str(info.value)


class TestBuilder:
    def test_chained_emit(self):
        program = ProgramBuilder().emit('start:', 'movs r0, #1') \
            .label('end').emit('b end').build()
        assert program.symbols == {'start': DEFAULT_FLASH_BASE,
                                   'end': DEFAULT_FLASH_BASE + 2}

    def test_comments_are_ignored(self):
        program = assemble('''
            nop ; trailing
            @ whole line
            bx lr // also trailing
        ''')
        assert program.halfwords() == [0xBF00, 0x4770]

    def test_load_runs_to_a_symbol(self):
        program = assemble('''
            start:
                movs r0, #3
                adds r0, #4
            done:
                b done
        ''')
        emu = program.load()
        outcome = emu.run_until([emu.resolve('done')], 10)
        assert outcome.kind == HALTING_POINT
        assert emu.regs[0] == 7
        assert emu.symbols['done'] == 0x8004
