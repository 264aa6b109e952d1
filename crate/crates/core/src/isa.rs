//! Decoded instruction representation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::format::{LaneWidth, SignMode};
use crate::simd::SimdAluOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstrClass {
    Alu,
    Mul,
    Load,
    Store,
    Branch,
    Csr,
    Hwloop,
    SimdAlu,
    SimdDotp,
}

impl InstrClass {
    pub const COUNT: usize = 9;
    pub const ALL: [InstrClass; 9] = [
        InstrClass::Alu,
        InstrClass::Mul,
        InstrClass::Load,
        InstrClass::Store,
        InstrClass::Branch,
        InstrClass::Csr,
        InstrClass::Hwloop,
        InstrClass::SimdAlu,
        InstrClass::SimdDotp,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            InstrClass::Alu => "alu",
            InstrClass::Mul => "mul",
            InstrClass::Load => "load",
            InstrClass::Store => "store",
            InstrClass::Branch => "branch",
            InstrClass::Csr => "csr",
            InstrClass::Hwloop => "hwloop",
            InstrClass::SimdAlu => "simd-alu",
            InstrClass::SimdDotp => "simd-dotp",
        }
    }
}

impl fmt::Display for InstrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Operand-B form of a packed-SIMD instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    None,
    Vector,
    /// `.sc`: lane 0 of rs2 replicated.
    Scalar,
    /// `.sci`: 6-bit immediate replicated.
    Imm,
}

/// Dot-product flavour: operand signedness and whether rd is accumulated (`sdot*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DotOp {
    pub sign: SignMode,
    pub accumulate: bool,
}

impl DotOp {
    pub const ALL: [DotOp; 6] = [
        DotOp { sign: SignMode::Uu, accumulate: false },
        DotOp { sign: SignMode::Us, accumulate: false },
        DotOp { sign: SignMode::Ss, accumulate: false },
        DotOp { sign: SignMode::Uu, accumulate: true },
        DotOp { sign: SignMode::Us, accumulate: true },
        DotOp { sign: SignMode::Ss, accumulate: true },
    ];

    pub fn mnemonic(self) -> String {
        format!("{}dot{}", if self.accumulate { "s" } else { "" }, self.sign.suffix())
    }

    /// Immediates follow operand B's signedness.
    pub const fn unsigned_imm(self) -> bool {
        !self.sign.b_signed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    Lui,
    Auipc,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Mul,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    /// Post-increment loads/stores: access at rs1, then rs1 += imm.
    PLb,
    PLbu,
    PLh,
    PLhu,
    PLw,
    PSb,
    PSh,
    PSw,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Jal,
    Jalr,
    Ecall,
    Ebreak,
    Csrrw,
    Csrr,
    Csrw,
    /// Hardware loops: level in `rd`, count register in `rs1`, pc-relative target in `imm`.
    LpSetup,
    LpStart,
    LpEnd,
    LpCount,
    Simd(SimdAluOp),
    Dot(DotOp),
}

impl Opcode {
    pub fn class(self) -> InstrClass {
        use Opcode::*;
        match self {
            Mul => InstrClass::Mul,
            Lb | Lh | Lw | Lbu | Lhu | PLb | PLbu | PLh | PLhu | PLw => InstrClass::Load,
            Sb | Sh | Sw | PSb | PSh | PSw => InstrClass::Store,
            Beq | Bne | Blt | Bge | Bltu | Bgeu | Jal | Jalr => InstrClass::Branch,
            // SYSTEM major opcode, shared with the CSR instructions
            Csrrw | Csrr | Csrw | Ecall | Ebreak => InstrClass::Csr,
            LpSetup | LpStart | LpEnd | LpCount => InstrClass::Hwloop,
            Simd(_) => InstrClass::SimdAlu,
            Dot(_) => InstrClass::SimdDotp,
            _ => InstrClass::Alu,
        }
    }

    pub fn is_simd(self) -> bool {
        matches!(self, Opcode::Simd(_) | Opcode::Dot(_))
    }

    pub fn is_branch(self) -> bool {
        use Opcode::*;
        matches!(self, Beq | Bne | Blt | Bge | Bltu | Bgeu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Opcode,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    /// Accumulator source of `pv.sdot*`; always equal to `rd`.
    pub rs3: u8,
    pub imm: i32,
    pub variant: Variant,
    /// Explicit `.h`/`.b` lane width of the baseline dialect. `None` for virtual
    /// instructions, whose precision comes from the SIMD_FMT CSR.
    pub width: Option<LaneWidth>,
}

impl Instruction {
    pub fn new(op: Opcode) -> Self {
        Instruction {
            op,
            rd: 0,
            rs1: 0,
            rs2: 0,
            rs3: 0,
            imm: 0,
            variant: if op.is_simd() { Variant::Vector } else { Variant::None },
            width: None,
        }
    }

    pub fn class(&self) -> InstrClass {
        self.op.class()
    }

    pub fn is_mac(&self) -> bool {
        matches!(self.op, Opcode::Dot(_))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::asm::disassemble(self))
    }
}
