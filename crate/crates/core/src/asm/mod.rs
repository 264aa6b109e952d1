//! Two-pass assembler for the RV32IM + XpulpV2-style dialect used by the kernels.
//!
//! Pass 1 walks the source, sizes every instruction (pseudo-instructions included)
//! and data directive, and binds labels. Pass 2 encodes instructions into
//! [`Instruction`] values with all label references resolved and fills the data
//! image. Any diagnostic aborts the whole assembly.
//!
//! Text and data are separate address spaces: instructions are fetched from the
//! [`Program`], data lives in [`crate::machine::Memory`].

mod disasm;
mod parse;

use std::collections::BTreeMap;

use thiserror::Error;

pub use disasm::{disassemble, disassemble_program};
pub use parse::ABI_NAMES;

use crate::format::LaneWidth;
use crate::isa::{DotOp, Instruction, Opcode, Variant};
use crate::machine::{CSR_CYCLE, CSR_INSTRET, CSR_MPC_CNT, CSR_MPC_MACS_PER_GROUP, CSR_SIMD_FMT};
use crate::simd::SimdAluOp;
use parse::{parse_expr, parse_imm, parse_int, parse_mem, parse_reg, split_operands, strip_comment, Expr};

pub const TEXT_BASE: u32 = 0x0000_0000;
pub const DATA_BASE: u32 = 0x0010_0000;

/// Which SIMD encoding the source uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    /// Virtual SIMD instructions only; precision comes from the SIMD_FMT CSR.
    #[default]
    Mpic,
    /// Baseline: `.h`/`.b` suffixes select an explicit 16/8-bit format.
    Ri5cy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ErrorKind {
    #[error("unknown mnemonic {0:?}")]
    UnknownMnemonic(String),
    #[error("{0}")]
    BadOperand(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("undefined label {0:?}")]
    UndefinedLabel(String),
    #[error("immediate {value} out of range [{min}, {max}]")]
    ImmOutOfRange { value: i64, min: i64, max: i64 },
    #[error("format suffix not allowed on virtual SIMD instruction {0:?}; precision comes from SIMD_FMT")]
    FormatSuffix(String),
    #[error("unknown directive {0:?}")]
    UnknownDirective(String),
    #[error("{0}")]
    Misplaced(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: ErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub addr: u32,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub instrs: Vec<Instruction>,
    pub text_base: u32,
    pub symbols: BTreeMap<String, u32>,
    pub data_segments: Vec<DataSegment>,
    pub entry: u32,
    phases: Vec<String>,
    phase_of: Vec<u8>,
    lines: Vec<usize>,
}

impl Program {
    /// Wraps a bare instruction list at [`TEXT_BASE`].
    pub fn from_instrs(instrs: Vec<Instruction>) -> Self {
        let n = instrs.len();
        Program {
            instrs,
            text_base: TEXT_BASE,
            symbols: BTreeMap::new(),
            data_segments: Vec::new(),
            entry: TEXT_BASE,
            phases: vec![String::new()],
            phase_of: vec![0; n],
            lines: vec![0; n],
        }
    }

    #[inline]
    pub fn index_of(&self, pc: u32) -> Option<usize> {
        let off = pc.wrapping_sub(self.text_base);
        if !off.is_multiple_of(4) {
            return None;
        }
        let i = (off / 4) as usize;
        (i < self.instrs.len()).then_some(i)
    }

    #[inline]
    pub fn fetch(&self, pc: u32) -> Option<&Instruction> {
        self.index_of(pc).map(|i| &self.instrs[i])
    }

    pub fn addr_of(&self, index: usize) -> u32 {
        self.text_base + 4 * index as u32
    }

    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.get(name).copied()
    }

    /// Phase names declared with `.phase`; index 0 is the unnamed default.
    pub fn phases(&self) -> &[String] {
        &self.phases
    }

    #[inline]
    pub fn phase_index(&self, instr_index: usize) -> usize {
        self.phase_of[instr_index] as usize
    }

    pub fn phase_name(&self, instr_index: usize) -> &str {
        &self.phases[self.phase_index(instr_index)]
    }

    /// Source line of an instruction, for diagnostics.
    pub fn line_of(&self, instr_index: usize) -> usize {
        self.lines[instr_index]
    }
}

pub fn assemble(source: &str, dialect: Dialect) -> Result<Program, AsmError> {
    Assembler { dialect }.assemble(source)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Assembler {
    pub dialect: Dialect,
}

enum Item {
    Instr { line: usize, mnemonic: String, ops: Vec<String>, addr: u32 },
    Data { line: usize, directive: String, args: Vec<String>, addr: u32, seg: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Text,
    Data,
}

fn err(line: usize, kind: ErrorKind) -> AsmError {
    AsmError { line, kind }
}

fn fits_i12(v: i64) -> bool {
    (-2048..=2047).contains(&v)
}

fn li_len(ops: &[String]) -> u32 {
    match ops.get(1).and_then(|s| parse_int(s)) {
        Some(v) if fits_i12(v as u32 as i32 as i64) || fits_i12(v) => 1,
        _ => 2,
    }
}

fn instr_len(mnemonic: &str, ops: &[String]) -> u32 {
    match mnemonic {
        "li" => li_len(ops),
        "la" => 2,
        _ => 1,
    }
}

impl Assembler {
    pub fn new(dialect: Dialect) -> Self {
        Assembler { dialect }
    }

    pub fn assemble(&self, source: &str) -> Result<Program, AsmError> {
        // pass 1: layout and labels
        let mut symbols: BTreeMap<String, u32> = BTreeMap::new();
        let mut items = Vec::new();
        let mut section = Section::Text;
        let mut text_pc = TEXT_BASE;
        let mut data_pc = DATA_BASE;
        let mut data_seg = DATA_BASE;
        let mut phases = vec![String::new()];
        let mut phase_marks: Vec<(u32, u8)> = Vec::new();

        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let mut rest = strip_comment(raw).trim();
            while let Some(colon) = rest.find(':') {
                let name = rest[..colon].trim();
                if !parse::is_ident(name) {
                    break;
                }
                let addr = if section == Section::Text { text_pc } else { data_pc };
                if symbols.insert(name.to_string(), addr).is_some() {
                    return Err(err(line_no, ErrorKind::DuplicateLabel(name.to_string())));
                }
                rest = rest[colon + 1..].trim();
            }
            if rest.is_empty() {
                continue;
            }
            let (head, tail) = match rest.find(char::is_whitespace) {
                Some(i) => (&rest[..i], rest[i..].trim()),
                None => (rest, ""),
            };
            let head = head.to_ascii_lowercase();
            let args = split_operands(tail);
            if head.starts_with('.') {
                match head.as_str() {
                    ".text" => section = Section::Text,
                    ".data" => {
                        section = Section::Data;
                        if let Some(a) = args.first() {
                            let addr = parse_imm(a).map_err(|k| err(line_no, k))? as u32;
                            data_pc = addr;
                            data_seg = addr;
                        }
                    }
                    ".globl" | ".global" => {}
                    ".phase" => {
                        let name = tail.trim().to_string();
                        if name.is_empty() {
                            return Err(err(line_no, ErrorKind::BadOperand(".phase needs a name".into())));
                        }
                        let id = match phases.iter().position(|p| *p == name) {
                            Some(i) => i,
                            None => {
                                phases.push(name);
                                phases.len() - 1
                            }
                        };
                        let id = u8::try_from(id).map_err(|_| {
                            err(line_no, ErrorKind::BadOperand("too many phases".into()))
                        })?;
                        phase_marks.push((text_pc, id));
                    }
                    ".word" | ".half" | ".byte" | ".space" | ".zero" | ".align" => {
                        if section != Section::Data {
                            return Err(err(
                                line_no,
                                ErrorKind::Misplaced(format!("{head} is only allowed in .data")),
                            ));
                        }
                        let size = data_size(&head, &args, data_pc).map_err(|k| err(line_no, k))?;
                        items.push(Item::Data { line: line_no, directive: head, args, addr: data_pc, seg: data_seg });
                        data_pc = data_pc.wrapping_add(size);
                    }
                    _ => return Err(err(line_no, ErrorKind::UnknownDirective(head))),
                }
                continue;
            }
            if section != Section::Text {
                return Err(err(line_no, ErrorKind::Misplaced("instruction outside .text".into())));
            }
            let len = instr_len(&head, &args);
            items.push(Item::Instr { line: line_no, mnemonic: head, ops: args, addr: text_pc });
            text_pc += 4 * len;
        }

        // pass 2: encode
        let mut instrs = Vec::new();
        let mut lines = Vec::new();
        let mut segments: Vec<DataSegment> = Vec::new();
        for item in &items {
            match item {
                Item::Instr { line, mnemonic, ops, addr } => {
                    let encoded = self
                        .encode(mnemonic, ops, *addr, &symbols)
                        .map_err(|k| err(*line, k))?;
                    debug_assert_eq!(encoded.len() as u32, instr_len(mnemonic, ops));
                    lines.extend(std::iter::repeat_n(*line, encoded.len()));
                    instrs.extend(encoded);
                }
                Item::Data { line, directive, args, addr, seg } => {
                    let bytes = data_bytes(directive, args, *addr, &symbols).map_err(|k| err(*line, k))?;
                    let start = *seg;
                    match segments.iter_mut().find(|s| s.addr == start) {
                        Some(seg) => {
                            let off = (addr - start) as usize;
                            let end = off + bytes.len();
                            if seg.bytes.len() < end {
                                seg.bytes.resize(end, 0);
                            }
                            seg.bytes[off..end].copy_from_slice(&bytes);
                        }
                        None => {
                            let mut seg_bytes = vec![0; (addr - start) as usize];
                            seg_bytes.extend_from_slice(&bytes);
                            segments.push(DataSegment { addr: start, bytes: seg_bytes });
                        }
                    }
                }
            }
        }

        let mut phase_of = vec![0u8; instrs.len()];
        for (i, &(pc, id)) in phase_marks.iter().enumerate() {
            let from = ((pc - TEXT_BASE) / 4) as usize;
            let to = phase_marks
                .get(i + 1)
                .map(|&(p, _)| ((p - TEXT_BASE) / 4) as usize)
                .unwrap_or(instrs.len());
            for slot in phase_of.iter_mut().take(to).skip(from) {
                *slot = id;
            }
        }

        let entry = symbols.get("_start").copied().unwrap_or(TEXT_BASE);
        Ok(Program {
            instrs,
            text_base: TEXT_BASE,
            symbols,
            data_segments: segments,
            entry,
            phases,
            phase_of,
            lines,
        })
    }

    fn encode(
        &self,
        mnemonic: &str,
        ops: &[String],
        pc: u32,
        syms: &BTreeMap<String, u32>,
    ) -> Result<Vec<Instruction>, ErrorKind> {
        let want = |n: usize| -> Result<(), ErrorKind> {
            if ops.len() == n {
                Ok(())
            } else {
                Err(ErrorKind::BadOperand(format!(
                    "{mnemonic} expects {n} operand(s), found {}",
                    ops.len()
                )))
            }
        };
        let resolve = |s: &str| -> Result<i64, ErrorKind> {
            match parse_expr(s)? {
                Expr::Num(v) => Ok(v),
                Expr::Sym(name, off) => syms
                    .get(&name)
                    .map(|&a| a as i64 + off)
                    .ok_or(ErrorKind::UndefinedLabel(name)),
            }
        };
        // label → pc-relative offset; bare numbers are already offsets
        let target = |s: &str, min: i64, max: i64| -> Result<i32, ErrorKind> {
            let off = match parse_expr(s)? {
                Expr::Num(v) => v,
                Expr::Sym(..) => resolve(s)? - pc as i64,
            };
            if off % 2 != 0 {
                return Err(ErrorKind::BadOperand(format!("target offset {off} is not even")));
            }
            check_range(off, min, max)
        };

        use Opcode::*;
        let mut i = Instruction::new(Addi);
        let r_type = |op: Opcode| -> Result<Vec<Instruction>, ErrorKind> {
            want(3)?;
            let mut i = Instruction::new(op);
            i.rd = parse_reg(&ops[0])?;
            i.rs1 = parse_reg(&ops[1])?;
            i.rs2 = parse_reg(&ops[2])?;
            Ok(vec![i])
        };
        let i_type = |op: Opcode, min: i64, max: i64| -> Result<Vec<Instruction>, ErrorKind> {
            want(3)?;
            let mut i = Instruction::new(op);
            i.rd = parse_reg(&ops[0])?;
            i.rs1 = parse_reg(&ops[1])?;
            i.imm = check_range(parse_imm(&ops[2])?, min, max)?;
            Ok(vec![i])
        };
        let load = |op: Opcode, post: bool| -> Result<Vec<Instruction>, ErrorKind> {
            want(2)?;
            let mut i = Instruction::new(op);
            i.rd = parse_reg(&ops[0])?;
            let (imm, base) = parse_mem(&ops[1], post)?;
            i.rs1 = base;
            i.imm = check_range(imm, -2048, 2047)?;
            Ok(vec![i])
        };
        let store = |op: Opcode, post: bool| -> Result<Vec<Instruction>, ErrorKind> {
            want(2)?;
            let mut i = Instruction::new(op);
            i.rs2 = parse_reg(&ops[0])?;
            let (imm, base) = parse_mem(&ops[1], post)?;
            i.rs1 = base;
            i.imm = check_range(imm, -2048, 2047)?;
            Ok(vec![i])
        };
        let branch = |op: Opcode| -> Result<Vec<Instruction>, ErrorKind> {
            want(3)?;
            let mut i = Instruction::new(op);
            i.rs1 = parse_reg(&ops[0])?;
            i.rs2 = parse_reg(&ops[1])?;
            i.imm = target(&ops[2], -4096, 4094)?;
            Ok(vec![i])
        };

        let out = match mnemonic {
            "lui" | "auipc" => {
                want(2)?;
                i.op = if mnemonic == "lui" { Lui } else { Auipc };
                i.rd = parse_reg(&ops[0])?;
                let v = parse_imm(&ops[1])?;
                check_range(v, -(1 << 19), (1 << 20) - 1)?;
                i.imm = (v & 0xF_FFFF) as i32;
                vec![i]
            }
            "addi" => i_type(Addi, -2048, 2047)?,
            "slti" => i_type(Slti, -2048, 2047)?,
            "sltiu" => i_type(Sltiu, -2048, 2047)?,
            "xori" => i_type(Xori, -2048, 2047)?,
            "ori" => i_type(Ori, -2048, 2047)?,
            "andi" => i_type(Andi, -2048, 2047)?,
            "slli" => i_type(Slli, 0, 31)?,
            "srli" => i_type(Srli, 0, 31)?,
            "srai" => i_type(Srai, 0, 31)?,
            "add" => r_type(Add)?,
            "sub" => r_type(Sub)?,
            "sll" => r_type(Sll)?,
            "slt" => r_type(Slt)?,
            "sltu" => r_type(Sltu)?,
            "xor" => r_type(Xor)?,
            "srl" => r_type(Srl)?,
            "sra" => r_type(Sra)?,
            "or" => r_type(Or)?,
            "and" => r_type(And)?,
            "mul" => r_type(Mul)?,
            "lb" => load(Lb, false)?,
            "lh" => load(Lh, false)?,
            "lw" => load(Lw, false)?,
            "lbu" => load(Lbu, false)?,
            "lhu" => load(Lhu, false)?,
            "sb" => store(Sb, false)?,
            "sh" => store(Sh, false)?,
            "sw" => store(Sw, false)?,
            "p.lb" => load(PLb, true)?,
            "p.lbu" => load(PLbu, true)?,
            "p.lh" => load(PLh, true)?,
            "p.lhu" => load(PLhu, true)?,
            "p.lw" => load(PLw, true)?,
            "p.sb" => store(PSb, true)?,
            "p.sh" => store(PSh, true)?,
            "p.sw" => store(PSw, true)?,
            "beq" => branch(Beq)?,
            "bne" => branch(Bne)?,
            "blt" => branch(Blt)?,
            "bge" => branch(Bge)?,
            "bltu" => branch(Bltu)?,
            "bgeu" => branch(Bgeu)?,
            "beqz" | "bnez" => {
                want(2)?;
                i.op = if mnemonic == "beqz" { Beq } else { Bne };
                i.rs1 = parse_reg(&ops[0])?;
                i.imm = target(&ops[1], -4096, 4094)?;
                vec![i]
            }
            "jal" => {
                i.op = Jal;
                let (rd, t) = match ops.len() {
                    1 => (1, &ops[0]),
                    2 => (parse_reg(&ops[0])?, &ops[1]),
                    _ => return Err(ErrorKind::BadOperand("jal expects [rd,] target".into())),
                };
                i.rd = rd;
                i.imm = target(t, -(1 << 20), (1 << 20) - 2)?;
                vec![i]
            }
            "j" | "call" => {
                want(1)?;
                i.op = Jal;
                i.rd = if mnemonic == "call" { 1 } else { 0 };
                i.imm = target(&ops[0], -(1 << 20), (1 << 20) - 2)?;
                vec![i]
            }
            "jalr" => {
                i.op = Jalr;
                match ops.len() {
                    1 => {
                        i.rd = 1;
                        i.rs1 = parse_reg(&ops[0])?;
                    }
                    2 => {
                        i.rd = parse_reg(&ops[0])?;
                        let (imm, base) = parse_mem(&ops[1], false)?;
                        i.rs1 = base;
                        i.imm = check_range(imm, -2048, 2047)?;
                    }
                    3 => {
                        i.rd = parse_reg(&ops[0])?;
                        i.rs1 = parse_reg(&ops[1])?;
                        i.imm = check_range(parse_imm(&ops[2])?, -2048, 2047)?;
                    }
                    _ => return Err(ErrorKind::BadOperand("jalr expects rd, imm(rs1)".into())),
                }
                vec![i]
            }
            "jr" => {
                want(1)?;
                i.op = Jalr;
                i.rs1 = parse_reg(&ops[0])?;
                vec![i]
            }
            "ret" => {
                want(0)?;
                i.op = Jalr;
                i.rs1 = 1;
                vec![i]
            }
            "ecall" | "ebreak" => {
                want(0)?;
                vec![Instruction::new(if mnemonic == "ecall" { Ecall } else { Ebreak })]
            }
            "nop" => {
                want(0)?;
                vec![i]
            }
            "mv" => {
                want(2)?;
                i.rd = parse_reg(&ops[0])?;
                i.rs1 = parse_reg(&ops[1])?;
                vec![i]
            }
            "li" => {
                want(2)?;
                let rd = parse_reg(&ops[0])?;
                let v = parse_imm(&ops[1])?;
                check_range(v, i32::MIN as i64, u32::MAX as i64)?;
                load_const(rd, v as u32, li_len(ops) == 1)
            }
            "la" => {
                want(2)?;
                let rd = parse_reg(&ops[0])?;
                let v = resolve(&ops[1])?;
                load_const(rd, v as u32, false)
            }
            "csrrw" => {
                want(3)?;
                i.op = Csrrw;
                i.rd = parse_reg(&ops[0])?;
                i.imm = parse_csr(&ops[1])?;
                i.rs1 = parse_reg(&ops[2])?;
                vec![i]
            }
            "csrr" => {
                want(2)?;
                i.op = Csrr;
                i.rd = parse_reg(&ops[0])?;
                i.imm = parse_csr(&ops[1])?;
                vec![i]
            }
            "csrw" => {
                want(2)?;
                i.op = Csrw;
                i.imm = parse_csr(&ops[0])?;
                i.rs1 = parse_reg(&ops[1])?;
                vec![i]
            }
            "lp.setup" => {
                want(3)?;
                i.op = LpSetup;
                i.rd = parse_loop_level(&ops[0])?;
                i.rs1 = parse_reg(&ops[1])?;
                i.imm = target(&ops[2], -8192, 8190)?;
                vec![i]
            }
            "lp.start" | "lp.starti" | "lp.end" | "lp.endi" => {
                want(2)?;
                i.op = if mnemonic.starts_with("lp.start") { LpStart } else { LpEnd };
                i.rd = parse_loop_level(&ops[0])?;
                i.imm = target(&ops[1], -8192, 8190)?;
                vec![i]
            }
            "lp.count" => {
                want(2)?;
                i.op = LpCount;
                i.rd = parse_loop_level(&ops[0])?;
                i.rs1 = parse_reg(&ops[1])?;
                vec![i]
            }
            m if m.starts_with("pv.") => vec![self.encode_simd(m, ops)?],
            _ => return Err(ErrorKind::UnknownMnemonic(mnemonic.to_string())),
        };
        Ok(out)
    }

    fn encode_simd(&self, mnemonic: &str, ops: &[String]) -> Result<Instruction, ErrorKind> {
        let unknown = || ErrorKind::UnknownMnemonic(mnemonic.to_string());
        let mut parts: Vec<&str> = mnemonic["pv.".len()..].split('.').collect();
        let base = parts.remove(0);
        let mut width = None;
        if let Some(&last) = parts.last() {
            let w = match last {
                "h" => Some(LaneWidth::W16),
                "b" => Some(LaneWidth::W8),
                "n" | "c" => return Err(unknown()),
                _ => None,
            };
            if let Some(w) = w {
                if self.dialect == Dialect::Mpic {
                    return Err(ErrorKind::FormatSuffix(mnemonic.to_string()));
                }
                width = Some(w);
                parts.pop();
            }
        }
        let variant = match parts.as_slice() {
            [] => Variant::Vector,
            ["sc"] => Variant::Scalar,
            ["sci"] => Variant::Imm,
            _ => return Err(unknown()),
        };

        let op = if let Some(alu) = SimdAluOp::ALL.iter().find(|o| o.mnemonic() == base) {
            Opcode::Simd(*alu)
        } else if let Some(dot) = DotOp::ALL.iter().find(|d| d.mnemonic() == base) {
            Opcode::Dot(*dot)
        } else {
            return Err(unknown());
        };

        let mut i = Instruction::new(op);
        i.variant = variant;
        i.width = width;
        if let Opcode::Simd(alu) = op {
            if alu.is_unary() {
                if variant != Variant::Vector {
                    return Err(unknown());
                }
                if ops.len() != 2 {
                    return Err(ErrorKind::BadOperand(format!("{mnemonic} expects rd, rs1")));
                }
                i.rd = parse_reg(&ops[0])?;
                i.rs1 = parse_reg(&ops[1])?;
                return Ok(i);
            }
        }
        if ops.len() != 3 {
            return Err(ErrorKind::BadOperand(format!("{mnemonic} expects 3 operands")));
        }
        i.rd = parse_reg(&ops[0])?;
        i.rs1 = parse_reg(&ops[1])?;
        if let Opcode::Dot(d) = op {
            if d.accumulate {
                i.rs3 = i.rd;
            }
        }
        if variant == Variant::Imm {
            let unsigned = match op {
                Opcode::Simd(a) => a.unsigned_imm(),
                Opcode::Dot(d) => d.unsigned_imm(),
                _ => unreachable!(),
            };
            let v = parse_imm(&ops[2])?;
            i.imm = if unsigned { check_range(v, 0, 63)? } else { check_range(v, -32, 31)? };
        } else {
            i.rs2 = parse_reg(&ops[2])?;
        }
        Ok(i)
    }
}

fn check_range(v: i64, min: i64, max: i64) -> Result<i32, ErrorKind> {
    if v < min || v > max {
        Err(ErrorKind::ImmOutOfRange { value: v, min, max })
    } else {
        Ok(v as i32)
    }
}

fn parse_csr(s: &str) -> Result<i32, ErrorKind> {
    let v = match s.trim().to_ascii_lowercase().as_str() {
        "simd_fmt" => CSR_SIMD_FMT as i64,
        "mpc_cnt" => CSR_MPC_CNT as i64,
        "mpc_macs_per_group" => CSR_MPC_MACS_PER_GROUP as i64,
        "cycle" => CSR_CYCLE as i64,
        "instret" => CSR_INSTRET as i64,
        other => parse_imm(other)?,
    };
    check_range(v, 0, 0xFFF)
}

fn parse_loop_level(s: &str) -> Result<u8, ErrorKind> {
    match s.trim() {
        "0" | "x0" => Ok(0),
        "1" | "x1" => Ok(1),
        other => Err(ErrorKind::BadOperand(format!("hardware loop level must be 0 or 1, found {other:?}"))),
    }
}

/// `lui`+`addi` (or a lone `addi` when `short`) materialising `value`.
fn load_const(rd: u8, value: u32, short: bool) -> Vec<Instruction> {
    let mut addi = Instruction::new(Opcode::Addi);
    addi.rd = rd;
    if short {
        addi.imm = value as i32;
        return vec![addi];
    }
    let hi = value.wrapping_add(0x800) >> 12;
    let lo = value.wrapping_sub(hi << 12) as i32;
    let mut lui = Instruction::new(Opcode::Lui);
    lui.rd = rd;
    lui.imm = hi as i32;
    addi.rs1 = rd;
    addi.imm = lo;
    vec![lui, addi]
}

fn data_size(directive: &str, args: &[String], addr: u32) -> Result<u32, ErrorKind> {
    Ok(match directive {
        ".word" => 4 * args.len() as u32,
        ".half" => 2 * args.len() as u32,
        ".byte" => args.len() as u32,
        ".space" | ".zero" => {
            let n = args.first().ok_or_else(|| ErrorKind::BadOperand(format!("{directive} needs a size")))?;
            check_range(parse_imm(n)?, 0, 1 << 28)? as u32
        }
        ".align" => {
            let n = args.first().ok_or_else(|| ErrorKind::BadOperand(".align needs an exponent".into()))?;
            let align = 1u32 << check_range(parse_imm(n)?, 0, 12)?;
            (align - addr % align) % align
        }
        _ => unreachable!(),
    })
}

fn data_bytes(
    directive: &str,
    args: &[String],
    addr: u32,
    syms: &BTreeMap<String, u32>,
) -> Result<Vec<u8>, ErrorKind> {
    let value = |s: &str| -> Result<i64, ErrorKind> {
        match parse_expr(s)? {
            Expr::Num(v) => Ok(v),
            Expr::Sym(name, off) => {
                syms.get(&name).map(|&a| a as i64 + off).ok_or(ErrorKind::UndefinedLabel(name))
            }
        }
    };
    let mut out = Vec::new();
    match directive {
        ".word" => {
            for a in args {
                let v = check_range(value(a)?, i32::MIN as i64, u32::MAX as i64)?;
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        ".half" => {
            for a in args {
                let v = check_range(value(a)?, i16::MIN as i64, u16::MAX as i64)?;
                out.extend_from_slice(&(v as u16).to_le_bytes());
            }
        }
        ".byte" => {
            for a in args {
                let v = check_range(value(a)?, i8::MIN as i64, u8::MAX as i64)?;
                out.push(v as u8);
            }
        }
        ".space" | ".zero" | ".align" => out.resize(data_size(directive, args, addr)? as usize, 0),
        _ => unreachable!(),
    }
    Ok(out)
}
