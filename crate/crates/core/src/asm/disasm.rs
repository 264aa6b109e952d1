use std::fmt::Write;

use crate::isa::{Instruction, Opcode, Variant};

use super::Program;

fn x(r: u8) -> String {
    format!("x{r}")
}

fn simd_mnemonic(base: &str, i: &Instruction) -> String {
    let mut m = format!("pv.{base}");
    match i.variant {
        Variant::Scalar => m.push_str(".sc"),
        Variant::Imm => m.push_str(".sci"),
        _ => {}
    }
    match i.width.map(|w| w.bits()) {
        Some(16) => m.push_str(".h"),
        Some(8) => m.push_str(".b"),
        _ => {}
    }
    m
}

/// Canonical text for one instruction. Control-flow targets are printed as
/// pc-relative byte offsets, which [`super::assemble`] accepts back verbatim.
pub fn disassemble(i: &Instruction) -> String {
    use Opcode::*;
    let (rd, rs1, rs2) = (x(i.rd), x(i.rs1), x(i.rs2));
    match i.op {
        Lui => format!("lui {rd}, {:#x}", i.imm),
        Auipc => format!("auipc {rd}, {:#x}", i.imm),
        Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => {
            let m = format!("{:?}", i.op).to_ascii_lowercase();
            format!("{m} {rd}, {rs1}, {}", i.imm)
        }
        Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And | Mul => {
            let m = format!("{:?}", i.op).to_ascii_lowercase();
            format!("{m} {rd}, {rs1}, {rs2}")
        }
        Lb | Lh | Lw | Lbu | Lhu => {
            let m = format!("{:?}", i.op).to_ascii_lowercase();
            format!("{m} {rd}, {}({rs1})", i.imm)
        }
        Sb | Sh | Sw => {
            let m = format!("{:?}", i.op).to_ascii_lowercase();
            format!("{m} {rs2}, {}({rs1})", i.imm)
        }
        PLb | PLbu | PLh | PLhu | PLw => {
            let m = format!("{:?}", i.op)[1..].to_ascii_lowercase();
            format!("p.{m} {rd}, {}({rs1}!)", i.imm)
        }
        PSb | PSh | PSw => {
            let m = format!("{:?}", i.op)[1..].to_ascii_lowercase();
            format!("p.{m} {rs2}, {}({rs1}!)", i.imm)
        }
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            let m = format!("{:?}", i.op).to_ascii_lowercase();
            format!("{m} {rs1}, {rs2}, {}", i.imm)
        }
        Jal => format!("jal {rd}, {}", i.imm),
        Jalr => format!("jalr {rd}, {}({rs1})", i.imm),
        Ecall => "ecall".into(),
        Ebreak => "ebreak".into(),
        Csrrw => format!("csrrw {rd}, {:#x}, {rs1}", i.imm),
        Csrr => format!("csrr {rd}, {:#x}", i.imm),
        Csrw => format!("csrw {:#x}, {rs1}", i.imm),
        LpSetup => format!("lp.setup {}, {rs1}, {}", i.rd, i.imm),
        LpStart => format!("lp.start {}, {}", i.rd, i.imm),
        LpEnd => format!("lp.end {}, {}", i.rd, i.imm),
        LpCount => format!("lp.count {}, {rs1}", i.rd),
        Simd(op) => {
            let m = simd_mnemonic(op.mnemonic(), i);
            if op.is_unary() {
                format!("{m} {rd}, {rs1}")
            } else if i.variant == Variant::Imm {
                format!("{m} {rd}, {rs1}, {}", i.imm)
            } else {
                format!("{m} {rd}, {rs1}, {rs2}")
            }
        }
        Dot(d) => {
            let m = simd_mnemonic(&d.mnemonic(), i);
            if i.variant == Variant::Imm {
                format!("{m} {rd}, {rs1}, {}", i.imm)
            } else {
                format!("{m} {rd}, {rs1}, {rs2}")
            }
        }
    }
}

/// Address-annotated listing of a whole program.
pub fn disassemble_program(p: &Program) -> String {
    let mut by_addr: std::collections::BTreeMap<u32, Vec<&str>> = Default::default();
    for (name, &addr) in &p.symbols {
        by_addr.entry(addr).or_default().push(name);
    }
    let mut out = String::new();
    for (idx, ins) in p.instrs.iter().enumerate() {
        let addr = p.addr_of(idx);
        if let Some(names) = by_addr.get(&addr) {
            for n in names {
                let _ = writeln!(out, "{n}:");
            }
        }
        let _ = writeln!(out, "  {addr:08x}:  {}", disassemble(ins));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{assemble, Dialect};
    use super::*;

    #[test]
    fn simd_and_csr_text() {
        let p = assemble("pv.add.sci a0, a1, 3\ncsrw 0x7C0, x6", Dialect::Mpic).unwrap();
        assert_eq!(disassemble(&p.instrs[0]), "pv.add.sci x10, x11, 3");
        assert_eq!(disassemble(&p.instrs[1]), "csrw 0x7c0, x6");
        let p = assemble("pv.sdotusp.sc.b a0, a1, a2\np.sw t0, -4(a0!)", Dialect::Ri5cy).unwrap();
        assert_eq!(disassemble(&p.instrs[0]), "pv.sdotusp.sc.b x10, x11, x12");
        assert_eq!(disassemble(&p.instrs[1]), "p.sw x5, -4(x10!)");
    }
}
