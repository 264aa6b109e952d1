//! Template table covering every mnemonic and variant of both assembler dialects.

use mpic::asm::{assemble, disassemble, Dialect};
use mpic::isa::Instruction;

const ALU_OPS: [&str; 12] = ["add", "sub", "avg", "avgu", "max", "maxu", "min", "minu", "srl", "sra", "sll", "abs"];
const DOT_OPS: [&str; 6] = ["dotup", "dotusp", "dotsp", "sdotup", "sdotusp", "sdotsp"];

/// Operand values substituted into a template.
#[derive(Debug, Clone, Copy)]
pub struct Fill {
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub i12: i32,
    pub shamt: u32,
    pub u20: u32,
    pub branch: i32,
    pub jump: i32,
    pub simm6: i32,
    pub uimm6: u32,
    pub level: u8,
}

impl Fill {
    pub fn sample() -> Self {
        Fill { rd: 10, rs1: 11, rs2: 31, i12: -2048, shamt: 31, u20: 0xFFFFF, branch: -4096, jump: 1 << 19, simm6: -32, uimm6: 63, level: 1 }
    }

    pub fn apply(&self, t: &str) -> String {
        t.replace("{rd}", &format!("x{}", self.rd))
            .replace("{rs1}", &format!("x{}", self.rs1))
            .replace("{rs2}", &format!("x{}", self.rs2))
            .replace("{i12}", &self.i12.to_string())
            .replace("{shamt}", &self.shamt.to_string())
            .replace("{u20}", &format!("{:#x}", self.u20))
            .replace("{branch}", &self.branch.to_string())
            .replace("{jump}", &self.jump.to_string())
            .replace("{simm6}", &self.simm6.to_string())
            .replace("{uimm6}", &self.uimm6.to_string())
            .replace("{level}", &self.level.to_string())
    }
}

pub fn scalar_templates() -> Vec<String> {
    let mut t: Vec<String> = vec!["lui {rd}, {u20}".into(), "auipc {rd}, {u20}".into()];
    for m in ["addi", "slti", "sltiu", "xori", "ori", "andi"] {
        t.push(format!("{m} {{rd}}, {{rs1}}, {{i12}}"));
    }
    for m in ["slli", "srli", "srai"] {
        t.push(format!("{m} {{rd}}, {{rs1}}, {{shamt}}"));
    }
    for m in ["add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and", "mul"] {
        t.push(format!("{m} {{rd}}, {{rs1}}, {{rs2}}"));
    }
    for m in ["lb", "lh", "lw", "lbu", "lhu"] {
        t.push(format!("{m} {{rd}}, {{i12}}({{rs1}})"));
        t.push(format!("p.{m} {{rd}}, {{i12}}({{rs1}}!)"));
    }
    for m in ["sb", "sh", "sw"] {
        t.push(format!("{m} {{rs2}}, {{i12}}({{rs1}})"));
        t.push(format!("p.{m} {{rs2}}, {{i12}}({{rs1}}!)"));
    }
    for m in ["beq", "bne", "blt", "bge", "bltu", "bgeu"] {
        t.push(format!("{m} {{rs1}}, {{rs2}}, {{branch}}"));
    }
    t.extend(
        [
            "jal {rd}, {jump}",
            "jalr {rd}, {i12}({rs1})",
            "ecall",
            "ebreak",
            "csrrw {rd}, 0x7c1, {rs1}",
            "csrr {rd}, 0x7c2",
            "csrw 0x7c0, {rs1}",
            "csrr {rd}, 0xc00",
            "lp.setup {level}, {rs1}, 8",
            "lp.start {level}, 4",
            "lp.end {level}, 12",
            "lp.count {level}, {rs1}",
        ]
        .map(String::from),
    );
    t
}

/// Every SIMD mnemonic in each legal variant, with an optional width suffix.
pub fn simd_templates(suffix: &str) -> Vec<String> {
    let mut t = Vec::new();
    for op in ALU_OPS {
        if op == "abs" {
            t.push(format!("pv.abs{suffix} {{rd}}, {{rs1}}"));
            continue;
        }
        let unsigned_imm = matches!(op, "avgu" | "maxu" | "minu" | "srl" | "sra" | "sll");
        let imm = if unsigned_imm { "{uimm6}" } else { "{simm6}" };
        t.push(format!("pv.{op}{suffix} {{rd}}, {{rs1}}, {{rs2}}"));
        t.push(format!("pv.{op}.sc{suffix} {{rd}}, {{rs1}}, {{rs2}}"));
        t.push(format!("pv.{op}.sci{suffix} {{rd}}, {{rs1}}, {imm}"));
    }
    for op in DOT_OPS {
        let imm = if op.ends_with("up") { "{uimm6}" } else { "{simm6}" };
        t.push(format!("pv.{op}{suffix} {{rd}}, {{rs1}}, {{rs2}}"));
        t.push(format!("pv.{op}.sc{suffix} {{rd}}, {{rs1}}, {{rs2}}"));
        t.push(format!("pv.{op}.sci{suffix} {{rd}}, {{rs1}}, {imm}"));
    }
    t
}

pub fn one(src: &str, d: Dialect) -> Instruction {
    let p = assemble(src, d).unwrap_or_else(|e| panic!("{src:?} ({d:?}): {e}"));
    assert_eq!(p.instrs.len(), 1, "{src:?} expanded");
    p.instrs[0]
}

pub fn check_roundtrip(src: &str, d: Dialect) {
    let ins = one(src, d);
    let text = disassemble(&ins);
    let again = one(&text, d);
    assert_eq!(again, ins, "{src:?} -> {text:?}");
    assert_eq!(disassemble(&again), text);
}

pub fn all_templates(d: Dialect) -> Vec<String> {
    let mut t = scalar_templates();
    t.extend(simd_templates(""));
    if d == Dialect::Ri5cy {
        t.extend(simd_templates(".h"));
        t.extend(simd_templates(".b"));
    }
    t
}

