//! Fetch/decode/execute loop with a per-class cycle cost model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::Program;
use crate::format::SimdFormat;
use crate::isa::{InstrClass, Instruction, Opcode, Variant};
use crate::machine::{ClassCounts, CsrError, MachineState, MemError, Memory};
use crate::simd::{dotp, replicate, simd_alu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum IsaMode {
    /// Baseline core: 16/8-bit SIMD, precision from the mnemonic suffix.
    Ri5cy,
    /// Status-based core: precision from SIMD_FMT, sub-byte and mixed formats.
    #[default]
    Mpic,
}

impl IsaMode {
    pub const ALL: [IsaMode; 2] = [IsaMode::Ri5cy, IsaMode::Mpic];

    pub fn dialect(self) -> crate::asm::Dialect {
        match self {
            IsaMode::Ri5cy => crate::asm::Dialect::Ri5cy,
            IsaMode::Mpic => crate::asm::Dialect::Mpic,
        }
    }
}

impl fmt::Display for IsaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IsaMode::Ri5cy => "ri5cy",
            IsaMode::Mpic => "mpic",
        })
    }
}

impl FromStr for IsaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ri5cy" => Ok(IsaMode::Ri5cy),
            "mpic" => Ok(IsaMode::Mpic),
            _ => Err(format!("unknown ISA mode {s:?} (expected ri5cy or mpic)")),
        }
    }
}

/// Per-class issue costs plus control-flow penalties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleModel {
    pub cost: [u32; InstrClass::COUNT],
    pub taken_branch_penalty: u32,
    pub hwloop_backedge_penalty: u32,
}

impl Default for CycleModel {
    /// Single-issue, single-cycle scratchpad: every instruction costs one cycle,
    /// taken branches and jumps one extra, hardware-loop back-edges nothing.
    fn default() -> Self {
        CycleModel { cost: [1; InstrClass::COUNT], taken_branch_penalty: 1, hwloop_backedge_penalty: 0 }
    }
}

impl CycleModel {
    pub fn cost_of(&self, class: InstrClass) -> u32 {
        self.cost[class as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoreConfig {
    pub mode: IsaMode,
    pub model: CycleModel,
    /// Gate the input registers of idle dot-product units. Power bookkeeping only.
    pub clock_gating: bool,
}


impl CoreConfig {
    pub fn new(mode: IsaMode) -> Self {
        CoreConfig { mode, ..CoreConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapKind {
    IllegalInstruction,
    IllegalCsr,
    IllegalFormat,
    Misaligned,
    OutOfRange,
    Breakpoint,
    MaxSteps,
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrapKind::IllegalInstruction => "illegal instruction",
            TrapKind::IllegalCsr => "illegal CSR",
            TrapKind::IllegalFormat => "illegal SIMD format",
            TrapKind::Misaligned => "misaligned access",
            TrapKind::OutOfRange => "out-of-range access",
            TrapKind::Breakpoint => "breakpoint",
            TrapKind::MaxSteps => "step limit reached",
        })
    }
}

/// A trap halts the run; the machine state is left as it was before the
/// faulting instruction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at pc {pc:#010x}: {detail}")]
pub struct Trap {
    pub kind: TrapKind,
    pub pc: u32,
    pub detail: String,
}

impl Trap {
    fn new(kind: TrapKind, pc: u32, detail: impl Into<String>) -> Self {
        Trap { kind, pc, detail: detail.into() }
    }

    fn mem(pc: u32, e: MemError) -> Self {
        let kind = match e {
            MemError::Misaligned { .. } => TrapKind::Misaligned,
            MemError::OutOfRange { .. } => TrapKind::OutOfRange,
        };
        Trap::new(kind, pc, e.to_string())
    }

    fn csr(pc: u32, e: CsrError) -> Self {
        let kind = match e {
            CsrError::IllegalFormat(_) => TrapKind::IllegalFormat,
            _ => TrapKind::IllegalCsr,
        };
        Trap::new(kind, pc, e.to_string())
    }
}

/// What one retired instruction did, for accounting by [`run`] and observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub pc: u32,
    pub index: usize,
    pub class: InstrClass,
    pub cycles: u32,
    pub macs: u32,
    pub taken: bool,
    pub halted: bool,
    /// Effective format and MPC subgroup consumed by a dot product.
    pub dotp: Option<(SimdFormat, u32)>,
}

/// Builds a machine with the program's data image loaded and pc at its entry.
pub fn load_program(program: &Program, mem_size: usize) -> Result<MachineState, MemError> {
    let mut mem = Memory::new(0, mem_size);
    for seg in &program.data_segments {
        mem.write_bytes(seg.addr, &seg.bytes)?;
    }
    let mut state = MachineState::new(mem);
    state.pc = program.entry;
    Ok(state)
}

fn effective_format(state: &MachineState, ins: &Instruction, mode: IsaMode, pc: u32) -> Result<SimdFormat, Trap> {
    match (mode, ins.width) {
        (IsaMode::Mpic, Some(w)) => Err(Trap::new(
            TrapKind::IllegalInstruction,
            pc,
            format!("explicit {w}-bit SIMD encoding does not exist in mpic mode"),
        )),
        (IsaMode::Mpic, None) => Ok(state.csrs.simd_fmt),
        (IsaMode::Ri5cy, Some(w)) => Ok(SimdFormat::uniform(w)),
        (IsaMode::Ri5cy, None) => {
            let f = state.csrs.simd_fmt;
            if f.is_mixed() || f.width_a().bits() < 8 {
                Err(Trap::new(TrapKind::IllegalFormat, pc, format!("format {f} unsupported in ri5cy mode")))
            } else {
                Ok(f)
            }
        }
    }
}

/// Executes exactly one instruction.
pub fn step(state: &mut MachineState, program: &Program, cfg: &CoreConfig) -> Result<StepInfo, Trap> {
    let pc = state.pc;
    if !pc.is_multiple_of(4) {
        return Err(Trap::new(TrapKind::Misaligned, pc, "pc not 4-aligned"));
    }
    let index = program
        .index_of(pc)
        .ok_or_else(|| Trap::new(TrapKind::OutOfRange, pc, "pc outside program text"))?;
    let ins = program.instrs[index];
    let class = ins.class();
    let mut next_pc = pc.wrapping_add(4);
    let mut taken = false;
    let mut halted = false;
    let mut macs = 0u32;
    let mut dotp_info = None;

    let r1 = state.reg(ins.rs1);
    let r2 = state.reg(ins.rs2);
    let imm = ins.imm as u32;

    use Opcode::*;
    match ins.op {
        Lui => state.set_reg(ins.rd, imm << 12),
        Auipc => state.set_reg(ins.rd, pc.wrapping_add(imm << 12)),
        Addi => state.set_reg(ins.rd, r1.wrapping_add(imm)),
        Slti => state.set_reg(ins.rd, ((r1 as i32) < ins.imm) as u32),
        Sltiu => state.set_reg(ins.rd, (r1 < imm) as u32),
        Xori => state.set_reg(ins.rd, r1 ^ imm),
        Ori => state.set_reg(ins.rd, r1 | imm),
        Andi => state.set_reg(ins.rd, r1 & imm),
        Slli => state.set_reg(ins.rd, r1 << (imm & 31)),
        Srli => state.set_reg(ins.rd, r1 >> (imm & 31)),
        Srai => state.set_reg(ins.rd, ((r1 as i32) >> (imm & 31)) as u32),
        Add => state.set_reg(ins.rd, r1.wrapping_add(r2)),
        Sub => state.set_reg(ins.rd, r1.wrapping_sub(r2)),
        Sll => state.set_reg(ins.rd, r1 << (r2 & 31)),
        Slt => state.set_reg(ins.rd, ((r1 as i32) < (r2 as i32)) as u32),
        Sltu => state.set_reg(ins.rd, (r1 < r2) as u32),
        Xor => state.set_reg(ins.rd, r1 ^ r2),
        Srl => state.set_reg(ins.rd, r1 >> (r2 & 31)),
        Sra => state.set_reg(ins.rd, ((r1 as i32) >> (r2 & 31)) as u32),
        Or => state.set_reg(ins.rd, r1 | r2),
        And => state.set_reg(ins.rd, r1 & r2),
        Mul => state.set_reg(ins.rd, r1.wrapping_mul(r2)),
        Lb | Lh | Lw | Lbu | Lhu => {
            let (w, s) = load_kind(ins.op);
            let v = state.mem.load(r1.wrapping_add(imm), w, s).map_err(|e| Trap::mem(pc, e))?;
            state.set_reg(ins.rd, v);
        }
        PLb | PLbu | PLh | PLhu | PLw => {
            let (w, s) = load_kind(ins.op);
            let v = state.mem.load(r1, w, s).map_err(|e| Trap::mem(pc, e))?;
            state.set_reg(ins.rs1, r1.wrapping_add(imm));
            state.set_reg(ins.rd, v);
        }
        Sb | Sh | Sw => {
            state.mem.store(r1.wrapping_add(imm), store_width(ins.op), r2).map_err(|e| Trap::mem(pc, e))?;
        }
        PSb | PSh | PSw => {
            state.mem.store(r1, store_width(ins.op), r2).map_err(|e| Trap::mem(pc, e))?;
            state.set_reg(ins.rs1, r1.wrapping_add(imm));
        }
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            taken = match ins.op {
                Beq => r1 == r2,
                Bne => r1 != r2,
                Blt => (r1 as i32) < (r2 as i32),
                Bge => (r1 as i32) >= (r2 as i32),
                Bltu => r1 < r2,
                _ => r1 >= r2,
            };
            if taken {
                next_pc = pc.wrapping_add(imm);
            }
        }
        Jal => {
            state.set_reg(ins.rd, pc.wrapping_add(4));
            next_pc = pc.wrapping_add(imm);
            taken = true;
        }
        Jalr => {
            let target = r1.wrapping_add(imm) & !1;
            state.set_reg(ins.rd, pc.wrapping_add(4));
            next_pc = target;
            taken = true;
        }
        Ecall => {
            if state.reg(17) != 0 {
                return Err(Trap::new(
                    TrapKind::IllegalInstruction,
                    pc,
                    format!("unsupported environment call a7={}", state.reg(17)),
                ));
            }
            halted = true;
        }
        Ebreak => return Err(Trap::new(TrapKind::Breakpoint, pc, "ebreak")),
        Csrrw | Csrr | Csrw => {
            let addr = ins.imm as u16;
            let old = if ins.op == Csrw && ins.rd == 0 {
                0
            } else {
                state.csr_read(addr).map_err(|e| Trap::csr(pc, e))?
            };
            if ins.op != Csrr {
                state.csr_write(addr, r1).map_err(|e| Trap::csr(pc, e))?;
            }
            state.set_reg(ins.rd, old);
        }
        LpSetup => {
            let lp = &mut state.hwloops[ins.rd as usize];
            lp.start = pc.wrapping_add(4);
            lp.end = pc.wrapping_add(imm);
            lp.count = r1;
        }
        LpStart => state.hwloops[ins.rd as usize].start = pc.wrapping_add(imm),
        LpEnd => state.hwloops[ins.rd as usize].end = pc.wrapping_add(imm),
        LpCount => state.hwloops[ins.rd as usize].count = r1,
        Simd(op) => {
            let fmt = effective_format(state, &ins, cfg.mode, pc)?;
            if fmt.is_mixed() {
                return Err(Trap::new(
                    TrapKind::IllegalFormat,
                    pc,
                    format!("mixed format {fmt} is only defined for dot products"),
                ));
            }
            let w = fmt.width_a();
            let b = match ins.variant {
                Variant::Scalar => replicate(r2, w),
                Variant::Imm => replicate(imm, w),
                _ => r2,
            };
            state.set_reg(ins.rd, simd_alu(op, r1, b, w));
        }
        Dot(d) => {
            let fmt = effective_format(state, &ins, cfg.mode, pc)?;
            let b = match ins.variant {
                Variant::Scalar => replicate(r2, fmt.width_b()),
                Variant::Imm => replicate(imm, fmt.width_b()),
                _ => r2,
            };
            let cnt = state.csrs.mpc.cnt;
            let acc = state.reg(ins.rd);
            let r = dotp(r1, b, acc, fmt, cnt, d.sign, d.accumulate);
            state.set_reg(ins.rd, r);
            state.csrs.mpc.on_mac(fmt, true, true);
            macs = fmt.lanes_a() as u32;
            dotp_info = Some((fmt, cnt));
        }
    }

    let mut cycles = cfg.model.cost_of(class);
    if taken {
        cycles += cfg.model.taken_branch_penalty;
    } else if !halted {
        for lp in state.hwloops.iter_mut() {
            if lp.count > 0 && next_pc == lp.end {
                if lp.count > 1 {
                    lp.count -= 1;
                    next_pc = lp.start;
                    cycles += cfg.model.hwloop_backedge_penalty;
                    break;
                }
                lp.count = 0;
            }
        }
    }

    if !halted {
        state.pc = next_pc;
    }
    state.cycles += cycles as u64;
    state.instret.bump(class);
    state.macs += macs as u64;
    Ok(StepInfo { pc, index, class, cycles, macs, taken, halted, dotp: dotp_info })
}

fn load_kind(op: Opcode) -> (u32, bool) {
    use Opcode::*;
    match op {
        Lb | PLb => (1, true),
        Lbu | PLbu => (1, false),
        Lh | PLh => (2, true),
        Lhu | PLhu => (2, false),
        _ => (4, false),
    }
}

fn store_width(op: Opcode) -> u32 {
    use Opcode::*;
    match op {
        Sb | PSb => 1,
        Sh | PSh => 2,
        _ => 4,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub name: String,
    pub instret: u64,
    pub cycles: u64,
    pub by_class: ClassCounts,
}

/// Dot-product unit activity. With clock gating only the unit matching the
/// operand-A width latches its inputs; without it all four units do.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerStats {
    pub dotp_ops: u64,
    pub unit_input_latches: u64,
    pub gated_unit_slots: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub cycles: u64,
    pub instret: u64,
    pub by_class: ClassCounts,
    pub macs: u64,
    pub phases: Vec<PhaseStats>,
    pub power: PowerStats,
}

impl RunStats {
    pub fn phase(&self, name: &str) -> Option<&PhaseStats> {
        self.phases.iter().find(|p| p.name == name)
    }

    pub fn mac_per_cycle(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.macs as f64 / self.cycles as f64
        }
    }
}

/// Runs until the halt convention (`ecall` with a7 = 0) or `max_steps`.
pub fn run(state: &mut MachineState, program: &Program, cfg: &CoreConfig, max_steps: u64) -> Result<RunStats, Trap> {
    run_observed(state, program, cfg, max_steps, |_, _| {})
}

/// Like [`run`], calling `observe` after every retired instruction.
pub fn run_observed<F>(
    state: &mut MachineState,
    program: &Program,
    cfg: &CoreConfig,
    max_steps: u64,
    mut observe: F,
) -> Result<RunStats, Trap>
where
    F: FnMut(&MachineState, &StepInfo),
{
    let mut phases: Vec<PhaseStats> = program
        .phases()
        .iter()
        .map(|n| PhaseStats { name: n.clone(), ..PhaseStats::default() })
        .collect();
    let mut power = PowerStats::default();
    let start_cycles = state.cycles;
    let start_instret = state.instret;
    let start_macs = state.macs;

    let mut steps = 0u64;
    loop {
        if steps >= max_steps {
            return Err(Trap::new(TrapKind::MaxSteps, state.pc, format!("no halt after {max_steps} steps")));
        }
        let info = step(state, program, cfg)?;
        steps += 1;
        let ph = &mut phases[program.phase_index(info.index)];
        ph.instret += 1;
        ph.cycles += info.cycles as u64;
        ph.by_class.bump(info.class);
        if info.dotp.is_some() {
            power.dotp_ops += 1;
            if cfg.clock_gating {
                power.unit_input_latches += 1;
                power.gated_unit_slots += 3;
            } else {
                power.unit_input_latches += 4;
            }
        }
        observe(state, &info);
        if info.halted {
            break;
        }
    }

    let by_class = state.instret.since(&start_instret);
    Ok(RunStats {
        cycles: state.cycles - start_cycles,
        instret: steps,
        by_class,
        macs: state.macs - start_macs,
        phases,
        power,
    })
}
