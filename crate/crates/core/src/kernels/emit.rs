//! Assembly emission for the three kernel phases and the layer driver.
//!
//! Register conventions of the generated code:
//!
//! | register      | use                                         |
//! |---------------|---------------------------------------------|
//! | a0, a1        | patch pointers of pixel 0 and 1             |
//! | a2            | weight pointer                              |
//! | a3, s11       | output pointers of pixel 0 and 1            |
//! | a4            | requantization parameter pointer            |
//! | a5            | MatMul loop count                           |
//! | a6            | filter block counter                        |
//! | s0..s7        | accumulators (filter-major, pixel-minor)    |
//! | s8, s9        | output row and column of the next patch     |
//! | s10           | pixel pair counter                          |
//! | t0, t1        | activation words                            |
//! | t2..t5        | weight words                                |
//! | t6            | unpacked weight / packed output codes       |
//! | gp, tp        | clamp bounds of the 8-bit requantization    |

use std::fmt::Write;

use super::layout::MemoryLayout;
use super::{KernelPlan, LayerConfig, LayerData, OperandRole, Result};
use crate::asm::{assemble, DataSegment, Program};
use crate::exec::{load_program, run, CoreConfig, IsaMode, RunStats, Trap};
use crate::isa::DotOp;
use crate::machine::{MachineState, CSR_MPC_MACS_PER_GROUP, CSR_SIMD_FMT};
use crate::quant::{code_range, QuantizedTensor, Requant};

const ACC: [&str; 8] = ["s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7"];
const ACT: [&str; 2] = ["t0", "t1"];
const WREG: [&str; 4] = ["t2", "t3", "t4", "t5"];
const APTR: [&str; 2] = ["a0", "a1"];
const OPTR: [&str; 2] = ["a3", "s11"];

fn acc(f: usize, p: usize) -> &'static str {
    ACC[2 * f + p]
}

struct Emitter {
    text: String,
    next_label: usize,
    /// Scheduled operand-B subgroup of every dot product, in program order.
    subgroups: Vec<u32>,
}

impl Emitter {
    fn new() -> Self {
        Emitter { text: String::new(), next_label: 0, subgroups: Vec::new() }
    }

    fn ins(&mut self, s: impl AsRef<str>) {
        let _ = writeln!(self.text, "    {}", s.as_ref());
    }

    fn label(&mut self, l: &str) {
        let _ = writeln!(self.text, "{l}:");
    }

    fn phase(&mut self, name: &str) {
        let _ = writeln!(self.text, ".phase {name}");
    }

    fn comment(&mut self, c: &str) {
        let _ = writeln!(self.text, "    # {c}");
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.next_label += 1;
        format!(".L{stem}{}", self.next_label)
    }

    /// `rd = rs + imm`, through t6 when the immediate does not fit 12 bits.
    fn add_imm(&mut self, rd: &str, rs: &str, imm: i64) {
        if imm == 0 && rd == rs {
            return;
        }
        if (-2048..=2047).contains(&imm) {
            self.ins(format!("addi {rd}, {rs}, {imm}"));
        } else {
            self.ins(format!("li t6, {imm}"));
            self.ins(format!("add {rd}, {rs}, t6"));
        }
    }

    /// Emits `body` `count` times, unrolled when short, else as a hardware loop
    /// counted in `count_reg`.
    fn repeat(&mut self, count: usize, unroll_limit: usize, count_reg: &str, body: &dyn Fn(&mut Emitter)) {
        if count == 0 {
            return;
        }
        if count <= unroll_limit {
            for _ in 0..count {
                body(self);
            }
        } else {
            let end = self.fresh("rep");
            self.ins(format!("li {count_reg}, {count}"));
            self.ins(format!("lp.setup 0, {count_reg}, {end}"));
            body(self);
            self.label(&end);
        }
    }
}

fn width_suffix(plan: &KernelPlan) -> &'static str {
    match (plan.mode, plan.compute_bits()) {
        (IsaMode::Mpic, _) => "",
        (_, 16) => ".h",
        _ => ".b",
    }
}

fn sdot_mnemonic(plan: &KernelPlan) -> String {
    let d = DotOp { sign: plan.sign, accumulate: true };
    format!("pv.{}{}", d.mnemonic(), width_suffix(plan))
}

/// im2col subroutine: builds the patch of output pixel (s8, s9) at a0, then
/// advances (s8, s9) to the next pixel in row-major order.
fn emit_im2col(e: &mut Emitter, cfg: &LayerConfig, plan: &KernelPlan, l: &MemoryLayout) {
    let wpp = l.act_pixel_words;
    let r = l.act_unpack;
    let pix_bytes = 4 * wpp;
    e.phase("im2col");
    e.label("im2col");
    if cfg.stride == 1 {
        e.add_imm("s0", "s8", -(cfg.pad as i64));
        e.add_imm("s1", "s9", -(cfg.pad as i64));
    } else {
        e.ins(format!("li t0, {}", cfg.stride));
        e.ins("mul s0, s8, t0");
        e.ins("mul s1, s9, t0");
        e.add_imm("s0", "s0", -(cfg.pad as i64));
        e.add_imm("s1", "s1", -(cfg.pad as i64));
    }
    e.ins(format!("li s2, {}", cfg.in_h));
    e.ins(format!("li s3, {}", cfg.in_w));
    e.ins(format!("li s6, {}", pix_bytes * cfg.in_w));
    e.ins(format!("li s7, {:#x}", l.x_base));
    if !pix_bytes.is_power_of_two() {
        e.ins(format!("li t3, {pix_bytes}"));
    }

    let cw = plan.compute_bits();
    let ab = cfg.act_bits;
    let sfx = width_suffix(plan);
    let right = if cfg.act_signed { "sra" } else { "srl" };
    let copy_word = move |e: &mut Emitter| {
        e.ins("p.lw t0, 4(t2!)");
        if r == 1 {
            e.ins("p.sw t0, 4(a0!)");
            return;
        }
        for j in 0..r as u32 {
            if j + 1 < r as u32 {
                e.ins(format!("pv.sll.sci{sfx} t1, t0, {}", cw - ab * (j + 1)));
                e.ins(format!("pv.{right}.sci{sfx} t1, t1, {}", cw - ab));
            } else {
                e.ins(format!("pv.{right}.sci{sfx} t1, t0, {}", cw - ab));
            }
            e.ins("p.sw t1, 4(a0!)");
        }
    };
    let zero_word = |e: &mut Emitter| e.ins("p.sw x0, 4(a0!)");

    for dy in 0..cfg.k_h {
        let zrow = e.fresh("zrow");
        let next_row = e.fresh("nrow");
        e.ins(format!("addi s4, s0, {dy}"));
        e.ins(format!("bgeu s4, s2, {zrow}"));
        e.ins("mul s5, s4, s6");
        e.ins("add s5, s5, s7");
        for dx in 0..cfg.k_w {
            let zpix = e.fresh("zpix");
            let next = e.fresh("npix");
            e.ins(format!("addi t1, s1, {dx}"));
            e.ins(format!("bgeu t1, s3, {zpix}"));
            if pix_bytes.is_power_of_two() {
                e.ins(format!("slli t2, t1, {}", pix_bytes.trailing_zeros()));
            } else {
                e.ins("mul t2, t1, t3");
            }
            e.ins("add t2, s5, t2");
            e.repeat(wpp, if r == 1 { 4 } else { 1 }, "t4", &copy_word);
            e.ins(format!("j {next}"));
            e.label(&zpix);
            e.repeat(wpp * r, 8, "t4", &zero_word);
            e.label(&next);
        }
        e.ins(format!("j {next_row}"));
        e.label(&zrow);
        e.repeat(cfg.k_w * wpp * r, 8, "t4", &zero_word);
        e.label(&next_row);
    }
    e.repeat(l.buf_words - l.patch_words, 8, "t4", &zero_word);
    let done = e.fresh("i2c_done");
    e.ins("addi s9, s9, 1");
    e.ins(format!("li t0, {}", cfg.out_w()));
    e.ins(format!("bne s9, t0, {done}"));
    e.ins("li s9, 0");
    e.ins("addi s8, s8, 1");
    e.label(&done);
    e.ins("ret");
}

/// MatMul for one block of `nf` filters and `np` pixels: clears the
/// accumulators, runs the hardware loop and rewinds the patch pointers.
fn emit_matmul(e: &mut Emitter, cfg: &LayerConfig, plan: &KernelPlan, l: &MemoryLayout, nf: usize, np: usize) {
    let sdot = sdot_mnemonic(plan);
    let (rs1_is_act, g_count) = (plan.act_is_rs1, plan.simd_fmt.group_count());
    let dot = |e: &mut Emitter, f: usize, p: usize, w: &str, g: u32| {
        let (x, y) = if rs1_is_act { (ACT[p], w) } else { (w, ACT[p]) };
        e.ins(format!("{sdot} {}, {x}, {y}", acc(f, p)));
        e.subgroups.push(g);
    };

    e.phase("matmul");
    for f in 0..nf {
        for p in 0..np {
            e.ins(format!("li {}, 0", acc(f, p)));
        }
    }
    let end = e.fresh("mm_end");
    e.ins(format!("lp.setup 0, a5, {end}"));
    e.phase("matmul_loop");
    match plan.mode {
        IsaMode::Mpic if plan.b_role == OperandRole::Weights => {
            for w in &WREG[..nf] {
                e.ins(format!("p.lw {w}, 4(a2!)"));
            }
            for g in 0..g_count {
                for p in 0..np {
                    e.ins(format!("p.lw {}, 4({}!)", ACT[p], APTR[p]));
                }
                for f in 0..nf {
                    for p in 0..np {
                        dot(e, f, p, WREG[f], g);
                    }
                }
            }
        }
        IsaMode::Mpic => {
            for p in 0..np {
                e.ins(format!("p.lw {}, 4({}!)", ACT[p], APTR[p]));
            }
            for g in 0..g_count {
                for w in &WREG[..nf] {
                    e.ins(format!("p.lw {w}, 4(a2!)"));
                }
                for f in 0..nf {
                    for p in 0..np {
                        dot(e, f, p, WREG[f], g);
                    }
                }
            }
        }
        IsaMode::Ri5cy => {
            for w in &WREG[..nf] {
                e.ins(format!("p.lw {w}, 4(a2!)"));
            }
            let rw = plan.weight_unpack;
            if rw == 1 {
                for p in 0..np {
                    e.ins(format!("p.lw {}, 4({}!)", ACT[p], APTR[p]));
                }
                for f in 0..nf {
                    for p in 0..np {
                        dot(e, f, p, WREG[f], 0);
                    }
                }
            } else {
                let cw = plan.compute_bits();
                let wb = cfg.w_bits;
                let sfx = width_suffix(plan);
                let right = if cfg.w_signed { "sra" } else { "srl" };
                for j in 0..rw {
                    for p in 0..np {
                        e.ins(format!("p.lw {}, 4({}!)", ACT[p], APTR[p]));
                    }
                    for f in 0..nf {
                        if j + 1 < rw {
                            e.ins(format!("pv.sll.sci{sfx} t6, {}, {}", WREG[f], cw - wb * (j + 1)));
                            e.ins(format!("pv.{right}.sci{sfx} t6, t6, {}", cw - wb));
                        } else {
                            e.ins(format!("pv.{right}.sci{sfx} t6, {}, {}", WREG[f], cw - wb));
                        }
                        for p in 0..np {
                            dot(e, f, p, "t6", 0);
                        }
                    }
                }
            }
        }
    }
    e.label(&end);
    e.phase("matmul");
    for p in 0..np {
        e.add_imm(APTR[p], APTR[p], -(l.buf_bytes() as i64));
    }
}

/// Threshold search tree over sorted thresholds `[lo, hi)` stored in heap
/// order; each leaf adds its output code into t6.
#[allow(clippy::too_many_arguments)]
fn emit_tree(
    e: &mut Emitter,
    accr: &str,
    base_word: usize,
    lo: usize,
    hi: usize,
    slot: usize,
    first: bool,
    flip: i32,
    done: &str,
    last: bool,
) {
    if lo == hi {
        let code = lo as i32 ^ flip;
        if first {
            e.ins(format!("li t6, {code}"));
        } else if code != 0 {
            e.ins(format!("addi t6, t6, {code}"));
        }
        if !last {
            e.ins(format!("j {done}"));
        }
        return;
    }
    let mid = (lo + hi) / 2;
    let left = e.fresh("thl");
    e.ins(format!("lw t5, {}(a4)", 4 * (base_word + slot)));
    e.ins(format!("blt {accr}, t5, {left}"));
    emit_tree(e, accr, base_word, mid + 1, hi, 2 * slot + 2, first, flip, done, false);
    e.label(&left);
    emit_tree(e, accr, base_word, lo, mid, 2 * slot + 1, first, flip, done, last);
}

/// QntPack for one block: requantizes each accumulator, Horner-packs the
/// block's codes per pixel and stores them.
fn emit_qntpack(e: &mut Emitter, cfg: &LayerConfig, requant: &Requant, l: &MemoryLayout, nf: usize, np: usize) {
    let ob = cfg.out_bits;
    e.phase("qntpack");
    for p in 0..np {
        for f in (0..nf).rev() {
            let first = f == nf - 1;
            let accr = acc(f, p);
            if !first {
                e.ins(format!("slli t6, t6, {ob}"));
            }
            match requant {
                Requant::Thresholds(_) => {
                    let n = (1usize << ob) - 1;
                    let flip = if cfg.out_signed { 1 << (ob - 1) } else { 0 };
                    let done = e.fresh("thd");
                    emit_tree(e, accr, f * l.q_words_per_channel, 0, n, 0, first, flip, &done, true);
                    e.label(&done);
                }
                Requant::ScaleClamp(s) => {
                    let (ok_lo, ok_hi) = (e.fresh("cl"), e.fresh("ch"));
                    e.ins(format!("lw t5, {}(a4)", 4 * f));
                    e.ins(format!("add t5, {accr}, t5"));
                    if s.shift > 0 {
                        e.ins(format!("srai t5, t5, {}", s.shift));
                    }
                    e.ins(format!("bge t5, gp, {ok_lo}"));
                    e.ins("mv t5, gp");
                    e.label(&ok_lo);
                    e.ins(format!("bge tp, t5, {ok_hi}"));
                    e.ins("mv t5, tp");
                    e.label(&ok_hi);
                    if s.lo < 0 {
                        e.ins(format!("andi t5, t5, {}", (1u32 << ob) - 1));
                    }
                    if first {
                        e.ins("mv t6, t5");
                    } else {
                        e.ins("or t6, t6, t5");
                    }
                }
            }
        }
        let store = match l.group_bytes {
            1 => "p.sb",
            2 => "p.sh",
            _ => "p.sw",
        };
        e.ins(format!("{store} t6, {}({}!)", l.group_bytes, OPTR[p]));
    }
    e.add_imm("a4", "a4", (4 * nf * l.q_words_per_channel) as i64);
}

fn emit_block(
    e: &mut Emitter,
    cfg: &LayerConfig,
    plan: &KernelPlan,
    requant: &Requant,
    l: &MemoryLayout,
    nf: usize,
    np: usize,
) {
    emit_matmul(e, cfg, plan, l, nf, np);
    emit_qntpack(e, cfg, requant, l, nf, np);
}

fn set_macs_per_group(e: &mut Emitter, plan: &KernelPlan, n: usize) {
    if plan.mode == IsaMode::Mpic {
        e.ins(format!("li t0, {n}"));
        e.ins(format!("csrw {CSR_MPC_MACS_PER_GROUP:#x}, t0"));
    }
}

/// All output-pixel passes for `np` pixels at a time: the 4-filter block loop
/// followed by the remainder block.
fn emit_filter_blocks(
    e: &mut Emitter,
    cfg: &LayerConfig,
    plan: &KernelPlan,
    requant: &Requant,
    l: &MemoryLayout,
    np: usize,
) {
    let full = cfg.out_c / 4;
    let rem = cfg.out_c % 4;
    e.ins(format!("li a2, {:#x}", l.w_base));
    e.ins(format!("li a4, {:#x}", l.q_base));
    if full > 0 {
        let top = e.fresh("blk");
        e.ins(format!("li a6, {full}"));
        e.label(&top);
        emit_block(e, cfg, plan, requant, l, 4, np);
        e.phase("control");
        e.ins("addi a6, a6, -1");
        e.ins(format!("bnez a6, {top}"));
    }
    if rem > 0 {
        e.phase("control");
        set_macs_per_group(e, plan, rem * np);
        emit_block(e, cfg, plan, requant, l, rem, np);
        e.phase("control");
        set_macs_per_group(e, plan, plan.macs_per_group as usize * np / 2);
    }
}

/// Standalone im2col section, as emitted into layer programs.
pub fn gen_im2col(cfg: &LayerConfig, plan: &KernelPlan) -> String {
    let mut e = Emitter::new();
    emit_im2col(&mut e, cfg, plan, &MemoryLayout::new(cfg, plan));
    e.text
}

/// Standalone MatMul section for a block of `nf` filters and `np` pixels.
pub fn gen_matmul(cfg: &LayerConfig, plan: &KernelPlan, nf: usize, np: usize) -> String {
    assert!((1..=4).contains(&nf) && (1..=2).contains(&np));
    let mut e = Emitter::new();
    emit_matmul(&mut e, cfg, plan, &MemoryLayout::new(cfg, plan), nf, np);
    e.text
}

/// Standalone QntPack section for a block of `nf` filters and `np` pixels.
pub fn gen_qntpack(cfg: &LayerConfig, plan: &KernelPlan, requant: &Requant, nf: usize, np: usize) -> String {
    assert!((1..=4).contains(&nf) && (1..=2).contains(&np));
    let mut e = Emitter::new();
    emit_qntpack(&mut e, cfg, requant, &MemoryLayout::new(cfg, plan), nf, np);
    e.text
}

/// A complete, runnable layer: program, data image and reference output.
#[derive(Debug, Clone)]
pub struct LayerProgram {
    pub cfg: LayerConfig,
    pub plan: KernelPlan,
    pub layout: MemoryLayout,
    pub source: String,
    pub program: Program,
    pub expected: QuantizedTensor,
    /// Operand-B subgroup each dot product was scheduled for, in program order.
    pub mac_subgroups: Vec<u32>,
}

impl LayerProgram {
    /// A fresh machine with the data image loaded.
    pub fn machine(&self) -> MachineState {
        load_program(&self.program, self.layout.mem_size).expect("layout fits its own memory size")
    }

    pub fn run(&self, max_steps: u64) -> std::result::Result<(MachineState, RunStats), Trap> {
        let mut state = self.machine();
        let stats = run(&mut state, &self.program, &CoreConfig::new(self.plan.mode), max_steps)?;
        Ok((state, stats))
    }

    pub fn output(&self, state: &MachineState) -> QuantizedTensor {
        self.layout.read_output(&self.cfg, &state.mem)
    }

    /// Generous bound on the steps a correct run needs.
    pub fn step_budget(&self) -> u64 {
        let per_mac = 4 + self.plan.weight_unpack as u64;
        self.cfg.mac_count() * per_mac + 1_000_000
    }
}

/// Builds the layer with tensors synthesized from `cfg.seed`.
pub fn build_layer_program(cfg: &LayerConfig, mode: IsaMode) -> Result<LayerProgram> {
    build_layer_program_with(cfg, mode, &LayerData::synthesize(cfg)?)
}

pub fn build_layer_program_with(cfg: &LayerConfig, mode: IsaMode, data: &LayerData) -> Result<LayerProgram> {
    data.check(cfg)?;
    let plan = KernelPlan::new(cfg, mode)?;
    let l = MemoryLayout::new(cfg, &plan);
    let pixels = cfg.out_h() * cfg.out_w();
    let s = l.out_pixel_bytes;
    let written = cfg.out_c.div_ceil(4) * l.group_bytes;

    let mut e = Emitter::new();
    e.ins(".text");
    e.ins(".globl _start");
    e.phase("control");
    e.label("_start");
    if mode == IsaMode::Mpic {
        e.comment(&format!("operand precision {}", plan.simd_fmt));
        e.ins(format!("li t0, {:#x}", plan.simd_fmt.encode()));
        e.ins(format!("csrw {CSR_SIMD_FMT:#x}, t0"));
        set_macs_per_group(&mut e, &plan, plan.macs_per_group as usize);
    }
    if let Requant::ScaleClamp(sc) = &data.requant {
        let (lo, hi) = code_range(cfg.out_bits, cfg.out_signed);
        e.ins(format!("li gp, {}", sc.lo.max(lo)));
        e.ins(format!("li tp, {}", sc.hi.min(hi)));
    }
    e.ins(format!("li a5, {}", l.loop_count));
    e.ins("li s8, 0");
    e.ins("li s9, 0");
    e.ins(format!("li a3, {:#x}", l.out_base));
    e.add_imm("s11", "a3", s as i64);

    if pixels / 2 > 0 {
        e.ins(format!("li s10, {}", pixels / 2));
        e.label("pair_loop");
        e.ins(format!("li a0, {:#x}", l.buf0));
        e.ins("call im2col");
        e.ins(format!("li a0, {:#x}", l.buf1));
        e.ins("call im2col");
        e.ins(format!("li a0, {:#x}", l.buf0));
        e.ins(format!("li a1, {:#x}", l.buf1));
        emit_filter_blocks(&mut e, cfg, &plan, &data.requant, &l, 2);
        e.phase("control");
        e.add_imm("a3", "a3", (2 * s - written) as i64);
        e.add_imm("s11", "a3", s as i64);
        e.ins("addi s10, s10, -1");
        e.ins("bnez s10, pair_loop");
    }
    if pixels % 2 == 1 {
        e.comment("last pixel on its own");
        e.ins(format!("li a0, {:#x}", l.buf0));
        e.ins("call im2col");
        e.ins(format!("li a0, {:#x}", l.buf0));
        set_macs_per_group(&mut e, &plan, plan.macs_per_group as usize / 2);
        emit_filter_blocks(&mut e, cfg, &plan, &data.requant, &l, 1);
        e.phase("control");
    }
    e.ins("li a7, 0");
    e.ins("ecall");
    emit_im2col(&mut e, cfg, &plan, &l);

    let mut program = assemble(&e.text, mode.dialect())?;
    program.data_segments.extend([
        words_segment(l.x_base, &l.input_image(cfg, &data.input)),
        words_segment(l.w_base, &l.weight_image(cfg, &plan, &data.weights)),
        words_segment(l.q_base, &l.qparam_image(cfg, &data.requant)),
    ]);
    Ok(LayerProgram {
        cfg: cfg.clone(),
        expected: data.expected_output(cfg)?,
        plan,
        layout: l,
        source: e.text,
        program,
        mac_subgroups: e.subgroups,
    })
}

fn words_segment(addr: u32, words: &[u32]) -> DataSegment {
    DataSegment { addr, bytes: words.iter().flat_map(|w| w.to_le_bytes()).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{InstrClass, Opcode};
    use crate::quant::{ScaleClampParams, ThresholdSet};

    fn small(act: u32, w: u32) -> LayerConfig {
        LayerConfig { in_h: 4, in_w: 5, in_c: 6, out_c: 6, ..LayerConfig::desk(act, w) }
    }

    fn check(cfg: &LayerConfig, mode: IsaMode) -> RunStats {
        let lp = build_layer_program(cfg, mode).unwrap();
        let (state, stats) = lp.run(lp.step_budget()).unwrap_or_else(|t| panic!("{} {mode}: {t}", cfg.id()));
        assert_eq!(lp.output(&state), lp.expected, "{} {mode}", cfg.id());
        stats
    }

    #[test]
    fn odd_shapes_all_formats_both_modes() {
        for f in crate::format::SimdFormat::ALL {
            let (a, b) = (f.width_a().bits(), f.width_b().bits());
            for (act, w) in [(a, b), (b, a)] {
                for mode in IsaMode::ALL {
                    check(&small(act, w), mode);
                }
            }
        }
    }

    #[test]
    fn signed_variants_and_stride() {
        let mut cfg = small(8, 4);
        cfg.w_signed = true;
        cfg.out_signed = true;
        cfg.stride = 2;
        for mode in IsaMode::ALL {
            check(&cfg, mode);
        }
        let mut cfg = small(2, 4);
        cfg.act_signed = true;
        cfg.w_signed = true;
        cfg.out_signed = true;
        cfg.pad = 0;
        for mode in IsaMode::ALL {
            check(&cfg, mode);
        }
        let mut cfg = small(16, 2);
        cfg.act_signed = true;
        check(&cfg, IsaMode::Ri5cy);
    }

    #[test]
    fn eight_by_eight_bodies_match_across_modes() {
        let cfg = LayerConfig::desk(8, 8);
        let ops = |mode| {
            let lp = build_layer_program(&cfg, mode).unwrap();
            let body: Vec<_> = (0..lp.program.instrs.len())
                .filter(|&i| lp.program.phase_name(i) == "matmul_loop")
                .map(|i| lp.program.instrs[i].op)
                .collect();
            body
        };
        let (a, b) = (ops(IsaMode::Mpic), ops(IsaMode::Ri5cy));
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|o| matches!(o, Opcode::Dot(_))).count() % 8, 0);
    }

    #[test]
    fn eight_bit_inner_loop_is_six_loads_and_eight_macs() {
        let cfg = LayerConfig::desk(8, 8);
        let plan = KernelPlan::new(&cfg, IsaMode::Mpic).unwrap();
        let text = gen_matmul(&cfg, &plan, 4, 2);
        let body: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.contains("matmul_loop"))
            .skip(1)
            .take_while(|l| !l.ends_with(':'))
            .collect();
        assert_eq!(body.len(), 14);
        assert_eq!(body.iter().filter(|l| l.contains("p.lw")).count(), 6);
        assert_eq!(body.iter().filter(|l| l.contains("pv.sdot")).count(), 8);
    }

    #[test]
    fn qntpack_section_codes() {
        // out 2-bit, thresholds [-16, 0, 16], every accumulator 5 -> code 2
        let cfg = LayerConfig { out_c: 4, ..LayerConfig::desk(2, 2) };
        let plan = KernelPlan::new(&cfg, IsaMode::Mpic).unwrap();
        let t = Requant::Thresholds(ThresholdSet::new(2, vec![vec![-16, 0, 16]; 4]).unwrap());
        let l = MemoryLayout::new(&cfg, &plan);
        let mut src = String::from("li s0, 5\nli s2, 5\nli s4, 5\nli s6, -40\nli a4, 0x800\nli a3, 0x900\n");
        src += &gen_qntpack(&cfg, &plan, &t, 4, 1);
        src += "ecall\n";
        let mut p = assemble(&src, crate::asm::Dialect::Mpic).unwrap();
        p.data_segments.push(words_segment(0x800, &l.qparam_image(&cfg, &t)));
        let mut s = load_program(&p, 0x1000).unwrap();
        run(&mut s, &p, &CoreConfig::new(IsaMode::Mpic), 1000).unwrap();
        // codes 2, 2, 2, 0 from channel 0 upward
        assert_eq!(s.mem.load(0x900, 1, false).unwrap(), 0b00_10_10_10);

        let sc = Requant::ScaleClamp(ScaleClampParams::new(vec![16], 4, 0, 255).unwrap());
        let cfg8 = LayerConfig { out_c: 4, ..LayerConfig::desk(8, 8) };
        let mut src = String::from("li s0, 100\nli s2, 5000\nli s4, -99\nli s6, 32\nli gp, 0\nli tp, 255\nli a4, 0x800\nli a3, 0x900\n");
        src += &gen_qntpack(&cfg8, &plan, &sc, 4, 1);
        src += "ecall\n";
        let mut p = assemble(&src, crate::asm::Dialect::Mpic).unwrap();
        p.data_segments.push(words_segment(0x800, &[16, 16, 16, 16]));
        let mut s = load_program(&p, 0x1000).unwrap();
        run(&mut s, &p, &CoreConfig::new(IsaMode::Mpic), 1000).unwrap();
        let want = [(100 + 16) >> 4, 255, 0, (32 + 16) >> 4];
        let packed = want.iter().rev().fold(0u32, |acc, &c| (acc << 8) | c as u32);
        assert_eq!(s.mem.load_word(0x900).unwrap(), packed);
    }

    /// Runs until the first im2col call returns and reads the first patch.
    fn first_patch(cfg: &LayerConfig) -> Vec<u32> {
        let lp = build_layer_program(cfg, IsaMode::Mpic).unwrap();
        let mut st = lp.machine();
        let cc = CoreConfig::new(IsaMode::Mpic);
        loop {
            let info = crate::exec::step(&mut st, &lp.program, &cc).unwrap();
            if lp.program.instrs[info.index].op == Opcode::Jalr {
                break;
            }
        }
        st.mem.read_words(lp.layout.buf0, lp.layout.patch_words).unwrap()
    }

    #[test]
    fn im2col_patch_contents() {
        // 3x3x1 input, 2x2 kernel, pad 0, first pixel
        let cfg = LayerConfig {
            in_h: 3,
            in_w: 3,
            in_c: 1,
            out_c: 4,
            k_h: 2,
            k_w: 2,
            pad: 0,
            ..LayerConfig::desk(8, 8)
        };
        let input = LayerData::synthesize(&cfg).unwrap().input.values();
        let want: Vec<u32> = [0, 1, 3, 4].iter().map(|&i| input[i] as u32).collect();
        assert_eq!(first_patch(&cfg), want);

        // with pad 1 the first output pixel sees three padded taps
        let cfg = LayerConfig { pad: 1, ..cfg };
        let input = LayerData::synthesize(&cfg).unwrap().input.values();
        assert_eq!(first_patch(&cfg), vec![0, 0, 0, input[0] as u32]);

        // 2-bit patches stay packed: 16 channels per word
        let cfg = LayerConfig { in_c: 16, ..LayerConfig::desk(2, 2) };
        let lp = build_layer_program(&cfg, IsaMode::Mpic).unwrap();
        assert_eq!(lp.layout.buf_bytes(), 9 * 16 / 4);
    }

    #[test]
    fn mpic_mac_order_follows_the_counter() {
        for (act, w) in [(8, 4), (8, 2), (2, 8), (16, 2), (4, 2)] {
            let cfg = small(act, w);
            let lp = build_layer_program(&cfg, IsaMode::Mpic).unwrap();
            let mut dot_rank = vec![usize::MAX; lp.program.instrs.len()];
            let mut k = 0;
            for (i, ins) in lp.program.instrs.iter().enumerate() {
                if ins.class() == InstrClass::SimdDotp {
                    dot_rank[i] = k;
                    k += 1;
                }
            }
            assert_eq!(k, lp.mac_subgroups.len());
            let mut st = lp.machine();
            let mut bad = 0usize;
            crate::exec::run_observed(&mut st, &lp.program, &CoreConfig::new(IsaMode::Mpic), lp.step_budget(), |_, info| {
                if let Some((_, cnt)) = info.dotp {
                    if lp.mac_subgroups[dot_rank[info.index]] != cnt {
                        bad += 1;
                    }
                }
            })
            .unwrap();
            assert_eq!(bad, 0, "{}", cfg.id());
        }
    }
}
