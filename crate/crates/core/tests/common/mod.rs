//! Oracles and drivers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod asm_table;

use mpic::exec::{load_program, run_observed, step, CoreConfig, IsaMode};
use mpic::format::{SignMode, SimdFormat};
use mpic::isa::{DotOp, Instruction, Opcode};
use mpic::machine::{MachineState, Memory, CSR_MPC_CNT, CSR_SIMD_FMT, DEFAULT_MEM_SIZE};
use mpic::asm::Program;
use mpic::kernels::{build_layer_program, LayerConfig};

/// Lane `i` of a packed word, widened to i128 with plain shifts.
pub fn wide_lane(word: u32, bits: u32, i: u32, signed: bool) -> i128 {
    let raw = ((word as u64 >> (i * bits)) & ((1u64 << bits) - 1)) as i128;
    if signed && raw >= 1 << (bits - 1) {
        raw - (1 << bits)
    } else {
        raw
    }
}

/// Unpack-multiply-sum reference for one dot product: the A lanes meet the
/// `cnt`-th run of B lanes. The sum is exact and truncated to 32 bits once.
pub fn oracle_dotp(a: u32, b: u32, acc: u32, fmt: SimdFormat, cnt: u32, sign: SignMode, accumulate: bool) -> u32 {
    let (ab, bb) = (fmt.width_a().bits(), fmt.width_b().bits());
    let n = 32 / ab;
    let mut sum: i128 = if accumulate { acc as i32 as i128 } else { 0 };
    for i in 0..n {
        sum += wide_lane(a, ab, i, sign.a_signed()) * wide_lane(b, bb, cnt * n + i, sign.b_signed());
    }
    (sum & 0xFFFF_FFFF) as u32
}

/// Executes one vector dot product on the simulator with the given format and
/// subgroup count, returning rd.
pub fn exec_dotp(a: u32, b: u32, acc: u32, fmt: SimdFormat, cnt: u32, op: DotOp) -> u32 {
    let mut ins = Instruction::new(Opcode::Dot(op));
    ins.rd = 10;
    ins.rs3 = 10;
    ins.rs1 = 11;
    ins.rs2 = 12;
    let program = Program::from_instrs(vec![ins]);
    let mut s = MachineState::new(Memory::new(0, 64));
    s.csr_write(CSR_SIMD_FMT, fmt.encode()).unwrap();
    s.csr_write(CSR_MPC_CNT, cnt).unwrap();
    s.set_reg(10, acc);
    s.set_reg(11, a);
    s.set_reg(12, b);
    step(&mut s, &program, &CoreConfig::new(IsaMode::Mpic)).unwrap();
    s.reg(10)
}

pub const SIGN_MODES: [SignMode; 3] = [SignMode::Uu, SignMode::Us, SignMode::Ss];

pub fn dot_op(sign: SignMode, accumulate: bool) -> DotOp {
    DotOp { sign, accumulate }
}

/// Exhaustive single-lane products for the formats whose B width is `bits`
/// and whose A width is at most 8: every (x, y) value pair is placed in lane 0
/// of A and lane 0 of each B subgroup in turn. At `bits` = 2 the uniform
/// format alone contributes 16 pairs per sign mode, at 4 it contributes 256.
/// Returns (cases, mismatches).
pub fn exhaustive_single_lane(bits: u32) -> (usize, Vec<String>) {
    let mut cases = 0;
    let mut bad = Vec::new();
    for fmt in SimdFormat::ALL {
        let (ab, bb) = (fmt.width_a().bits(), fmt.width_b().bits());
        if bb != bits || ab > 8 {
            continue;
        }
        let lanes_a = 32 / ab;
        for sign in SIGN_MODES {
            for x in 0..1u32 << ab {
                for y in 0..1u32 << bb {
                    for cnt in 0..fmt.group_count() {
                        let b = y << (cnt * lanes_a * bb);
                        cases += 1;
                        let want = oracle_dotp(x, b, 0, fmt, cnt, sign, false);
                        let got = exec_dotp(x, b, 0, fmt, cnt, dot_op(sign, false));
                        let direct = wide_lane(x, ab, 0, sign.a_signed()) * wide_lane(y, bb, 0, sign.b_signed());
                        if got != want || want != direct as i32 as u32 {
                            bad.push(format!("{fmt} {sign:?} x={x} y={y} cnt={cnt}: got {got:#x}, want {want:#x}"));
                        }
                    }
                }
            }
        }
    }
    (cases, bad)
}

/// Random full-vector cases per format and sign mode, accumulating and not.
pub fn random_vectors(per_format: usize, seed: u64) -> (usize, Vec<String>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut cases = 0;
    let mut bad = Vec::new();
    for fmt in SimdFormat::ALL {
        for k in 0..per_format {
            let sign = SIGN_MODES[k % 3];
            let accumulate = k % 2 == 0;
            let (a, b, acc): (u32, u32, u32) = (rng.gen(), rng.gen(), rng.gen());
            let cnt = rng.gen_range(0..fmt.group_count());
            cases += 1;
            let want = oracle_dotp(a, b, acc, fmt, cnt, sign, accumulate);
            let got = exec_dotp(a, b, acc, fmt, cnt, dot_op(sign, accumulate));
            let lib = mpic::simd::dotp(a, b, acc, fmt, cnt, sign, accumulate);
            if got != want || lib != want {
                bad.push(format!("{fmt} {sign:?} a={a:#x} b={b:#x} acc={acc:#x} cnt={cnt}"));
            }
        }
    }
    (cases, bad)
}

/// The subgroup count each of `n` back-to-back dot products consumed.
pub fn mpc_trace(fmt: SimdFormat, macs_per_group: u32, n: usize) -> Vec<u32> {
    let src = format!(
        "li t0, {}\ncsrw simd_fmt, t0\nli t0, {macs_per_group}\ncsrw mpc_macs_per_group, t0\n{}li a7, 0\necall\n",
        fmt.encode(),
        "pv.sdotup a0, a1, a2\n".repeat(n)
    );
    let program = mpic::assemble(&src, IsaMode::Mpic.dialect()).unwrap();
    let mut state = load_program(&program, DEFAULT_MEM_SIZE).unwrap();
    let mut cnts = Vec::new();
    run_observed(&mut state, &program, &CoreConfig::new(IsaMode::Mpic), 10_000, |_, info| {
        if let Some((_, cnt)) = info.dotp {
            cnts.push(cnt);
        }
    })
    .unwrap();
    cnts
}

pub fn fmt(a: u32, b: u32) -> SimdFormat {
    SimdFormat::from_bits(a, b).unwrap()
}

/// Retired instructions in the MatMul inner loop of the desk layer at 4x4,
/// for (ri5cy, mpic).
pub fn matmul_loop_instret() -> (u64, u64) {
    let cfg = LayerConfig::desk(4, 4);
    let count = |mode| {
        let lp = build_layer_program(&cfg, mode).unwrap();
        let (state, stats) = lp.run(lp.step_budget()).unwrap();
        assert_eq!(lp.output(&state), lp.expected);
        stats.phase("matmul_loop").unwrap().instret
    };
    (count(IsaMode::Ri5cy), count(IsaMode::Mpic))
}
