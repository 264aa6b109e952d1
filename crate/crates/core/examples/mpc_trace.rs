//! Traces the mixed-precision controller through a 8x2 inner loop. The
//! count selects which quarter of the 2-bit operand feeds the 8-bit lanes
//! and advances after every `MACS_PER_GROUP` dot products.

use mpic::format::SimdFormat;
use mpic::exec::{load_program, run_observed, CoreConfig, IsaMode};
use mpic::machine::{CSR_MPC_CNT, DEFAULT_MEM_SIZE};
use mpic::assemble;

const SOURCE: &str = r#"
    li   t0, {fmt}
    csrw simd_fmt, t0
    li   t0, 2
    csrw mpc_macs_per_group, t0
    li   a1, 0x01010101
    li   a2, 0x01010101
    li   a3, 0xFFAA5500     # subgroup k holds four lanes of value k
    li   t1, 8
    lp.setup 0, t1, end
    pv.sdotup a4, a1, a3
end:
    pv.sdotup a5, a2, a3
    li   a7, 0
    ecall
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fmt = SimdFormat::from_bits(8, 2).expect("8x2 is a valid format");
    let source = SOURCE.replace("{fmt}", &fmt.encode().to_string());
    let program = assemble(&source, IsaMode::Mpic.dialect())?;
    let mut state = load_program(&program, DEFAULT_MEM_SIZE)?;
    println!("{:>3}  {:<28} {:>3} {:>6} {:>6}", "#", "instruction", "cnt", "a4", "a5");
    let mut n = 0;
    run_observed(&mut state, &program, &CoreConfig::new(IsaMode::Mpic), 1000, |s, info| {
        if let Some((_, cnt_used)) = info.dotp {
            n += 1;
            let text = mpic::disassemble(&program.instrs[info.index]);
            let next = s.csr_read(CSR_MPC_CNT).unwrap_or(0);
            println!("{n:>3}  {text:<28} {cnt_used:>3} {:>6} {:>6}   next cnt {next}", s.reg(14), s.reg(15));
        }
    })?;
    Ok(())
}
