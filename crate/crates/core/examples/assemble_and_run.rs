//! Assembles a small vector sum, runs it on both cores and prints the
//! per-class instruction counts and cycle totals.

use mpic::exec::{load_program, run, CoreConfig, IsaMode};
use mpic::machine::DEFAULT_MEM_SIZE;
use mpic::{assemble, disassemble};

const SOURCE: &str = r#"
    .data
vec:
    .word 3, 1, 4, 1, 5, 9, 2, 6
    .text
    la   a0, vec
    li   t0, 8
    li   a1, 0
    lp.setup 0, t0, done
    p.lw t1, 4(a0!)
done:
    add  a1, a1, t1
    li   a7, 0
    ecall
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for mode in IsaMode::ALL {
        let program = assemble(SOURCE, mode.dialect())?;
        let mut state = load_program(&program, DEFAULT_MEM_SIZE)?;
        let stats = run(&mut state, &program, &CoreConfig::new(mode), 10_000)?;
        println!("{mode}: sum = {}, {} instructions in {} cycles", state.reg(11), stats.instret, stats.cycles);
        for (class, n) in stats.by_class.iter().filter(|(_, n)| *n > 0) {
            println!("    {:<10} {n}", class.name());
        }
        if mode == IsaMode::Mpic {
            println!("listing:");
            for (i, ins) in program.instrs.iter().enumerate() {
                println!("    {:#06x}  {}", program.addr_of(i), disassemble(ins));
            }
        }
    }
    Ok(())
}
