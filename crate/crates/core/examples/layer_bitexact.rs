//! Generates the convolution program for one layer, runs it on both cores
//! and compares the packed outputs with the reference pipeline.

use mpic::exec::IsaMode;
use mpic::kernels::{build_layer_program, LayerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = LayerConfig::desk(4, 2);
    println!("layer {} ({}), {} MACs", cfg.id(), cfg.simd_format().unwrap(), cfg.mac_count());
    for mode in IsaMode::ALL {
        let lp = build_layer_program(&cfg, mode)?;
        let (state, stats) = lp.run(lp.step_budget())?;
        let out = lp.output(&state);
        assert_eq!(out, lp.expected, "{mode} output differs");
        println!("{mode:>6}: {:>7} cycles, {:.3} MAC/cycle, output matches", stats.cycles, stats.mac_per_cycle());
        for p in stats.phases.iter().filter(|p| p.cycles > 0) {
            println!("        {:<12} {:>7} cycles", p.name, p.cycles);
        }
    }
    let lp = build_layer_program(&cfg, IsaMode::Mpic)?;
    let body: Vec<&str> = lp.source.lines().skip_while(|l| !l.contains(".phase matmul_loop")).take(20).collect();
    println!("\nmpic inner loop:\n{}", body.join("\n"));
    Ok(())
}
