//! Runs the 16 width configurations on the desk layer in both modes and
//! prints the speedup table. Pass `--bench` for the larger benchmark layer.

use mpic::bench::sweep;
use mpic::kernels::LayerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = if std::env::args().any(|a| a == "--bench") {
        LayerConfig::benchmark(8, 8)
    } else {
        LayerConfig::desk(8, 8)
    };
    let table = sweep(&base)?;
    print!("{}", table.to_markdown());
    Ok(())
}
