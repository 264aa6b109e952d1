use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mpic::asm::ABI_NAMES;
use mpic::bench::{self, BenchConfig, BenchError, TableFormat};
use mpic::exec::{load_program, run, CoreConfig, IsaMode, Trap};
use mpic::machine::DEFAULT_MEM_SIZE;

const EXIT_TRAP: u8 = 1;
const EXIT_MISMATCH: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "mpic", version, about = "Mixed-precision RISC-V core simulator and QNN benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble and run a program until it halts (ecall with a7 = 0)
    Asm {
        file: PathBuf,
        #[arg(long, default_value_t = IsaMode::Mpic)]
        mode: IsaMode,
        #[arg(long, default_value_t = 100_000_000)]
        max_steps: u64,
        /// Print all 32 registers after the run
        #[arg(long)]
        dump_regs: bool,
        /// Print words of data memory, as ADDR:COUNT (repeatable)
        #[arg(long, value_name = "ADDR:COUNT")]
        dump_mem: Vec<String>,
    },
    /// Run one convolution layer and check it against the reference pipeline
    Layer {
        config: PathBuf,
        #[arg(long, default_value_t = IsaMode::Mpic)]
        mode: IsaMode,
        /// Write the report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all 16 width configurations in both modes
    Sweep {
        config: PathBuf,
        /// Output table; the format follows the extension (.json, .csv, .md)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_u32(s: &str) -> Result<u32> {
    let s = s.trim();
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u32::from_str_radix(hex, 16)?,
        None => s.parse()?,
    };
    Ok(v)
}

fn cmd_asm(file: &Path, mode: IsaMode, max_steps: u64, dump_regs: bool, dump_mem: &[String]) -> Result<()> {
    let dumps = dump_mem
        .iter()
        .map(|d| {
            let (a, n) = d.split_once(':').with_context(|| format!("--dump-mem expects ADDR:COUNT, got {d:?}"))?;
            Ok((parse_u32(a)?, parse_u32(n)? as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    let source = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let program = mpic::assemble(&source, mode.dialect()).with_context(|| format!("assembling {}", file.display()))?;
    let mut state = load_program(&program, DEFAULT_MEM_SIZE)?;
    let stats = run(&mut state, &program, &CoreConfig::new(mode), max_steps)?;

    println!("mode     {mode}");
    println!("cycles   {}", stats.cycles);
    println!("instret  {}", stats.instret);
    for (class, n) in stats.by_class.iter().filter(|(_, n)| *n > 0) {
        println!("  {:<10} {n}", class.name());
    }
    println!("macs     {}", stats.macs);
    if dump_regs {
        for (i, v) in state.regs().iter().enumerate() {
            println!("x{i:<2} {:<4} {v:#010x} {}", ABI_NAMES[i], *v as i32);
        }
    }
    for (addr, count) in dumps {
        let words = state.mem.read_words(addr, count)?;
        for (k, w) in words.iter().enumerate() {
            println!("{:#010x}: {w:#010x}", addr as usize + 4 * k);
        }
    }
    Ok(())
}

fn cmd_layer(config: &Path, mode: IsaMode, out: Option<&Path>) -> Result<()> {
    let cfg = BenchConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let data = cfg.data()?;
    let run = bench::run_layer(&cfg.layer, mode, &data)?;
    let r = &run.report;
    println!("{} {} ({})", r.config_id, r.isa_mode, r.simd_fmt);
    println!("cycles        {}", r.cycles);
    println!("instret       {}", r.instret_total());
    for (class, n) in r.instret.iter().filter(|(_, n)| **n > 0) {
        println!("  {class:<10} {n}");
    }
    for p in run.stats.phases.iter().filter(|p| p.instret > 0) {
        println!("phase {:<12} {} cycles", p.name, p.cycles);
    }
    println!("macs          {}", r.mac_count);
    println!("mac/cycle     {:.3}", r.mac_per_cycle);
    println!("oracle match  {}", r.oracle_match);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(r)?).with_context(|| format!("writing {}", path.display()))?;
    }
    if !r.oracle_match {
        return Err(BenchError::OracleMismatch { cell: r.cell() }.into());
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: Option<&Path>) -> Result<()> {
    let format = match out {
        Some(p) => match TableFormat::from_path(p) {
            Some(f) => f,
            None => bail!("cannot tell the table format from {}; use .json, .csv or .md", p.display()),
        },
        None => TableFormat::Markdown,
    };
    let cfg = BenchConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if cfg.input_file.is_some() {
        eprintln!("note: sweep synthesizes tensors per width pair; input files are ignored");
    }
    let table = bench::sweep(&cfg.layer)?;
    let text = table.render(format)?;
    match out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            print!("{}", table.to_markdown());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Trap>().is_some() {
            return EXIT_TRAP;
        }
        match cause.downcast_ref::<BenchError>() {
            Some(BenchError::Trap { .. }) => return EXIT_TRAP,
            Some(BenchError::OracleMismatch { .. }) => return EXIT_MISMATCH,
            _ => {}
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.cmd {
        Cmd::Asm { file, mode, max_steps, dump_regs, dump_mem } => cmd_asm(file, *mode, *max_steps, *dump_regs, dump_mem),
        Cmd::Layer { config, mode, out } => cmd_layer(config, *mode, out.as_deref()),
        Cmd::Sweep { config, out } => cmd_sweep(config, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
