//! Instruction-set simulator and kernel generator for a RISC-V core with
//! mixed-precision packed-SIMD dot products.
//!
//! The crate is organised bottom-up:
//!
//! * [`format`] and [`simd`]: lane formats and the bit-exact SIMD datapath,
//!   including the mixed-precision slice-and-route logic and its counter.
//! * [`machine`], [`isa`], [`asm`], [`exec`]: architectural state, the
//!   instruction set, a two-pass assembler and the execution loop.
//! * [`quant`]: quantization, packing and golden reference convolution.
//! * [`kernels`]: generated convolution kernels for both ISA modes.
//! * [`bench`]: layer runs, sweeps and report rendering.

pub mod asm;
pub mod bench;
pub mod exec;
pub mod format;
pub mod isa;
pub mod kernels;
pub mod machine;
pub mod quant;
pub mod simd;

pub use asm::{assemble, disassemble, AsmError, Dialect, Program};
pub use exec::{run, step, CoreConfig, CycleModel, IsaMode, RunStats, Trap, TrapKind};
pub use format::{LaneWidth, SignMode, SimdFormat};
pub use machine::MachineState;
