//! Architectural state of the simulated core.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::SimdFormat;
use crate::isa::InstrClass;
use crate::simd::MpcState;

pub const CSR_SIMD_FMT: u16 = 0x7C0;
pub const CSR_MPC_CNT: u16 = 0x7C1;
pub const CSR_MPC_MACS_PER_GROUP: u16 = 0x7C2;
pub const CSR_SCRATCH_BASE: u16 = 0x7C8;
pub const CSR_SCRATCH_COUNT: u16 = 8;
/// Read-only low words of the cycle and retired-instruction counters.
pub const CSR_CYCLE: u16 = 0xC00;
pub const CSR_INSTRET: u16 = 0xC02;

pub const DEFAULT_MEM_SIZE: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsrError {
    #[error("illegal CSR {0:#05x}")]
    Undefined(u16),
    #[error("CSR {0:#05x} is read-only")]
    ReadOnly(u16),
    #[error("illegal SIMD format encoding {0:#x}")]
    IllegalFormat(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("misaligned {width}-byte access at {addr:#010x}")]
    Misaligned { addr: u32, width: u32 },
    #[error("access at {addr:#010x} outside memory")]
    OutOfRange { addr: u32 },
}

/// Control and status registers, including the SIMD format and MPC registers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrFile {
    pub simd_fmt: SimdFormat,
    pub mpc: MpcState,
    pub scratch: [u32; CSR_SCRATCH_COUNT as usize],
}

impl Default for CsrFile {
    fn default() -> Self {
        CsrFile { simd_fmt: SimdFormat::RESET, mpc: MpcState::default(), scratch: [0; 8] }
    }
}

impl CsrFile {
    fn scratch_index(addr: u16) -> Option<usize> {
        (CSR_SCRATCH_BASE..CSR_SCRATCH_BASE + CSR_SCRATCH_COUNT)
            .contains(&addr)
            .then(|| (addr - CSR_SCRATCH_BASE) as usize)
    }
}

/// One hardware-loop level. Inactive iff `count == 0`. `end` is exclusive:
/// the address of the first instruction after the body.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HwLoopState {
    pub start: u32,
    pub end: u32,
    pub count: u32,
}

/// Flat little-endian data memory. Instructions live in the program, not here.
#[derive(Clone, PartialEq, Eq)]
pub struct Memory {
    base: u32,
    data: Vec<u8>,
}

impl fmt::Debug for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Memory").field("base", &self.base).field("size", &self.data.len()).finish()
    }
}

impl Memory {
    pub fn new(base: u32, size: usize) -> Self {
        Memory { base, data: vec![0; size] }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn size(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn offset(&self, addr: u32, width: u32) -> Result<usize, MemError> {
        if !addr.is_multiple_of(width) {
            return Err(MemError::Misaligned { addr, width });
        }
        let off = addr.checked_sub(self.base).ok_or(MemError::OutOfRange { addr })? as usize;
        if off + width as usize > self.data.len() {
            return Err(MemError::OutOfRange { addr });
        }
        Ok(off)
    }

    /// Naturally aligned little-endian load of 1, 2 or 4 bytes, extended to 32 bits.
    #[inline]
    pub fn load(&self, addr: u32, width: u32, signed: bool) -> Result<u32, MemError> {
        let off = self.offset(addr, width)?;
        let d = &self.data;
        Ok(match (width, signed) {
            (1, false) => d[off] as u32,
            (1, true) => d[off] as i8 as i32 as u32,
            (2, false) => u16::from_le_bytes([d[off], d[off + 1]]) as u32,
            (2, true) => i16::from_le_bytes([d[off], d[off + 1]]) as i32 as u32,
            (4, _) => u32::from_le_bytes([d[off], d[off + 1], d[off + 2], d[off + 3]]),
            _ => unreachable!("access width {width}"),
        })
    }

    #[inline]
    pub fn store(&mut self, addr: u32, width: u32, value: u32) -> Result<(), MemError> {
        let off = self.offset(addr, width)?;
        let bytes = value.to_le_bytes();
        self.data[off..off + width as usize].copy_from_slice(&bytes[..width as usize]);
        Ok(())
    }

    pub fn load_word(&self, addr: u32) -> Result<u32, MemError> {
        self.load(addr, 4, false)
    }

    pub fn store_word(&mut self, addr: u32, value: u32) -> Result<(), MemError> {
        self.store(addr, 4, value)
    }

    pub fn write_bytes(&mut self, addr: u32, bytes: &[u8]) -> Result<(), MemError> {
        let off = addr.checked_sub(self.base).ok_or(MemError::OutOfRange { addr })? as usize;
        if off + bytes.len() > self.data.len() {
            return Err(MemError::OutOfRange { addr });
        }
        self.data[off..off + bytes.len()].copy_from_slice(bytes);
        Ok(())
    }

    pub fn read_bytes(&self, addr: u32, len: usize) -> Result<&[u8], MemError> {
        let off = addr.checked_sub(self.base).ok_or(MemError::OutOfRange { addr })? as usize;
        if off + len > self.data.len() {
            return Err(MemError::OutOfRange { addr });
        }
        Ok(&self.data[off..off + len])
    }

    pub fn read_words(&self, addr: u32, count: usize) -> Result<Vec<u32>, MemError> {
        let bytes = self.read_bytes(addr, count * 4)?;
        Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

/// Per-class retired-instruction counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts([u64; InstrClass::COUNT]);

impl ClassCounts {
    pub fn get(&self, class: InstrClass) -> u64 {
        self.0[class as usize]
    }

    pub fn bump(&mut self, class: InstrClass) {
        self.0[class as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (InstrClass, u64)> + '_ {
        InstrClass::ALL.iter().map(|&c| (c, self.get(c)))
    }

    /// Counts accumulated since an earlier snapshot.
    pub fn since(&self, earlier: &ClassCounts) -> ClassCounts {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(earlier.0.iter()) {
            *a -= b;
        }
        out
    }

    pub fn add(&mut self, other: &ClassCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub pc: u32,
    regs: [u32; 32],
    pub csrs: CsrFile,
    pub hwloops: [HwLoopState; 2],
    pub mem: Memory,
    pub cycles: u64,
    pub instret: ClassCounts,
    /// Multiply-accumulate lane operations retired by dot-product instructions.
    pub macs: u64,
}

impl MachineState {
    pub fn new(mem: Memory) -> Self {
        MachineState {
            pc: 0,
            regs: [0; 32],
            csrs: CsrFile::default(),
            hwloops: [HwLoopState::default(); 2],
            mem,
            cycles: 0,
            instret: ClassCounts::default(),
            macs: 0,
        }
    }

    #[inline]
    pub fn reg(&self, r: u8) -> u32 {
        self.regs[r as usize]
    }

    #[inline]
    pub fn set_reg(&mut self, r: u8, value: u32) {
        if r != 0 {
            self.regs[r as usize] = value;
        }
    }

    pub fn regs(&self) -> &[u32; 32] {
        &self.regs
    }

    pub fn csr_read(&self, addr: u16) -> Result<u32, CsrError> {
        let c = &self.csrs;
        match addr {
            CSR_SIMD_FMT => Ok(c.simd_fmt.encode()),
            CSR_MPC_CNT => Ok(c.mpc.cnt),
            CSR_MPC_MACS_PER_GROUP => Ok(c.mpc.macs_per_group),
            CSR_CYCLE => Ok(self.cycles as u32),
            CSR_INSTRET => Ok(self.instret.total() as u32),
            _ => CsrFile::scratch_index(addr)
                .map(|i| c.scratch[i])
                .ok_or(CsrError::Undefined(addr)),
        }
    }

    /// Writing SIMD_FMT resets the MPC subgroup and tally. Writes to MPC_CNT are taken
    /// modulo the current group count; MPC writes also clear the tally.
    pub fn csr_write(&mut self, addr: u16, value: u32) -> Result<(), CsrError> {
        let c = &mut self.csrs;
        match addr {
            CSR_SIMD_FMT => {
                c.simd_fmt = SimdFormat::decode(value).ok_or(CsrError::IllegalFormat(value))?;
                c.mpc.reset();
            }
            CSR_MPC_CNT => {
                c.mpc.cnt = value % c.simd_fmt.group_count();
                c.mpc.mac_tally = 0;
            }
            CSR_MPC_MACS_PER_GROUP => {
                c.mpc.macs_per_group = value.max(1);
                c.mpc.mac_tally = 0;
            }
            CSR_CYCLE | CSR_INSTRET => return Err(CsrError::ReadOnly(addr)),
            _ => {
                let i = CsrFile::scratch_index(addr).ok_or(CsrError::Undefined(addr))?;
                c.scratch[i] = value;
            }
        }
        Ok(())
    }
}
