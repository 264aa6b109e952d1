//! Packed-SIMD datapath: per-lane ALU operations, the mixed-precision dot-product
//! unit (slicer/router + extension + multiplier selection) and the
//! Mixed-Precision Controller that picks operand B's active subgroup.

use serde::{Deserialize, Serialize};

use crate::format::{LaneWidth, SignMode, SimdFormat};

/// A 32-bit register viewed as lanes of one width. Lane 0 is least significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneVector {
    pub raw: u32,
    pub width: LaneWidth,
    pub signed: bool,
}

impl LaneVector {
    pub fn new(raw: u32, width: LaneWidth, signed: bool) -> Self {
        LaneVector { raw, width, signed }
    }

    pub fn lane_count(&self) -> usize {
        self.width.lanes()
    }

    /// Lane `i` extended to 32 bits according to `signed`.
    pub fn lane(&self, i: usize) -> i32 {
        extract(self.raw, self.width, i, self.signed)
    }

    pub fn lanes(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.lane_count()).map(move |i| self.lane(i))
    }

    /// Packs lane values, truncating each to the lane width.
    pub fn from_lanes(lanes: &[i32], width: LaneWidth, signed: bool) -> Self {
        assert!(lanes.len() <= width.lanes());
        let mut raw = 0u32;
        for (i, &v) in lanes.iter().enumerate() {
            raw = insert(raw, width, i, v as u32);
        }
        LaneVector { raw, width, signed }
    }
}

#[inline]
pub(crate) fn extract(raw: u32, width: LaneWidth, i: usize, signed: bool) -> i32 {
    let bits = width.bits();
    let field = (raw >> (i as u32 * bits)) & width.mask();
    if signed {
        sign_extend(field, bits)
    } else {
        field as i32
    }
}

#[inline]
pub(crate) fn insert(raw: u32, width: LaneWidth, i: usize, value: u32) -> u32 {
    let shift = i as u32 * width.bits();
    let mask = width.mask() << shift;
    (raw & !mask) | ((value << shift) & mask)
}

#[inline]
pub(crate) fn sign_extend(field: u32, bits: u32) -> i32 {
    let shift = 32 - bits;
    ((field << shift) as i32) >> shift
}

/// Replicates the low `width` bits of `value` into every lane.
pub fn replicate(value: u32, width: LaneWidth) -> u32 {
    let v = value & width.mask();
    (0..width.lanes()).fold(0u32, |acc, i| insert(acc, width, i, v))
}

/// Lane-wise ALU operations of the SIMD extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimdAluOp {
    Add,
    Sub,
    Avg,
    Avgu,
    Max,
    Maxu,
    Min,
    Minu,
    Srl,
    Sra,
    Sll,
    Abs,
}

impl SimdAluOp {
    pub const ALL: [SimdAluOp; 12] = [
        SimdAluOp::Add,
        SimdAluOp::Sub,
        SimdAluOp::Avg,
        SimdAluOp::Avgu,
        SimdAluOp::Max,
        SimdAluOp::Maxu,
        SimdAluOp::Min,
        SimdAluOp::Minu,
        SimdAluOp::Srl,
        SimdAluOp::Sra,
        SimdAluOp::Sll,
        SimdAluOp::Abs,
    ];

    pub const fn mnemonic(self) -> &'static str {
        match self {
            SimdAluOp::Add => "add",
            SimdAluOp::Sub => "sub",
            SimdAluOp::Avg => "avg",
            SimdAluOp::Avgu => "avgu",
            SimdAluOp::Max => "max",
            SimdAluOp::Maxu => "maxu",
            SimdAluOp::Min => "min",
            SimdAluOp::Minu => "minu",
            SimdAluOp::Srl => "srl",
            SimdAluOp::Sra => "sra",
            SimdAluOp::Sll => "sll",
            SimdAluOp::Abs => "abs",
        }
    }

    /// Whether `.sci` immediates are zero-extended (unsigned ops and shift amounts).
    pub const fn unsigned_imm(self) -> bool {
        matches!(
            self,
            SimdAluOp::Avgu
                | SimdAluOp::Maxu
                | SimdAluOp::Minu
                | SimdAluOp::Srl
                | SimdAluOp::Sra
                | SimdAluOp::Sll
        )
    }

    /// `pv.abs` is the only unary op and has no scalar variants.
    pub const fn is_unary(self) -> bool {
        matches!(self, SimdAluOp::Abs)
    }
}

/// Applies `op` lane by lane. `b` is the already-replicated second operand for
/// `.sc`/`.sci` forms. Arithmetic wraps at the lane width.
pub fn simd_alu(op: SimdAluOp, a: u32, b: u32, width: LaneWidth) -> u32 {
    let bits = width.bits();
    let mut out = 0u32;
    for i in 0..width.lanes() {
        let sa = extract(a, width, i, true);
        let sb = extract(b, width, i, true);
        let ua = extract(a, width, i, false);
        let ub = extract(b, width, i, false);
        let shamt = (ub as u32) & (bits - 1);
        let r: i32 = match op {
            SimdAluOp::Add => sa.wrapping_add(sb),
            SimdAluOp::Sub => sa.wrapping_sub(sb),
            // lanes are at most 16 bits, so the 32-bit sum is the exact width+1 result
            SimdAluOp::Avg => (sa + sb) >> 1,
            SimdAluOp::Avgu => ((ua as u32 + ub as u32) >> 1) as i32,
            SimdAluOp::Max => sa.max(sb),
            SimdAluOp::Maxu => ua.max(ub),
            SimdAluOp::Min => sa.min(sb),
            SimdAluOp::Minu => ua.min(ub),
            SimdAluOp::Srl => ((ua as u32) >> shamt) as i32,
            SimdAluOp::Sra => sa >> shamt,
            SimdAluOp::Sll => ((ua as u32) << shamt) as i32,
            SimdAluOp::Abs => sa.wrapping_abs(),
        };
        out = insert(out, width, i, r as u32);
    }
    out
}

/// Selects the `cnt`-th block of `lanes_a` operand-B lanes and extends each to width A.
/// Uniform formats pass `b_raw` through unchanged.
pub fn slice_and_route(b_raw: u32, fmt: SimdFormat, cnt: u32, signed_b: bool) -> LaneVector {
    let wa = fmt.width_a();
    if !fmt.is_mixed() {
        return LaneVector::new(b_raw, wa, signed_b);
    }
    let wb = fmt.width_b();
    let n = fmt.lanes_a();
    let base = cnt as usize * n;
    let mut raw = 0u32;
    for i in 0..n {
        let v = extract(b_raw, wb, base + i, signed_b);
        raw = insert(raw, wa, i, v as u32);
    }
    LaneVector::new(raw, wa, signed_b)
}

/// Sum-of-products over the A lanes of `fmt`, with 32-bit wraparound accumulation.
pub fn dotp(
    a: u32,
    b: u32,
    acc: u32,
    fmt: SimdFormat,
    cnt: u32,
    sign: SignMode,
    accumulate: bool,
) -> u32 {
    let va = LaneVector::new(a, fmt.width_a(), sign.a_signed());
    let vb = slice_and_route(b, fmt, cnt, sign.b_signed());
    let start = if accumulate { acc } else { 0 };
    va.lanes()
        .zip(vb.lanes())
        .fold(start, |s, (x, y)| s.wrapping_add(x.wrapping_mul(y) as u32))
}

/// Mixed-Precision Controller: the subgroup counter plus the programmable
/// MACs-per-subgroup counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcState {
    pub cnt: u32,
    pub macs_per_group: u32,
    pub mac_tally: u32,
}

impl Default for MpcState {
    fn default() -> Self {
        MpcState { cnt: 0, macs_per_group: 1, mac_tally: 0 }
    }
}

impl MpcState {
    /// Called once per decode slot. The MAC at the tally boundary has already
    /// consumed the old `cnt`.
    pub fn on_mac(&mut self, fmt: SimdFormat, decode_fired: bool, is_mac: bool) {
        if !(decode_fired && is_mac && fmt.is_mixed()) {
            return;
        }
        self.mac_tally += 1;
        if self.mac_tally >= self.macs_per_group {
            self.mac_tally = 0;
            self.cnt = (self.cnt + 1) % fmt.group_count();
        }
    }

    /// Resets subgroup and tally, as on a SIMD_FMT write.
    pub fn reset(&mut self) {
        self.cnt = 0;
        self.mac_tally = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::LaneWidth::*;

    fn fmt(a: u32, b: u32) -> SimdFormat {
        SimdFormat::from_bits(a, b).unwrap()
    }

    #[test]
    fn add_wraps_at_four_bits() {
        let a = LaneVector::from_lanes(&[7; 8], W4, true).raw;
        let b = LaneVector::from_lanes(&[1; 8], W4, true).raw;
        let r = LaneVector::new(simd_alu(SimdAluOp::Add, a, b, W4), W4, true);
        assert_eq!(r.lane(0), -8);
    }

    #[test]
    fn avg_eight_bit() {
        let a = LaneVector::from_lanes(&[3, -3, 127, -128], W8, true).raw;
        let b = LaneVector::from_lanes(&[5, 0, 127, -128], W8, true).raw;
        let r = LaneVector::new(simd_alu(SimdAluOp::Avg, a, b, W8), W8, true);
        // rounds toward -inf and does not overflow the lane
        assert_eq!(r.lanes().collect::<Vec<_>>(), vec![4, -2, 127, -128]);
        let r = LaneVector::new(simd_alu(SimdAluOp::Avgu, 0xFFFF_FFFF, 0xFFFF_FFFF, W8), W8, false);
        assert_eq!(r.lane(0), 255);
    }

    #[test]
    fn max_two_bit() {
        let mut av = vec![-2, 1, 0, -1];
        av.resize(16, 0);
        let mut bv = vec![1, -1, 0, 0];
        bv.resize(16, 0);
        let a = LaneVector::from_lanes(&av, W2, true).raw;
        let b = LaneVector::from_lanes(&bv, W2, true).raw;
        let r = LaneVector::new(simd_alu(SimdAluOp::Max, a, b, W2), W2, true);
        assert_eq!(&r.lanes().collect::<Vec<_>>()[..4], &[1, 1, 0, 0]);
    }

    #[test]
    fn max_two_bit_exhaustive_against_scalar() {
        for x in -2..2 {
            for y in -2..2 {
                let a = replicate(x as u32, W2);
                let b = replicate(y as u32, W2);
                let r = LaneVector::new(simd_alu(SimdAluOp::Max, a, b, W2), W2, true);
                assert!(r.lanes().all(|v| v == x.max(y)));
                let r = LaneVector::new(simd_alu(SimdAluOp::Minu, a, b, W2), W2, false);
                assert!(r.lanes().all(|v| v == (x & 3).min(y & 3)));
            }
        }
    }

    #[test]
    fn shifts_mask_amount_and_abs_wraps() {
        let a = LaneVector::from_lanes(&[-8, 4, 1, 7], W8, true).raw;
        // shift by 9 at 8 bits acts as shift by 1
        let r = LaneVector::new(simd_alu(SimdAluOp::Sra, a, replicate(9, W8), W8), W8, true);
        assert_eq!(r.lanes().collect::<Vec<_>>(), vec![-4, 2, 0, 3]);
        let r = LaneVector::new(simd_alu(SimdAluOp::Srl, a, replicate(1, W8), W8), W8, false);
        assert_eq!(r.lane(0), 0xF8 >> 1);
        let r = LaneVector::new(simd_alu(SimdAluOp::Sll, a, replicate(4, W8), W8), W8, true);
        assert_eq!(r.lanes().collect::<Vec<_>>(), vec![-128, 64, 16, 112]);
        let a = LaneVector::from_lanes(&[-8, -1, 3, 0, 0, 0, 0, 0], W4, true).raw;
        let r = LaneVector::new(simd_alu(SimdAluOp::Abs, a, 0, W4), W4, true);
        assert_eq!(&r.lanes().collect::<Vec<_>>()[..3], &[-8, 1, 3]);
    }

    #[test]
    fn slicer_selects_blocks_least_significant_first() {
        let b = LaneVector::from_lanes(&[1, 2, 3, 4, 5, 6, 7, -8], W4, true).raw;
        let s0 = slice_and_route(b, fmt(8, 4), 0, true);
        let s1 = slice_and_route(b, fmt(8, 4), 1, true);
        assert_eq!(s0.width, W8);
        assert_eq!(s0.lanes().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(s1.lanes().collect::<Vec<_>>(), vec![5, 6, 7, -8]);
        assert_eq!(slice_and_route(0xDEAD_BEEF, fmt(8, 8), 0, true).raw, 0xDEAD_BEEF);
    }

    #[test]
    fn dotp_examples() {
        let a = LaneVector::from_lanes(&[1, -2, 3, -4], W8, true).raw;
        let b = LaneVector::from_lanes(&[5, 6, 7, 8], W8, true).raw;
        assert_eq!(dotp(a, b, 10, fmt(8, 8), 0, SignMode::Ss, true) as i32, -8);

        let a = LaneVector::from_lanes(&[10, -3, 7, 2], W8, true).raw;
        let b = LaneVector::from_lanes(&[1, 2, 3, 4, 5, 6, 7, -8], W4, true).raw;
        assert_eq!(dotp(a, b, 0, fmt(8, 4), 0, SignMode::Ss, true) as i32, 33);
        assert_eq!(dotp(a, b, 0, fmt(8, 4), 1, SignMode::Ss, true) as i32, 65);

        for f in SimdFormat::ALL {
            assert_eq!(dotp(0, 0xFFFF_FFFF, 1234, f, 0, SignMode::Ss, true), 1234);
            assert_eq!(dotp(0, 0xFFFF_FFFF, 1234, f, 0, SignMode::Uu, false), 0);
        }
    }

    #[test]
    fn dotusp_treats_a_unsigned_b_signed() {
        let a = LaneVector::from_lanes(&[-1, 0, 0, 0], W8, true).raw; // 255 unsigned
        let b = LaneVector::from_lanes(&[-1, 0, 0, 0], W8, true).raw;
        assert_eq!(dotp(a, b, 0, fmt(8, 8), 0, SignMode::Us, false) as i32, -255);
        assert_eq!(dotp(a, b, 0, fmt(8, 8), 0, SignMode::Uu, false) as i32, 255 * 255);
        assert_eq!(dotp(a, b, 0, fmt(8, 8), 0, SignMode::Ss, false) as i32, 1);
    }

    fn cnt_sequence(f: SimdFormat, per_group: u32, macs: usize) -> Vec<u32> {
        let mut mpc = MpcState { macs_per_group: per_group, ..MpcState::default() };
        (0..macs)
            .map(|_| {
                let used = mpc.cnt;
                mpc.on_mac(f, true, true);
                used
            })
            .collect()
    }

    #[test]
    fn mpc_counts_up_to_group_count() {
        assert_eq!(cnt_sequence(fmt(8, 4), 1, 4), vec![0, 1, 0, 1]);
        assert_eq!(cnt_sequence(fmt(8, 2), 1, 8), vec![0, 1, 2, 3, 0, 1, 2, 3]);
        let seq = cnt_sequence(fmt(4, 2), 8, 9);
        assert!(seq[..8].iter().all(|&c| c == 0));
        assert_eq!(seq[8], 1);
    }

    #[test]
    fn mpc_ignores_stalls_non_macs_and_uniform() {
        let mut mpc = MpcState::default();
        mpc.on_mac(fmt(8, 4), false, true);
        mpc.on_mac(fmt(8, 4), true, false);
        mpc.on_mac(fmt(8, 8), true, true);
        assert_eq!(mpc, MpcState::default());
    }
}
