//! Lane widths and the CSR-held SIMD precision pair.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Width of one SIMD lane inside a 32-bit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LaneWidth {
    W16,
    W8,
    W4,
    W2,
}

impl LaneWidth {
    pub const ALL: [LaneWidth; 4] = [LaneWidth::W16, LaneWidth::W8, LaneWidth::W4, LaneWidth::W2];

    pub const fn bits(self) -> u32 {
        match self {
            LaneWidth::W16 => 16,
            LaneWidth::W8 => 8,
            LaneWidth::W4 => 4,
            LaneWidth::W2 => 2,
        }
    }

    /// Number of lanes of this width in a 32-bit word.
    pub const fn lanes(self) -> usize {
        (32 / self.bits()) as usize
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            16 => Some(LaneWidth::W16),
            8 => Some(LaneWidth::W8),
            4 => Some(LaneWidth::W4),
            2 => Some(LaneWidth::W2),
            _ => None,
        }
    }

    /// Two-bit field code used inside the SIMD_FMT CSR: 0=16, 1=8, 2=4, 3=2.
    pub const fn code(self) -> u32 {
        match self {
            LaneWidth::W16 => 0,
            LaneWidth::W8 => 1,
            LaneWidth::W4 => 2,
            LaneWidth::W2 => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(LaneWidth::W16),
            1 => Some(LaneWidth::W8),
            2 => Some(LaneWidth::W4),
            3 => Some(LaneWidth::W2),
            _ => None,
        }
    }

    pub const fn mask(self) -> u32 {
        (1u32 << self.bits()) - 1
    }
}

impl fmt::Display for LaneWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

/// Operand precision pair for SIMD instructions: operand A is never narrower than operand B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SimdFormat {
    a: LaneWidth,
    b: LaneWidth,
}

impl SimdFormat {
    /// The 10 legal formats: 4 uniform followed by 6 mixed.
    pub const ALL: [SimdFormat; 10] = [
        SimdFormat::uniform(LaneWidth::W16),
        SimdFormat::uniform(LaneWidth::W8),
        SimdFormat::uniform(LaneWidth::W4),
        SimdFormat::uniform(LaneWidth::W2),
        SimdFormat { a: LaneWidth::W16, b: LaneWidth::W8 },
        SimdFormat { a: LaneWidth::W16, b: LaneWidth::W4 },
        SimdFormat { a: LaneWidth::W16, b: LaneWidth::W2 },
        SimdFormat { a: LaneWidth::W8, b: LaneWidth::W4 },
        SimdFormat { a: LaneWidth::W8, b: LaneWidth::W2 },
        SimdFormat { a: LaneWidth::W4, b: LaneWidth::W2 },
    ];

    pub const RESET: SimdFormat = SimdFormat::uniform(LaneWidth::W8);

    pub fn new(a: LaneWidth, b: LaneWidth) -> Option<Self> {
        (b.bits() <= a.bits()).then_some(SimdFormat { a, b })
    }

    pub const fn uniform(w: LaneWidth) -> Self {
        SimdFormat { a: w, b: w }
    }

    pub fn from_bits(a_bits: u32, b_bits: u32) -> Option<Self> {
        SimdFormat::new(LaneWidth::from_bits(a_bits)?, LaneWidth::from_bits(b_bits)?)
    }

    pub const fn width_a(self) -> LaneWidth {
        self.a
    }

    pub const fn width_b(self) -> LaneWidth {
        self.b
    }

    /// How many width_b subgroups operand B's register holds relative to A's lane count.
    pub const fn group_count(self) -> u32 {
        self.a.bits() / self.b.bits()
    }

    pub const fn lanes_a(self) -> usize {
        self.a.lanes()
    }

    pub const fn is_mixed(self) -> bool {
        self.a.bits() != self.b.bits()
    }

    /// CSR encoding: bits[3:2] = width_a code, bits[1:0] = width_b code.
    pub const fn encode(self) -> u32 {
        (self.a.code() << 2) | self.b.code()
    }

    pub fn decode(value: u32) -> Option<Self> {
        if value > 0xF {
            return None;
        }
        let a = LaneWidth::from_code((value >> 2) & 3)?;
        let b = LaneWidth::from_code(value & 3)?;
        SimdFormat::new(a, b)
    }
}

impl fmt::Display for SimdFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.a.bits(), self.b.bits())
    }
}

impl std::str::FromStr for SimdFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(['x', 'X', '×'])
            .ok_or_else(|| format!("expected <a>x<b>, got {s:?}"))?;
        let a: u32 = a.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
        let b: u32 = b.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
        SimdFormat::from_bits(a, b).ok_or_else(|| format!("{s:?} is not a legal SIMD format"))
    }
}

impl TryFrom<String> for SimdFormat {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SimdFormat> for String {
    fn from(f: SimdFormat) -> String {
        f.to_string()
    }
}

/// Operand signedness of a dot product: `Us` means operand A unsigned, operand B signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignMode {
    Uu,
    Us,
    Ss,
}

impl SignMode {
    pub const fn a_signed(self) -> bool {
        matches!(self, SignMode::Ss)
    }

    pub const fn b_signed(self) -> bool {
        matches!(self, SignMode::Us | SignMode::Ss)
    }

    /// The dot-product variant for the given operand signedness, if one exists.
    pub fn for_operands(a_signed: bool, b_signed: bool) -> Option<Self> {
        match (a_signed, b_signed) {
            (false, false) => Some(SignMode::Uu),
            (false, true) => Some(SignMode::Us),
            (true, true) => Some(SignMode::Ss),
            (true, false) => None,
        }
    }

    pub const fn suffix(self) -> &'static str {
        match self {
            SignMode::Uu => "up",
            SignMode::Us => "usp",
            SignMode::Ss => "sp",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_ten_formats_four_uniform() {
        let mut all = Vec::new();
        for a in LaneWidth::ALL {
            for b in LaneWidth::ALL {
                if let Some(f) = SimdFormat::new(a, b) {
                    all.push(f);
                }
            }
        }
        assert_eq!(all.len(), 10);
        assert_eq!(all.iter().filter(|f| !f.is_mixed()).count(), 4);
        for f in SimdFormat::ALL {
            assert!(all.contains(&f));
        }
    }

    #[test]
    fn group_count_times_width_b_is_width_a() {
        for f in SimdFormat::ALL {
            assert_eq!(f.group_count() * f.width_b().bits(), f.width_a().bits());
            assert!([1, 2, 4, 8].contains(&f.group_count()));
        }
    }

    #[test]
    fn encoding_round_trips_and_rejects_inverted_pairs() {
        for f in SimdFormat::ALL {
            assert_eq!(SimdFormat::decode(f.encode()), Some(f));
        }
        let legal: Vec<u32> = SimdFormat::ALL.iter().map(|f| f.encode()).collect();
        for v in 0..64u32 {
            if !legal.contains(&v) {
                assert_eq!(SimdFormat::decode(v), None, "value {v:#x}");
            }
        }
        // 2x4: width_b > width_a
        assert_eq!(SimdFormat::decode((3 << 2) | 2), None);
        assert_eq!(SimdFormat::RESET.encode(), 0b0101);
    }

    #[test]
    fn parse_display() {
        let f: SimdFormat = "8x4".parse().unwrap();
        assert_eq!(f.to_string(), "8x4");
        assert!("2x4".parse::<SimdFormat>().is_err());
    }
}
