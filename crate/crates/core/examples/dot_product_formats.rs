//! Evaluates one packed dot product per SIMD format and checks each against
//! a plain lane-by-lane sum. Mixed formats need one call per subgroup of the
//! narrow operand, selected by the controller count.

use mpic::format::{SignMode, SimdFormat};
use mpic::simd::{dotp, LaneVector};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn main() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    println!("{:<6} {:>11} {:>11} {:>8} {:>8}", "format", "a", "b", "dotp", "lanes");
    for fmt in SimdFormat::ALL {
        let (wa, wb) = (fmt.width_a(), fmt.width_b());
        let a_lanes: Vec<i32> = (0..wa.lanes()).map(|_| rng.gen_range(-(1 << (wa.bits() - 1))..1 << (wa.bits() - 1))).collect();
        let b_lanes: Vec<i32> = (0..wb.lanes()).map(|_| rng.gen_range(-(1 << (wb.bits() - 1))..1 << (wb.bits() - 1))).collect();
        let a = LaneVector::from_lanes(&a_lanes, wa, true).raw;
        let b = LaneVector::from_lanes(&b_lanes, wb, true).raw;

        let mut acc = 0u32;
        for cnt in 0..fmt.group_count() {
            acc = dotp(a, b, acc, fmt, cnt, SignMode::Ss, true);
        }
        // every B lane meets the A lane at the same position within its subgroup
        let expect: i64 = b_lanes
            .iter()
            .enumerate()
            .map(|(j, &y)| a_lanes[j % wa.lanes()] as i64 * y as i64)
            .sum();
        assert_eq!(acc as i32 as i64, expect);
        println!("{:<6} {a:#010x}  {b:#010x} {:>8} {:>8}", fmt.to_string(), acc as i32, wb.lanes());
    }
}
