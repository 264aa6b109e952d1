//! Subgroup sequences produced by the mixed-precision controller.

mod common;

use common::*;

#[test]
fn eight_by_four_alternates() {
    assert_eq!(mpc_trace(fmt(8, 4), 1, 8), [0, 1, 0, 1, 0, 1, 0, 1]);
}

#[test]
fn eight_by_two_counts_to_four() {
    assert_eq!(mpc_trace(fmt(8, 2), 1, 9), [0, 1, 2, 3, 0, 1, 2, 3, 0]);
}

#[test]
fn eight_macs_per_subgroup() {
    let t = mpc_trace(fmt(4, 2), 8, 17);
    let first_change = t.iter().position(|&c| c != 0).map(|i| i + 1);
    assert_eq!(first_change, Some(9));
    assert_eq!(t[8..16], [1; 8]);
    assert_eq!(t[16], 0);
}

#[test]
fn uniform_formats_never_advance() {
    for f in mpic::format::SimdFormat::ALL.into_iter().filter(|f| !f.is_mixed()) {
        assert!(mpc_trace(f, 1, 6).iter().all(|&c| c == 0), "{f}");
    }
}

#[test]
fn sixteen_by_two_uses_eight_subgroups() {
    let t = mpc_trace(fmt(16, 2), 2, 18);
    let want: Vec<u32> = (0..18).map(|i| (i / 2) % 8).collect();
    assert_eq!(t, want);
}
