use kls_core::path::{audit_exhaustive, build_swap_path, path_is_valid};
use kls_core::Configuration;
use proptest::prelude::*;

#[test]
fn every_small_window_replays() {
    for l in 1..=6usize {
        for l0 in 2..=8 - l {
            let r = audit_exhaustive(l, l0);
            assert!(r.passed(), "l={l} l0={l0}: {r:?}");
            assert!(r.windows > 0);
        }
    }
}

#[test]
fn paths_on_a_large_torus_stay_local() {
    // the window sits in the middle of a much larger ring, far from the seam
    let mut cfg = Configuration::empty(200);
    for s in [101, 103, 107, 108, 112, 113, 115] {
        cfg.set(s, 1);
    }
    let x = 100;
    for y in 1..=8 {
        for z in y + 1..=8 {
            let path = build_swap_path(&cfg, x, y, z, 8, 8).unwrap();
            assert!(path_is_valid(&cfg, x, y, z, 8, 8, &path));
            assert!(path.bonds().iter().all(|&b| b > x && b < x + 16));
        }
    }
}

proptest! {
    #[test]
    fn swap_bond_changes_energy_by_local_term(bits in prop::collection::vec(0u8..2, 4..80), x in 1i64..80) {
        let c = Configuration::from_bits(&bits);
        let d = c.swap_bond(x);
        prop_assert_eq!(d.swap_bond(x), c.clone());
        prop_assert_eq!(d.particle_count(), c.particle_count());
        let dh = (c.get(x) as i64 - c.get(x + 1) as i64) * (c.get(x + 2) as i64 - c.get(x - 1) as i64);
        prop_assert_eq!(d.hamiltonian() as i64 - c.hamiltonian() as i64, dh);
    }
}
