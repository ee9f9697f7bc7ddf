use abd_bench::{cube_stack, sphere_pair};
use abd_core::contact::broad_phase::broad_phase;
use abd_core::contact::min_distance;

#[test]
fn fixtures_are_in_contact_without_overlap() {
    for ((bodies, qs), d_hat) in [(cube_stack(20, 1e-2), 1e-2), (sphere_pair(3, 5e-4), 1e-3)] {
        let (cands, _) = broad_phase(&bodies, &qs, &qs, d_hat);
        assert!(!cands.pairs.is_empty());
        let d = min_distance(&bodies, &qs, &cands.pairs).unwrap();
        assert!(d > 0.0 && d < d_hat, "{d}");
    }
}
