mod common;

use common::gradcheck::{check, tiny_arch, TOLERANCE};
use genrenet::nn::Head;

#[test]
fn analytic_gradients_match_finite_differences() {
    for head in [Head::Sequence, Head::Frame] {
        for seed in 0..20 {
            let r = check(seed, tiny_arch(head, true), 7, 2);
            assert!(
                r.max_rel_err < TOLERANCE,
                "{head:?} seed {seed}: {} ({} entries checked)",
                r.worst,
                r.entries
            );
        }
    }
}

#[test]
fn unidirectional_gradients_match_finite_differences() {
    for head in [Head::Sequence, Head::Frame] {
        for seed in 100..105 {
            let r = check(seed, tiny_arch(head, false), 7, 2);
            assert!(r.max_rel_err < TOLERANCE, "{head:?} seed {seed}: {}", r.worst);
        }
    }
}

#[test]
fn larger_batches_and_single_frames() {
    for (t_len, batch) in [(1, 3), (4, 5)] {
        let r = check(7, tiny_arch(Head::Sequence, true), t_len, batch);
        assert!(r.max_rel_err < TOLERANCE, "T={t_len} B={batch}: {}", r.worst);
    }
}
