//! Batch losses against a brute-force oracle, closed-form identities and
//! finite differences through the full encoder stacks.

use langsup_core::numkit::{l2_normalize, l2_normalize_backward, DenseMatrix};
use langsup_core::objective::{
    clip_from_inputs, clip_loss, info_nce, simclr_from_views, simclr_loss, ContrastiveMode, EncoderStack,
};
use langsup_core::rng::stream;
use proptest::prelude::*;
mod common;
use common::*;

#[test]
fn losses_match_enumeration_oracle() {
    let mut rng = stream(11, "oracle", 0);
    for n in 2..=8 {
        for &tau in &[0.07, 0.2, 1.0] {
            let z = unit_rows(2 * n, 6, &mut rng);
            let got = simclr_loss(&z, tau).unwrap().loss;
            assert!((got - simclr_oracle(&z, tau)).abs() < 1e-10, "simclr n={n} tau={tau}");

            let img = unit_rows(n, 6, &mut rng);
            let txt = unit_rows(n, 6, &mut rng);
            for sym in [true, false] {
                let got = clip_loss(&img, &txt, tau, sym).unwrap().loss;
                assert!((got - clip_oracle(&img, &txt, tau, sym)).abs() < 1e-10, "clip n={n} tau={tau}");
            }
        }
    }
}

#[test]
fn collapsed_batches_give_log_candidate_counts() {
    let e = l2_normalize(&[0.3, -0.4, 0.5, 0.1]).unwrap().0;
    for n in [2usize, 4, 8] {
        let z = DenseMatrix::from_rows(&vec![e.clone(); 2 * n]).unwrap();
        let s = simclr_loss(&z, 0.1).unwrap().loss;
        assert!((s - ((2 * n - 1) as f64).ln()).abs() < 1e-10);
        let one = DenseMatrix::from_rows(&vec![e.clone(); n]).unwrap();
        let c = clip_loss(&one, &one, 0.1, true).unwrap().loss;
        assert!((c - (n as f64).ln()).abs() < 1e-10);
        assert_eq!(ContrastiveMode::Simclr.negatives_per_anchor(n), 2 * n - 2);
        assert_eq!(ContrastiveMode::Clip.negatives_per_anchor(n), n - 1);
    }
}

#[test]
fn simclr_stack_gradients() {
    let mut rng = stream(3, "fd", 0);
    for learnable in [false, true] {
        let stack = EncoderStack::new(ContrastiveMode::Simclr, &tiny_arch(learnable), 0.3, 5).unwrap();
        let views = random_matrix(8, 5, &mut rng);
        let worst = check_stack(&stack, |s| simclr_from_views(&views, s).unwrap().loss);
        assert!(worst < 1e-5, "simclr relative error {worst}");
    }
}

#[test]
fn clip_stack_gradients() {
    let mut rng = stream(3, "fd", 1);
    for (learnable, symmetric) in [(false, true), (true, true), (false, false)] {
        let stack = EncoderStack::new(ContrastiveMode::Clip, &tiny_arch(learnable), 0.3, 6).unwrap();
        let images = random_matrix(5, 5, &mut rng);
        let texts = random_matrix(5, 7, &mut rng);
        let worst = check_stack(&stack, |s| clip_from_inputs(&images, &texts, symmetric, s).unwrap().loss);
        assert!(worst < 1e-5, "clip relative error {worst}");
    }
}

#[test]
fn primitive_gradients() {
    let worst = primitive_worst_error();
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn tau_gradient() {
    let mut rng = stream(4, "tau", 0);
    let z = unit_rows(8, 5, &mut rng);
    let img = unit_rows(4, 5, &mut rng);
    let txt = unit_rows(4, 5, &mut rng);
    let h = 1e-7;
    let tau = 0.3;
    let s = simclr_loss(&z, tau).unwrap().grad_tau;
    let ns = (simclr_loss(&z, tau + h).unwrap().loss - simclr_loss(&z, tau - h).unwrap().loss) / (2.0 * h);
    assert!(rel_err(s, ns) < 1e-5);
    let c = clip_loss(&img, &txt, tau, true).unwrap().grad_tau;
    let nc = (clip_loss(&img, &txt, tau + h, true).unwrap().loss - clip_loss(&img, &txt, tau - h, true).unwrap().loss)
        / (2.0 * h);
    assert!(rel_err(c, nc) < 1e-5);
}

#[test]
fn positive_similarity_lowers_loss() {
    let neg = l2_normalize(&[0.0, 1.0, 0.0]).unwrap().0;
    let anchor = [1.0, 0.0, 0.0];
    let mut last = f64::INFINITY;
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let pos = l2_normalize(&[t, 0.0, 1.0 - t + 1e-3]).unwrap().0;
        let l = info_nce(&anchor, &pos, &[&neg], 0.5).unwrap().loss;
        assert!(l < last);
        last = l;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_are_bounded_and_permutation_invariant(seed in any::<u64>(), n in 2usize..7, tau in 0.05f64..2.0) {
        let mut rng = stream(seed, "prop", 0);
        let img = unit_rows(n, 4, &mut rng);
        let txt = unit_rows(n, 4, &mut rng);
        let c = clip_loss(&img, &txt, tau, true).unwrap().loss;
        prop_assert!(c >= 0.0 && c <= (n as f64).ln() + 2.0 / tau + 1e-12);

        let perm: Vec<usize> = (0..n).rev().collect();
        let cp = clip_loss(&img.select_rows(&perm), &txt.select_rows(&perm), tau, true).unwrap().loss;
        prop_assert!((c - cp).abs() < 1e-12);

        let z = unit_rows(2 * n, 4, &mut rng);
        let s = simclr_loss(&z, tau).unwrap().loss;
        prop_assert!(s >= 0.0 && s <= ((2 * n - 1) as f64).ln() + 2.0 / tau + 1e-12);
        // swapping the two view halves keeps every sibling pair
        let swap: Vec<usize> = (n..2 * n).chain(0..n).collect();
        let sp = simclr_loss(&z.select_rows(&swap), tau).unwrap().loss;
        prop_assert!((s - sp).abs() < 1e-12);

        let mut flipped = z.clone();
        flipped.data_mut().iter_mut().for_each(|v| *v = -*v);
        prop_assert!((simclr_loss(&flipped, tau).unwrap().loss - s).abs() < 1e-12);
    }

    #[test]
    fn gradients_are_tangent(seed in any::<u64>(), n in 2usize..6) {
        // unit-sphere inputs: the gradient after normalization is orthogonal to each row
        let mut rng = stream(seed, "prop", 1);
        let z = unit_rows(2 * n, 5, &mut rng);
        let g = simclr_loss(&z, 0.2).unwrap();
        for r in 0..2 * n {
            let back = l2_normalize_backward(z.row(r), 1.0, g.grad[0].row(r));
            prop_assert!(cos(&back, z.row(r)).abs() < 1e-12);
        }
    }
}
