//! Oracles and finite-difference helpers shared by the test targets.
#![allow(dead_code)]

use langsup_core::numkit::{
    affine_backward, affine_forward, l2_normalize, l2_normalize_backward, DenseMatrix, ParamTensor,
};
use langsup_core::objective::{info_nce, ContrastiveMode, EncoderConfig, EncoderStack};
use langsup_core::rng::stream;
use rand::Rng;

pub fn unit_rows(rows: usize, dim: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, dim);
    for r in 0..rows {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.row_mut(r).copy_from_slice(&l2_normalize(&v).unwrap().0);
    }
    m
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−log softmax` of the positive, enumerating candidates one by one.
pub fn nll(anchor: &[f64], positive: &[f64], candidates: &[&[f64]], tau: f64) -> f64 {
    let num = (cos(anchor, positive) / tau).exp();
    let den: f64 = candidates.iter().map(|c| (cos(anchor, c) / tau).exp()).sum();
    -(num / den).ln()
}

pub fn simclr_oracle(z: &DenseMatrix, tau: f64) -> f64 {
    let m = z.rows();
    let n = m / 2;
    let mut total = 0.0;
    for a in 0..m {
        let pos = (a + n) % m;
        let cands: Vec<&[f64]> = (0..m).filter(|&b| b != a).map(|b| z.row(b)).collect();
        total += nll(z.row(a), z.row(pos), &cands, tau);
    }
    total / m as f64
}

pub fn clip_oracle(img: &DenseMatrix, txt: &DenseMatrix, tau: f64, symmetric: bool) -> f64 {
    let n = img.rows();
    let i2t: f64 = (0..n)
        .map(|i| {
            let cands: Vec<&[f64]> = (0..n).map(|j| txt.row(j)).collect();
            nll(img.row(i), txt.row(i), &cands, tau)
        })
        .sum::<f64>()
        / n as f64;
    if !symmetric {
        return i2t;
    }
    let t2i: f64 = (0..n)
        .map(|j| {
            let cands: Vec<&[f64]> = (0..n).map(|i| img.row(i)).collect();
            nll(txt.row(j), img.row(j), &cands, tau)
        })
        .sum::<f64>()
        / n as f64;
    0.5 * (i2t + t2i)
}

pub fn tiny_arch(learnable: bool) -> EncoderConfig {
    EncoderConfig {
        image_input_dim: 5,
        text_input_dim: 7,
        hidden: vec![6],
        feature_dim: 4,
        text_hidden: vec![5],
        text_feature_dim: 4,
        embed_dim: 8,
        learnable_temperature: learnable,
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Central differences over every scalar parameter of the stack.
pub fn check_stack(stack: &EncoderStack, loss: impl Fn(&mut EncoderStack) -> f64) -> f64 {
    let mut analytic = stack.clone();
    analytic.zero_grad();
    loss(&mut analytic);
    let grads: Vec<Vec<f64>> = analytic.params().iter().map(|p| p.grad.data().to_vec()).collect();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (k, g) in grads.iter().enumerate() {
        for (j, &analytic) in g.iter().enumerate() {
            let mut plus = stack.clone();
            plus.params_mut()[k].value.data_mut()[j] += h;
            let mut minus = stack.clone();
            minus.params_mut()[k].value.data_mut()[j] -= h;
            let numeric = (loss(&mut plus) - loss(&mut minus)) / (2.0 * h);
            worst = worst.max(rel_err(analytic, numeric));
        }
    }
    worst
}

/// Worst relative error of the normalization, InfoNCE and affine gradients
/// against central differences.
pub fn primitive_worst_error() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = stream(3, "fd", 2);
    let h = 1e-6;
    let a = l2_normalize(&[0.2, -0.7, 0.4]).unwrap().0;
    let p = l2_normalize(&[0.5, 0.1, -0.3]).unwrap().0;
    let n1 = l2_normalize(&[-0.1, 0.9, 0.2]).unwrap().0;
    let n2 = l2_normalize(&[0.3, 0.3, 0.3]).unwrap().0;
    let f = |a: &[f64], p: &[f64], n1: &[f64]| info_nce(a, p, &[n1, &n2], 0.25).unwrap().loss;
    let g = info_nce(&a, &p, &[&n1, &n2], 0.25).unwrap();
    for (which, grad) in [(0, &g.grad_anchor), (1, &g.grad_positive), (2, &g.grad_negatives[0])] {
        for d in 0..3 {
            let bump = |s: f64| {
                let mut v = [a.clone(), p.clone(), n1.clone()];
                v[which][d] += s;
                f(&v[0], &v[1], &v[2])
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            worst = worst.max(rel_err(grad[d], numeric));
        }
    }

    let v = vec![0.3, -1.2, 0.8, 0.1];
    let (u, nv) = l2_normalize(&v).unwrap();
    let w = [0.4, 0.1, -0.9, 0.6];
    let back = l2_normalize_backward(&u, nv, &w);
    for d in 0..4 {
        let bump = |s: f64| {
            let mut x = v.clone();
            x[d] += s;
            cos(&l2_normalize(&x).unwrap().0, &w)
        };
        worst = worst.max(rel_err(back[d], (bump(h) - bump(-h)) / (2.0 * h)));
    }

    let x = random_matrix(3, 4, &mut rng);
    let mut wt = ParamTensor::new(random_matrix(4, 2, &mut rng));
    let mut b = ParamTensor::new(random_matrix(1, 2, &mut rng));
    let up = random_matrix(3, 2, &mut rng);
    let obj = |x: &DenseMatrix, wt: &ParamTensor, b: &ParamTensor| -> f64 {
        let out = affine_forward(x, wt, b).unwrap();
        out.data().iter().zip(up.data()).map(|(o, u)| o * u).sum()
    };
    let gx = affine_backward(&x, &mut wt, &mut b, &up).unwrap();
    for j in 0..x.data().len() {
        let bump = |s: f64| {
            let mut xx = x.clone();
            xx.data_mut()[j] += s;
            obj(&xx, &wt, &b)
        };
        worst = worst.max(rel_err(gx.data()[j], (bump(h) - bump(-h)) / (2.0 * h)));
    }
    for j in 0..8 {
        let bump = |s: f64| {
            let mut ww = wt.clone();
            ww.value.data_mut()[j] += s;
            obj(&x, &ww, &b)
        };
        worst = worst.max(rel_err(wt.grad.data()[j], (bump(h) - bump(-h)) / (2.0 * h)));
    }
    for j in 0..2 {
        let bump = |s: f64| {
            let mut bb = b.clone();
            bb.value.data_mut()[j] += s;
            obj(&x, &wt, &bb)
        };
        worst = worst.max(rel_err(b.grad.data()[j], (bump(h) - bump(-h)) / (2.0 * h)));
    }
    worst
}

/// A tiny stack with every parameter, biases included, moved off its
/// initial value so no row collapses to zero.
pub fn jittered_stack(mode: ContrastiveMode, learnable: bool, seed: u64) -> EncoderStack {
    let mut s = EncoderStack::new(mode, &tiny_arch(learnable), 0.3, seed).unwrap();
    let mut rng = stream(seed, "jitter", 0);
    for p in s.params_mut() {
        for v in p.value.data_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    s
}
