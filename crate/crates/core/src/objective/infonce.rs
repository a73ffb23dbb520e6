use crate::error::{Error, Result};
use crate::numkit::{dot, DenseMatrix};

/// Single-anchor InfoNCE value and its exact gradients.
#[derive(Clone, Debug)]
pub struct InfoNce {
    pub loss: f64,
    pub grad_anchor: Vec<f64>,
    pub grad_positive: Vec<f64>,
    pub grad_negatives: Vec<Vec<f64>>,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Parameter(format!("temperature must be > 0, got {tau}")));
    }
    Ok(())
}

/// Numerically stable log-sum-exp.
pub(crate) fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `−log( exp(a·p/τ) / Σ_{c ∈ negatives ∪ {p}} exp(a·c/τ) )` for unit vectors.
pub fn info_nce(anchor: &[f64], positive: &[f64], negatives: &[&[f64]], tau: f64) -> Result<InfoNce> {
    check_tau(tau)?;
    if negatives.is_empty() {
        return Err(Error::Parameter("info_nce needs at least one negative".into()));
    }
    let d = anchor.len();
    if positive.len() != d || negatives.iter().any(|n| n.len() != d) {
        return Err(Error::Dimension { op: "info_nce", left: (1, d), right: (1, positive.len()) });
    }
    // candidate 0 is the positive
    let candidates: Vec<&[f64]> = std::iter::once(positive).chain(negatives.iter().copied()).collect();
    let logits: Vec<f64> = candidates.iter().map(|c| dot(anchor, c) / tau).collect();
    let lse = logsumexp(logits.iter().copied());
    let loss = lse - logits[0];
    let probs: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();

    let mut grad_anchor = vec![0.0; d];
    let mut grads_c: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    for (k, c) in candidates.iter().enumerate() {
        let coef = (probs[k] - if k == 0 { 1.0 } else { 0.0 }) / tau;
        for (g, x) in grad_anchor.iter_mut().zip(c.iter()) {
            *g += coef * x;
        }
        grads_c.push(anchor.iter().map(|a| coef * a).collect());
    }
    let grad_positive = grads_c.remove(0);
    Ok(InfoNce { loss, grad_anchor, grad_positive, grad_negatives: grads_c })
}

/// Loss and gradients of a batch objective with respect to its unit
/// embeddings and the temperature.
#[derive(Clone, Debug)]
pub struct EmbeddingGrads {
    pub loss: f64,
    pub grad: Vec<DenseMatrix>,
    pub grad_tau: f64,
}

/// NT-Xent over `2N` views: rows `i` and `i + N` are siblings; every other row
/// is a negative. Loss is the mean over all `2N` anchors.
pub fn simclr_loss(z: &DenseMatrix, tau: f64) -> Result<EmbeddingGrads> {
    check_tau(tau)?;
    let m = z.rows();
    if m < 4 || m % 2 != 0 {
        return Err(Error::BatchTooSmall { size: m / 2, min: 2 });
    }
    let n = m / 2;
    let sims = z.matmul_t(z)?;
    let mut coef = DenseMatrix::zeros(m, m);
    let mut loss = 0.0;
    let mut grad_tau = 0.0;
    for a in 0..m {
        let pos = if a < n { a + n } else { a - n };
        let row = sims.row(a);
        let lse = logsumexp((0..m).filter(|&b| b != a).map(|b| row[b] / tau));
        loss += lse - row[pos] / tau;
        for b in 0..m {
            if b == a {
                continue;
            }
            let p = (row[b] / tau - lse).exp();
            let c = p - if b == pos { 1.0 } else { 0.0 };
            coef.set(a, b, c);
            grad_tau += c * (-row[b] / (tau * tau));
        }
    }
    let scale = 1.0 / m as f64;
    // dL/dz_a = Σ_b (C_ab + C_ba) z_b / τ
    let mut sym = DenseMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            sym.set(a, b, (coef.get(a, b) + coef.get(b, a)) * scale / tau);
        }
    }
    let grad = sym.matmul(z)?;
    Ok(EmbeddingGrads { loss: loss * scale, grad: vec![grad], grad_tau: grad_tau * scale })
}

/// Image-text loss over `N` pairs. Row `i` of `img` matches row `i` of `txt`;
/// the other `N − 1` rows of the opposite modality are negatives. With
/// `symmetric` the image→text and text→image directions are averaged,
/// otherwise only image→text is used.
pub fn clip_loss(img: &DenseMatrix, txt: &DenseMatrix, tau: f64, symmetric: bool) -> Result<EmbeddingGrads> {
    check_tau(tau)?;
    let n = img.rows();
    if n < 2 {
        return Err(Error::BatchTooSmall { size: n, min: 2 });
    }
    if txt.shape() != img.shape() {
        return Err(Error::Dimension { op: "clip_loss", left: img.shape(), right: txt.shape() });
    }
    let sims = img.matmul_t(txt)?;
    let weight = if symmetric { 0.5 } else { 1.0 } / n as f64;
    let mut g = DenseMatrix::zeros(n, n);
    let mut loss = 0.0;

    for i in 0..n {
        let row = sims.row(i);
        let lse = logsumexp(row.iter().map(|s| s / tau));
        loss += weight * (lse - row[i] / tau);
        for j in 0..n {
            let p = (row[j] / tau - lse).exp();
            g.set(i, j, g.get(i, j) + weight * (p - if i == j { 1.0 } else { 0.0 }));
        }
    }
    if symmetric {
        for j in 0..n {
            let lse = logsumexp((0..n).map(|i| sims.get(i, j) / tau));
            loss += weight * (lse - sims.get(j, j) / tau);
            for i in 0..n {
                let p = (sims.get(i, j) / tau - lse).exp();
                g.set(i, j, g.get(i, j) + weight * (p - if i == j { 1.0 } else { 0.0 }));
            }
        }
    }

    let mut grad_tau = 0.0;
    for (gv, s) in g.data().iter().zip(sims.data()) {
        grad_tau += gv * (-s / (tau * tau));
    }
    let mut g_scaled = g.clone();
    g_scaled.data_mut().iter_mut().for_each(|v| *v /= tau);
    let grad_img = g_scaled.matmul(txt)?;
    let mut gt = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gt.set(j, i, g_scaled.get(i, j));
        }
    }
    let grad_txt = gt.matmul(img)?;
    Ok(EmbeddingGrads { loss, grad: vec![grad_img, grad_txt], grad_tau })
}
