use super::{dot, norm, DenseMatrix, ParamTensor};
use crate::error::{Error, Result};

/// Below this norm a vector is considered collapsed.
pub const NORM_FLOOR: f64 = 1e-12;

/// `input · W + b`, with `b` broadcast over rows.
pub fn affine_forward(input: &DenseMatrix, weight: &ParamTensor, bias: &ParamTensor) -> Result<DenseMatrix> {
    if input.cols() != weight.value.rows() {
        return Err(Error::Dimension { op: "affine_forward", left: input.shape(), right: weight.value.shape() });
    }
    if bias.value.shape() != (1, weight.value.cols()) {
        return Err(Error::Dimension {
            op: "affine_forward(bias)",
            left: weight.value.shape(),
            right: bias.value.shape(),
        });
    }
    let mut out = input.matmul(&weight.value)?;
    let b = bias.value.row(0);
    for r in 0..out.rows() {
        for (o, &bb) in out.row_mut(r).iter_mut().zip(b) {
            *o += bb;
        }
    }
    Ok(out)
}

/// Backward of [`affine_forward`]. Accumulates into the parameter gradients
/// and returns the gradient with respect to `input`.
pub fn affine_backward(
    input: &DenseMatrix,
    weight: &mut ParamTensor,
    bias: &mut ParamTensor,
    grad_out: &DenseMatrix,
) -> Result<DenseMatrix> {
    if grad_out.shape() != (input.rows(), weight.value.cols()) {
        return Err(Error::Dimension {
            op: "affine_backward",
            left: grad_out.shape(),
            right: (input.rows(), weight.value.cols()),
        });
    }
    input.t_matmul_acc(grad_out, &mut weight.grad)?;
    let gb = bias.grad.row_mut(0);
    for r in grad_out.iter_rows() {
        for (g, &v) in gb.iter_mut().zip(r) {
            *g += v;
        }
    }
    grad_out.matmul_t(&weight.value)
}

/// Scale `v` to unit length. Returns the unit vector and the original norm.
pub fn l2_normalize(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(v);
    if !(n > NORM_FLOOR) {
        return Err(Error::DegenerateVector { norm: n });
    }
    Ok((v.iter().map(|x| x / n).collect(), n))
}

/// Vector-Jacobian product of normalization: `(g − u (u·g)) / ‖v‖`.
pub fn l2_normalize_backward(unit: &[f64], input_norm: f64, grad_unit: &[f64]) -> Vec<f64> {
    let ug = dot(unit, grad_unit);
    unit.iter().zip(grad_unit).map(|(u, g)| (g - u * ug) / input_norm).collect()
}

/// Row-wise normalization of a matrix; returns unit rows and row norms.
pub fn l2_normalize_rows(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let (u, n) = l2_normalize(m.row(r))?;
        out.row_mut(r).copy_from_slice(&u);
        norms.push(n);
    }
    Ok((out, norms))
}

pub fn l2_normalize_rows_backward(unit: &DenseMatrix, norms: &[f64], grad_unit: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(unit.rows(), unit.cols());
    for r in 0..unit.rows() {
        let g = l2_normalize_backward(unit.row(r), norms[r], grad_unit.row(r));
        out.row_mut(r).copy_from_slice(&g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn affine_identity_and_zero_input() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let w = ParamTensor::new(DenseMatrix::identity(2));
        let b = ParamTensor::zeros(1, 2);
        assert_eq!(affine_forward(&x, &w, &b).unwrap().data(), &[1.0, 2.0]);

        let z = DenseMatrix::zeros(1, 3);
        let mut rng = stream(1, "affine", 0);
        let w = ParamTensor::gaussian(3, 2, 1.0, &mut rng);
        let b = ParamTensor::new(DenseMatrix::from_rows(&[[0.25, -4.0]]).unwrap());
        assert_eq!(affine_forward(&z, &w, &b).unwrap().data(), &[0.25, -4.0]);
    }

    #[test]
    fn affine_matches_naive_oracle() {
        let mut rng = stream(2, "affine", 0);
        let x = DenseMatrix::from_vec(3, 4, (0..12).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let w = ParamTensor::gaussian(4, 5, 1.0, &mut rng);
        let b = ParamTensor::gaussian(1, 5, 1.0, &mut rng);
        let out = affine_forward(&x, &w, &b).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let mut s = b.value.get(0, j);
                for k in 0..4 {
                    s += x.get(i, k) * w.value.get(k, j);
                }
                assert!((out.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_shape_error() {
        let x = DenseMatrix::zeros(2, 3);
        let w = ParamTensor::zeros(4, 2);
        let b = ParamTensor::zeros(1, 2);
        let msg = affine_forward(&x, &w, &b).unwrap_err().to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(4, 2)"), "{msg}");
    }

    #[test]
    fn normalize_examples() {
        let (u, n) = l2_normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(n, 5.0);
        assert!((u[0] - 0.6).abs() < 1e-15 && (u[1] - 0.8).abs() < 1e-15);
        let (u, _) = l2_normalize(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(u, vec![0.0, 1.0, 0.0]);
        assert!(matches!(l2_normalize(&[0.0, 1e-13]), Err(Error::DegenerateVector { .. })));
        assert!(l2_normalize(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let mut rng = stream(4, "norm-fd", 0);
        for _ in 0..10 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |v: &[f64]| dot(&l2_normalize(v).unwrap().0, &c);
            let (u, n) = l2_normalize(&v).unwrap();
            let analytic = l2_normalize_backward(&u, n, &c);
            let h = 1e-6;
            for i in 0..v.len() {
                let mut p = v.clone();
                let mut m = v.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
                assert!(rel < 1e-6, "component {i}: fd {fd} analytic {}", analytic[i]);
            }
        }
    }
}
