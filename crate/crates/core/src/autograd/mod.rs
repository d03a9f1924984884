//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Operations are recorded on a [`Tape`] as they execute. Calling
//! [`Tape::backward`] on a scalar walks the tape once in reverse and returns
//! [`Gradients`] for every leaf that was marked as differentiable.

mod gradcheck;
mod kernels;
mod tape;

pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig, GradCheckReport, InputReport};
pub use tape::{Activation, Gradients, NodeId, Tape, Var};


use crate::error::{Error, Result};

/// Per-node dense linear map over the flattened (time × feature) block.
///
/// `x` has shape `[.., nodes, t_in, f_in]` and `kernel` has shape
/// `[t_in * f_in, t_out * f_out]`; the result is `[.., nodes, t_out, f_out]`.
pub fn temporal_conv<'t>(x: Var<'t>, kernel: Var<'t>, t_out: usize, f_out: usize) -> Result<Var<'t>> {
    let xs = x.shape();
    let ks = kernel.shape();
    if xs.len() < 3 {
        return Err(Error::dim("temporal_conv", &xs, &ks));
    }
    let nd = xs.len();
    let (t_in, f_in) = (xs[nd - 2], xs[nd - 1]);
    if ks.len() != 2 || ks[0] != t_in * f_in || ks[1] != t_out * f_out {
        return Err(Error::dim("temporal_conv", &xs, &ks));
    }
    let mut flat = xs[..nd - 2].to_vec();
    flat.push(t_in * f_in);
    let y = x.reshape(&flat)?.matmul(kernel)?;
    let mut out = xs[..nd - 2].to_vec();
    out.extend([t_out, f_out]);
    y.reshape(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn matmul_identity_and_hand_values() {
        let tape = Tape::new();
        let i = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = tape.constant(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        assert_eq!(i.matmul(b).unwrap().value().data(), &[3.0, 4.0, 5.0, 6.0]);

        let a = tape.constant(t(&[1, 2], &[1.0, 2.0]));
        let c = tape.constant(t(&[2, 1], &[3.0, 4.0]));
        assert_eq!(a.matmul(c).unwrap().value().data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = a.matmul(b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn matmul_grad_of_sum_is_ones_times_bt() {
        let mut r = rng();
        let a = Tensor::uniform(&[3, 4], -1.0, 1.0, &mut r);
        let b = Tensor::uniform(&[4, 2], -1.0, 1.0, &mut r);
        let tape = Tape::new();
        let va = tape.param(a);
        let vb = tape.constant(b.clone());
        let loss = va.matmul(vb).unwrap().sum();
        let g = tape.backward(loss).unwrap().wrt(va);
        // ones(3,2) · bᵀ: row i, column p = Σ_j b[p, j]
        for i in 0..3 {
            for p in 0..4 {
                let expect = b.at(&[p, 0]) + b.at(&[p, 1]);
                assert!((g.at(&[i, p]) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn batched_matmul_broadcasts_left_operand() {
        let mut r = rng();
        let a = Tensor::uniform(&[3, 3], -1.0, 1.0, &mut r);
        let x = Tensor::uniform(&[2, 3, 5], -1.0, 1.0, &mut r);
        let tape = Tape::new();
        let y = tape.constant(a.clone()).matmul(tape.constant(x.clone())).unwrap().value();
        assert_eq!(y.shape(), &[2, 3, 5]);
        for b in 0..2 {
            for i in 0..3 {
                for j in 0..5 {
                    let e: f64 = (0..3).map(|k| a.at(&[i, k]) * x.at(&[b, k, j])).sum();
                    assert!((y.at(&[b, i, j]) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn elementwise_basics() {
        let tape = Tape::new();
        let a = tape.constant(t(&[3], &[1.0, 2.0, 3.0]));
        let z = tape.constant(Tensor::zeros(&[3]));
        assert_eq!(a.add(z).unwrap().value().data(), &[1.0, 2.0, 3.0]);
        let b = tape.constant(t(&[2], &[2.0, 3.0]));
        assert_eq!(b.scale(0.5).value().data(), &[1.0, 1.5]);
        let half = tape.constant(Tensor::scalar(0.5));
        assert_eq!(b.mul(half).unwrap().value().data(), &[1.0, 1.5]);
        assert!(a.add(b).is_err());
    }

    #[test]
    fn activations_pointwise() {
        let tape = Tape::new();
        let x = tape.param(t(&[3], &[-1.0, 0.0, 2.0]));
        let y = x.relu();
        assert_eq!(y.value().data(), &[0.0, 0.0, 2.0]);
        let g = tape.backward(y.sum()).unwrap().wrt(x);
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
        let s = tape.constant(t(&[1], &[0.0])).sigmoid();
        assert_eq!(s.value().data(), &[0.5]);
    }

    #[test]
    fn softmax_known_values() {
        let tape = Tape::new();
        let a = tape.constant(t(&[2], &[0.0, 0.0])).softmax_lastdim();
        assert_eq!(a.value().data(), &[0.5, 0.5]);
        let b = tape.constant(t(&[2], &[1000.0, 1000.0])).softmax_lastdim();
        assert_eq!(b.value().data(), &[0.5, 0.5]);
    }

    #[test]
    fn backward_simple_cases() {
        let tape = Tape::new();
        let x = tape.param(t(&[3], &[0.3, -2.0, 5.0]));
        let g = tape.backward(x.sum()).unwrap().wrt(x);
        assert_eq!(g.data(), &[1.0, 1.0, 1.0]);

        let tape = Tape::new();
        let x = tape.param(t(&[2], &[1.0, 2.0]));
        let loss = x.mul(x).unwrap().sum();
        let g = tape.backward(loss).unwrap().wrt(x);
        assert_eq!(g.data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn sum_of_inputs_gives_ones_at_any_depth() {
        let tape = Tape::new();
        let x = tape.param(Tensor::full(&[4], 0.25));
        let mut y = x;
        for _ in 0..25 {
            y = y.reshape(&[2, 2]).unwrap().reshape(&[4]).unwrap().scale(1.0);
        }
        let g = tape.backward(y.sum()).unwrap().wrt(x);
        assert_eq!(g.data(), &[1.0; 4]);
    }

    #[test]
    fn temporal_conv_identity_and_zero() {
        let mut r = rng();
        let x = Tensor::uniform(&[3, 4, 2], -1.0, 1.0, &mut r);
        let tape = Tape::new();
        let vx = tape.constant(x.clone());
        let id = temporal_conv(vx, tape.constant(Tensor::eye(8)), 4, 2).unwrap();
        assert_eq!(id.value(), x);
        let z = temporal_conv(vx, tape.constant(Tensor::zeros(&[8, 6])), 3, 2).unwrap();
        assert_eq!(z.value(), Tensor::zeros(&[3, 3, 2]));
        assert!(temporal_conv(vx, tape.constant(Tensor::zeros(&[7, 6])), 3, 2).is_err());
    }

    #[test]
    fn gather_rows_scatters_gradient() {
        let tape = Tape::new();
        let table = tape.param(Tensor::from_fn(&[3, 2], |i| (i[0] * 2 + i[1]) as f64));
        let rows = table.gather_rows(&[2, 0, 2]).unwrap();
        assert_eq!(rows.value().data(), &[4.0, 5.0, 0.0, 1.0, 4.0, 5.0]);
        let g = tape.backward(rows.sum()).unwrap().wrt(table);
        assert_eq!(g.data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn permute_moves_axes() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::from_fn(&[2, 3, 4], |i| (i[0] * 100 + i[1] * 10 + i[2]) as f64));
        let y = x.permute(&[2, 0, 1]).unwrap().value();
        assert_eq!(y.shape(), &[4, 2, 3]);
        assert_eq!(y.at(&[3, 1, 2]), 123.0);
        assert!(x.permute(&[0, 0, 1]).is_err());
    }
}
