//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Every operation on a [`Value`] appends a node to its [`Tape`]. [`grad`]
//! walks the tape backwards; because each backward rule is written in terms
//! of the same tape operations, gradients requested with `create_graph`
//! are ordinary recorded values and can be differentiated again. The
//! gradient penalty relies on this to train through `‖∇ₓD(x)‖`.
//!
//! ```
//! use ganlip_core::autodiff::{grad, Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(2.0));
//! let y = x.mul(&x).unwrap().mul(&x).unwrap(); // x³
//! let dy = grad(&y, &[&x], true).unwrap().values.remove(0); // 3x²
//! let d2y = grad(&dy, &[&x], false).unwrap().values.remove(0); // 6x
//! assert_eq!(dy.item().unwrap(), 12.0);
//! assert_eq!(d2y.item().unwrap(), 12.0);
//! ```

mod backward;
mod tape;
mod tensor;

pub use backward::{finite_diff_check, grad, Gradients};
pub use tape::{Tape, Value};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} expects a 2-D tensor, got shape {shape:?}")]
    NotMatrix { op: &'static str, shape: Vec<usize> },
    #[error("shape {shape:?} does not match {len} data values")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("non-finite result in {op}")]
    NonFinite { op: &'static str },
    #[error("{op} on empty input")]
    Empty { op: &'static str },
    #[error("column range {start}..{end} out of bounds for width {len}")]
    SliceOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("values belong to different tapes")]
    ForeignTape,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn relu_values() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[2], &[-1.0, 2.0]));
        assert_eq!(x.relu().unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let y = x.relu().unwrap();
        let g = grad(&y, &[&x], false).unwrap();
        assert_eq!(g.values[0].item().unwrap(), 0.0);
    }

    #[test]
    fn identity_matmul() {
        let tape = Tape::new();
        let eye = tape.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let a = tape.leaf(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(eye.matmul(&a).unwrap().data(), a.data());
    }

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = x.mul(&x).unwrap();
        let g = grad(&y, &[&x], false).unwrap();
        assert_eq!(g.values[0].item().unwrap(), 6.0);
    }

    #[test]
    fn linear_gradient_is_weight() {
        let w = t(&[1, 3], &[0.5, -2.0, 3.0]);
        for xs in [[0.0, 0.0, 0.0], [1.0, -7.0, 2.5]] {
            let tape = Tape::new();
            let wv = tape.leaf(w.clone());
            let x = tape.leaf(t(&[1, 3], &xs));
            let y = wv.mul(&x).unwrap().sum().unwrap();
            let g = grad(&y, &[&x], false).unwrap();
            assert_eq!(g.values[0].data(), w.data());
        }
    }

    #[test]
    fn disconnected_input_is_flagged() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let z = tape.leaf(t(&[2], &[1.0, 2.0]));
        let y = x.mul(&x).unwrap();
        let g = grad(&y, &[&x, &z], false).unwrap();
        assert_eq!(g.disconnected, vec![false, true]);
        assert_eq!(g.values[1].data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_output_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        assert!(matches!(
            grad(&x, &[&x], false),
            Err(AutodiffError::NotScalar { .. })
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let tape = Tape::new();
        let a = tape.leaf(t(&[2], &[1.0, 2.0]));
        let b = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]));
        assert!(matches!(
            a.add(&b),
            Err(AutodiffError::ShapeMismatch { .. })
        ));
        let m = tape.leaf(t(&[2, 3], &[0.0; 6]));
        assert!(m.matmul(&m).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        assert!(matches!(
            x.ln(),
            Err(AutodiffError::NonFinite { op: "log" })
        ));
    }

    #[test]
    fn foreign_tape_rejected() {
        let a = Tape::new().scalar(1.0);
        let b = Tape::new().scalar(1.0);
        assert_eq!(a.add(&b).unwrap_err(), AutodiffError::ForeignTape);
    }

    #[test]
    fn no_graph_gradients_are_leaves() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let y = x.mul(&x).unwrap().mul(&x).unwrap();
        let g = grad(&y, &[&x], false).unwrap().values.remove(0);
        let again = grad(&g, &[&x], false).unwrap();
        assert!(again.disconnected[0]);
    }

    #[test]
    fn scalar_broadcast_reduces_gradient() {
        let tape = Tape::new();
        let s = tape.scalar(2.0);
        let x = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]));
        let y = s.mul(&x).unwrap().sum().unwrap();
        let g = grad(&y, &[&s, &x], false).unwrap();
        assert_eq!(g.values[0].item().unwrap(), 6.0);
        assert_eq!(g.values[0].shape(), &[] as &[usize]);
        assert_eq!(g.values[1].data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn concat_and_slice_roundtrip() {
        let tape = Tape::new();
        let a = tape.leaf(t(&[2, 1], &[1.0, 2.0]));
        let b = tape.leaf(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = Value::concat(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        assert_eq!(c.slice_cols(1, 3).unwrap().data(), b.data());
    }
}
