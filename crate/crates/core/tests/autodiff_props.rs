use ganlip_core::autodiff::{finite_diff_check, grad, AutodiffError, Tape, Tensor, Value};
use proptest::prelude::*;

fn f(x: &Value) -> Result<Value, AutodiffError> {
    x.tanh()?.mul(x)?.sum()
}

fn g(x: &Value) -> Result<Value, AutodiffError> {
    x.mul(x)?.add_scalar(1.0)?.ln()?.sum()
}

fn row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_linear(xs in row(5), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 5, xs).unwrap());
        let combo = f(&x).unwrap().scale(a).unwrap().add(&g(&x).unwrap().scale(b).unwrap()).unwrap();
        let gc = grad(&combo, &[&x], false).unwrap().values.remove(0);
        let gf = grad(&f(&x).unwrap(), &[&x], false).unwrap().values.remove(0);
        let gg = grad(&g(&x).unwrap(), &[&x], false).unwrap().values.remove(0);
        for i in 0..5 {
            let want = a * gf.data()[i] + b * gg.data()[i];
            prop_assert!((gc.data()[i] - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn quadratic_form_hessian(a in row(9), xs in row(3)) {
        // f = xᵀAx, ∇f = (A + Aᵀ)x, ∇²f = A + Aᵀ
        let tape = Tape::new();
        let am = tape.leaf(Tensor::matrix(3, 3, a.clone()).unwrap());
        let x = tape.leaf(Tensor::matrix(3, 1, xs.clone()).unwrap());
        let q = x.transpose().unwrap().matmul(&am).unwrap().matmul(&x).unwrap().sum().unwrap();
        let gx = grad(&q, &[&x], true).unwrap().values.remove(0);
        for i in 0..3 {
            let want: f64 = (0..3).map(|j| (a[i * 3 + j] + a[j * 3 + i]) * xs[j]).sum();
            prop_assert!((gx.data()[i] - want).abs() < 1e-9);
            let row = grad(&gx.slice_cols(0, 1).unwrap().reshape(&[3]).unwrap().mul(
                &tape.leaf(Tensor::new(vec![3], (0..3).map(|k| f64::from(u8::from(k == i))).collect()).unwrap()),
            ).unwrap().sum().unwrap(), &[&x], false).unwrap().values.remove(0);
            for j in 0..3 {
                prop_assert!((row.data()[j] - (a[i * 3 + j] + a[j * 3 + i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_matches_finite_differences(xs in row(6)) {
        let h = |x: &Value| -> Result<Value, AutodiffError> {
            let m = x.reshape(&[2, 3])?;
            let s = m.sigmoid()?.matmul(&m.transpose()?)?;
            s.l2_norm_rows()?.sum()
        };
        let err = finite_diff_check(h, &Tensor::matrix(1, 6, xs).unwrap(), 1e-6).unwrap();
        prop_assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn input_gradient_norm_is_differentiable(xs in row(4), ws in row(4)) {
        // ‖∇ₓ tanh(w·x)‖² as a function of w, checked by finite differences.
        let xs2 = xs.clone();
        let pen = move |w: &Value| -> Result<Value, AutodiffError> {
            let tape = w.tape().clone();
            let x = tape.leaf(Tensor::matrix(1, 4, xs2.clone())?);
            let s = x.matmul(&w.reshape(&[4, 1])?)?.tanh()?.sum()?;
            let gx = grad(&s, &[&x], true)?.values.remove(0);
            gx.mul(&gx)?.sum()
        };
        let err = finite_diff_check(pen, &Tensor::matrix(1, 4, ws).unwrap(), 1e-6).unwrap();
        prop_assert!(err < 1e-4, "{err}");
    }
}

#[test]
fn third_derivative_through_nested_graphs() {
    let tape = Tape::new();
    let x = tape.scalar(0.7);
    let y = x.sigmoid().unwrap();
    let d1 = grad(&y, &[&x], true).unwrap().values.remove(0);
    let d2 = grad(&d1, &[&x], true).unwrap().values.remove(0);
    let d3 = grad(&d2, &[&x], false).unwrap().values.remove(0);
    let s = 1.0 / (1.0 + (-0.7f64).exp());
    let want = s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s);
    assert!((d3.item().unwrap() - want).abs() < 1e-12);
}
