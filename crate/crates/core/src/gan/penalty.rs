use rand::Rng;

use crate::autodiff::{grad, Tape, Tensor, Value};

use super::config::GpInputMode;
use super::model::Critic;
use super::GanError;

/// A differentiable gradient penalty together with the per-sample input
/// gradient norms it was computed from.
#[derive(Clone, Debug)]
pub struct Penalty {
    pub value: Value,
    pub norms: Vec<f64>,
}

impl Penalty {
    pub fn mean_norm(&self) -> f64 {
        self.norms.iter().sum::<f64>() / self.norms.len() as f64
    }
}

/// `mean_i (‖∇_x̂ D(x̂_i, a_i)‖₂ − 1)²`, recorded on `tape` so that it can be
/// differentiated with respect to the critic's parameters.
///
/// Every score depends only on its own row, so the gradient of the summed
/// scores holds the per-sample input gradients.
pub fn gradient_penalty<C, R>(
    d: &C,
    tape: &Tape,
    real: &Tensor,
    fake: &Tensor,
    audio: &Value,
    mode: GpInputMode,
    rng: &mut R,
) -> Result<Penalty, GanError>
where
    C: Critic + ?Sized,
    R: Rng + ?Sized,
{
    if real.shape() != fake.shape() {
        return Err(GanError::Shape(format!(
            "real {:?} vs fake {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let (n, dim) = real.dims2().filter(|(n, _)| *n > 0).ok_or_else(|| {
        GanError::Shape(format!(
            "expected [batch, features], got {:?}",
            real.shape()
        ))
    })?;
    let points = match mode {
        GpInputMode::GeneratorOutput => fake.clone(),
        GpInputMode::Interpolated => {
            let mut data = Vec::with_capacity(n * dim);
            for i in 0..n {
                let eps: f64 = rng.random();
                let row = i * dim..(i + 1) * dim;
                data.extend(
                    real.data()[row.clone()]
                        .iter()
                        .zip(&fake.data()[row])
                        .map(|(r, f)| eps * r + (1.0 - eps) * f),
                );
            }
            Tensor::matrix(n, dim, data)?
        }
    };
    let x_hat = tape.leaf(points);
    let scores = d.score(&x_hat, audio)?;
    let g = grad(&scores.sum()?, &[&x_hat], true)?.values.remove(0);
    let norms = g.l2_norm_rows()?;
    let dev = norms.add_scalar(-1.0)?;
    let value = dev.mul(&dev)?.mean()?;
    if !value.item()?.is_finite() {
        return Err(GanError::NonFiniteGradient);
    }
    Ok(Penalty {
        norms: norms.data().to_vec(),
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, AutodiffError};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rows(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::matrix(
            n,
            d,
            (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap()
    }

    fn linear_penalty(w: [f64; 2], mode: GpInputMode) -> Penalty {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tape = Tape::new();
        let wv = tape.leaf(Tensor::matrix(2, 1, w.to_vec()).unwrap());
        let critic = |x: &Value, _a: &Value| -> Result<Value, GanError> { Ok(x.matmul(&wv)?) };
        let real = rows(6, 2, &mut rng);
        let fake = rows(6, 2, &mut rng);
        let audio = tape.leaf(Tensor::zeros(&[6, 1]));
        gradient_penalty(&critic, &tape, &real, &fake, &audio, mode, &mut rng).unwrap()
    }

    #[test]
    fn linear_critic_norm_five() {
        for mode in [GpInputMode::Interpolated, GpInputMode::GeneratorOutput] {
            let p = linear_penalty([3.0, 4.0], mode);
            assert!((p.value.item().unwrap() - 16.0).abs() < 1e-9);
            assert!(p.norms.iter().all(|n| (n - 5.0).abs() < 1e-12));
        }
    }

    #[test]
    fn unit_norm_critic_has_no_penalty() {
        let p = linear_penalty([0.6, 0.8], GpInputMode::Interpolated);
        assert!(p.value.item().unwrap().abs() < 1e-20);
    }

    #[test]
    fn quadratic_critic_matches_per_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tape = Tape::new();
        let critic = |x: &Value, _a: &Value| -> Result<Value, GanError> {
            Ok(x.mul(x)?.sum_cols()?.scale(0.5)?)
        };
        // a point at norm 2 gives (2 - 1)^2
        let x = Tensor::matrix(1, 2, vec![1.2, 1.6]).unwrap();
        let a = tape.leaf(Tensor::zeros(&[1, 1]));
        let p = gradient_penalty(
            &critic,
            &tape,
            &x,
            &x,
            &a,
            GpInputMode::GeneratorOutput,
            &mut rng,
        )
        .unwrap();
        assert!((p.value.item().unwrap() - 1.0).abs() < 1e-12);

        let real = rows(5, 3, &mut rng);
        let fake = rows(5, 3, &mut rng);
        let a = tape.leaf(Tensor::zeros(&[5, 1]));
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let p = gradient_penalty(
            &critic,
            &tape,
            &real,
            &fake,
            &a,
            GpInputMode::Interpolated,
            &mut r1,
        )
        .unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let mut brute = 0.0;
        for i in 0..5 {
            let eps: f64 = r2.random();
            let norm = (0..3)
                .map(|j| {
                    let v = eps * real.data()[i * 3 + j] + (1.0 - eps) * fake.data()[i * 3 + j];
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            brute += (norm - 1.0).powi(2);
        }
        assert!((p.value.item().unwrap() - brute / 5.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let tape = Tape::new();
        let critic = |x: &Value, _a: &Value| -> Result<Value, GanError> { Ok(x.sum_cols()?) };
        let a = tape.leaf(Tensor::zeros(&[2, 1]));
        let r = Tensor::zeros(&[2, 3]);
        let f = Tensor::zeros(&[2, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gradient_penalty(
                &critic,
                &tape,
                &r,
                &f,
                &a,
                GpInputMode::Interpolated,
                &mut rng
            ),
            Err(GanError::Shape(_))
        ));
    }

    /// Penalty of `D(x) = ½·c·‖x‖² + x·w` as a function of `p = [c, w]`.
    fn param_penalty(p: &Value) -> Result<Value, AutodiffError> {
        let tape = p.tape().clone();
        let c = p.slice_cols(0, 1)?.reshape(&[])?;
        let w = p.slice_cols(1, 4)?.reshape(&[3, 1])?;
        let critic = |x: &Value, _a: &Value| -> Result<Value, GanError> {
            Ok(x.mul(x)?
                .sum_cols()?
                .scale(0.5)?
                .mul(&c)?
                .add(&x.matmul(&w)?)?)
        };
        let x = Tensor::matrix(2, 3, vec![0.4, -0.3, 0.8, 0.1, 0.9, -0.5]).unwrap();
        let a = tape.leaf(Tensor::zeros(&[2, 1]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pen = gradient_penalty(
            &critic,
            &tape,
            &x,
            &x,
            &a,
            GpInputMode::GeneratorOutput,
            &mut rng,
        )
        .unwrap();
        Ok(pen.value)
    }

    #[test]
    fn parameter_gradient_through_double_backward() {
        let p = Tensor::matrix(1, 4, vec![0.7, 0.2, -0.4, 0.5]).unwrap();
        let err = finite_diff_check(param_penalty, &p, 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
