use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::media_io::ImageTensor;

fn check_dims(a: &ImageTensor, b: &ImageTensor) -> Result<(), MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::DimensionMismatch {
            lhs: format!("{:?}", a.dims()),
            rhs: format!("{:?}", b.dims()),
        });
    }
    Ok(())
}

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let n = a.data().len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor, max_val: f64) -> Result<f64, MetricsError> {
    if max_val.is_nan() || max_val <= 0.0 {
        return Err(MetricsError::InvalidArgument(format!(
            "max_val must be > 0, got {max_val}"
        )));
    }
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / e).log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Valid-mode separable filtering of a `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|j| k[j] * plane[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, p: &SsimParams) -> f64 {
    let k = p.kernel();
    let prod = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| x * y).collect() };
    let mu_a = filter_valid(a, h, w, &k);
    let mu_b = filter_valid(b, h, w, &k);
    let e_aa = filter_valid(&prod(a, a), h, w, &k);
    let e_bb = filter_valid(&prod(b, b), h, w, &k);
    let e_ab = filter_valid(&prod(a, b), h, w, &k);
    let (c1, c2) = (p.c1(), p.c2());
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    total / mu_a.len() as f64
}

/// Mean structural similarity over all window positions that fit inside
/// the image; multichannel images average the per-channel scores.
pub fn ssim(a: &ImageTensor, b: &ImageTensor, params: &SsimParams) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (h, w, c) = a.dims();
    if params.window == 0 || h.min(w) < params.window {
        return Err(MetricsError::ImageTooSmall {
            height: h,
            width: w,
            window: params.window,
        });
    }
    let total: f64 = (0..c)
        .map(|ch| ssim_plane(&a.plane(ch), &b.plane(ch), h, w, params))
        .sum();
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(h: usize, w: usize, v: f64) -> ImageTensor {
        ImageTensor::filled(h, w, 1, v).unwrap()
    }

    fn random(h: usize, w: usize, c: usize, rng: &mut impl Rng) -> ImageTensor {
        ImageTensor::new(
            h,
            w,
            c,
            (0..h * w * c).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap()
    }

    /// Direct evaluation of the SSIM formula with explicit 2-D window sums.
    #[allow(clippy::needless_range_loop)]
    fn ssim_brute(a: &ImageTensor, b: &ImageTensor) -> f64 {
        let (h, w, c) = a.dims();
        let n = 11;
        let mut weights = vec![vec![0.0; n]; n];
        let mut norm = 0.0;
        for (i, row) in weights.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                norm += *v;
            }
        }
        let (c1, c2) = (0.0001, 0.0009);
        let mut total = 0.0;
        for ch in 0..c {
            let mut sum = 0.0;
            for y in 0..=h - n {
                for x in 0..=w - n {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            let wt = weights[i][j] / norm;
                            ma += wt * a.get(y + i, x + j, ch);
                            mb += wt * b.get(y + i, x + j, ch);
                        }
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            let wt = weights[i][j] / norm;
                            let da = a.get(y + i, x + j, ch) - ma;
                            let db = b.get(y + i, x + j, ch) - mb;
                            va += wt * da * da;
                            vb += wt * db * db;
                            cov += wt * da * db;
                        }
                    }
                    sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                }
            }
            total += sum / ((h - n + 1) * (w - n + 1)) as f64;
        }
        total / c as f64
    }

    #[test]
    fn psnr_cases() {
        let a = gray(2, 2, 0.0);
        let b = gray(2, 2, 0.5);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let expected = 10.0 * (1.0f64 / 0.25).log10();
        assert!((psnr(&a, &b, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 6.0206).abs() < 1e-4);
        let c = gray(2, 2, 0.1);
        assert!((psnr(&a, &c, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn psnr_dimension_mismatch() {
        assert!(matches!(
            psnr(&gray(2, 2, 0.0), &gray(2, 3, 0.0), 1.0),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ssim_self_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(20, 17, 3, &mut rng);
        assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_constant_closed_form() {
        let s = ssim(
            &gray(16, 16, 0.2),
            &gray(16, 16, 0.8),
            &SsimParams::default(),
        )
        .unwrap();
        let c1 = 0.0001;
        let expected = (2.0 * 0.16 + c1) / (0.04 + 0.64 + c1);
        assert!((s - expected).abs() < 1e-9);
        assert!((s - 0.47067).abs() < 1e-4);
    }

    #[test]
    fn ssim_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let a = random(32, 32, 1, &mut rng);
            let b = random(32, 32, 1, &mut rng);
            let fast = ssim(&a, &b, &SsimParams::default()).unwrap();
            assert!((fast - ssim_brute(&a, &b)).abs() < 1e-6);
        }
    }

    #[test]
    fn ssim_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random(14, 14, 3, &mut rng);
        let b = random(14, 14, 3, &mut rng);
        let p = SsimParams::default();
        assert!((ssim(&a, &b, &p).unwrap() - ssim(&b, &a, &p).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ssim_small_image_rejected() {
        let a = gray(10, 30, 0.5);
        assert!(matches!(
            ssim(&a, &a, &SsimParams::default()),
            Err(MetricsError::ImageTooSmall { .. })
        ));
    }
}
