use ganlip_core::media_io::ImageTensor;
use ganlip_core::metrics::{
    frechet_distance, gaussian_stats, matrix_sqrt_psd, psnr, ssim, summarize, EmbeddingSet,
    GaussianStats, SsimParams,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn image(h: usize, w: usize) -> impl Strategy<Value = ImageTensor> {
    prop::collection::vec(0.0f64..1.0, h * w)
        .prop_map(move |d| ImageTensor::new(h, w, 1, d).unwrap())
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| {
        let b = DMatrix::from_vec(n, n, d);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.05
    })
}

fn gaussian(n: usize) -> impl Strategy<Value = GaussianStats> {
    (prop::collection::vec(-3.0f64..3.0, n), spd(n))
        .prop_map(move |(m, c)| GaussianStats::new(DVector::from_vec(m), c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ssim_bounded_and_symmetric(a in image(12, 13), b in image(12, 13)) {
        let p = SsimParams::default();
        let ab = ssim(&a, &b, &p).unwrap();
        let ba = ssim(&b, &a, &p).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((ssim(&a, &a, &p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_symmetric_and_scale_consistent(a in image(4, 5), b in image(4, 5)) {
        let ab = psnr(&a, &b, 1.0).unwrap();
        prop_assert_eq!(ab, psnr(&b, &a, 1.0).unwrap());
        // doubling the peak adds 20·log10(2) dB
        let shifted = psnr(&a, &b, 2.0).unwrap();
        prop_assert!((shifted - ab - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn frechet_is_a_symmetric_nonnegative_distance(g in gaussian(4), h in gaussian(4)) {
        let d = frechet_distance(&g, &h).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - frechet_distance(&h, &g).unwrap()).abs() < 1e-8 * (1.0 + d));
        prop_assert!(frechet_distance(&g, &g).unwrap() < 1e-8);
    }

    #[test]
    fn frechet_ignores_common_translation(g in gaussian(3), h in gaussian(3), t in prop::collection::vec(-5.0f64..5.0, 3)) {
        let t = DVector::from_vec(t);
        let shift = |s: &GaussianStats| GaussianStats::new(&s.mean + &t, s.cov.clone()).unwrap();
        let d = frechet_distance(&g, &h).unwrap();
        prop_assert!((d - frechet_distance(&shift(&g), &shift(&h)).unwrap()).abs() < 1e-8 * (1.0 + d));
    }

    #[test]
    fn sqrt_reconstructs(a in spd(6)) {
        let r = matrix_sqrt_psd(&a).unwrap();
        prop_assert!((&r * &r - &a).abs().max() < 1e-10);
        prop_assert!((&r - r.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn embedding_stats_match_direct_formulas(rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..12)) {
        let e = EmbeddingSet::from_rows(&rows).unwrap();
        let s = gaussian_stats(&e).unwrap();
        let n = rows.len() as f64;
        for i in 0..3 {
            let mi = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            prop_assert!((s.mean[i] - mi).abs() < 1e-12);
            for j in 0..3 {
                let mj = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let c = rows.iter().map(|r| (r[i] - mi) * (r[j] - mj)).sum::<f64>() / (n - 1.0);
                prop_assert!((s.cov[(i, j)] - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn summary_fences_bracket_the_box(v in prop::collection::vec(-100.0f64..100.0, 1..50)) {
        let s = summarize(&v).unwrap();
        prop_assert!(s.lower_fence <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.upper_fence);
        let outside = v.iter().filter(|&&x| x < s.lower_fence || x > s.upper_fence).count();
        prop_assert_eq!(outside, s.n_outliers);
    }
}

#[test]
fn emb1_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let e = EmbeddingSet::from_rows(&[vec![0.25, -1.0, 3.5], vec![2.0, 0.0, -0.125]]).unwrap();
    let p = dir.path().join("x.emb");
    e.save(&p).unwrap();
    assert_eq!(EmbeddingSet::load(&p).unwrap(), e);
}
