//! Python bindings: images, SSIM/PSNR, Fréchet distance, summaries, log-mel
//! features and toy training.

use ganlip_core::gan::{
    make_toy_dataset, train, Checkpoint, GanError, ModelKind, ToyConfig, TrainConfig, TrainOutcome,
};
use ganlip_core::media_io::{load_frame, MediaError};
use ganlip_core::melspec::{log_mel_spectrogram, AudioSignal, MelConfig, MelError, MelSpectrogram};
use ganlip_core::metrics::{
    self, EmbeddingSet, GaussianStats, MetricsError, SsimParams, ToyEmbedder,
};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn gan_err(e: GanError) -> PyErr {
    match e {
        GanError::Io(io) => PyOSError::new_err(io.to_string()),
        GanError::NonFiniteLoss { .. } | GanError::NonFiniteGradient | GanError::Autodiff(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => value_err(other),
    }
}

fn media_err(e: MediaError) -> PyErr {
    value_err(e)
}

fn metrics_err(e: MetricsError) -> PyErr {
    value_err(e)
}

fn mel_err(e: MelError) -> PyErr {
    value_err(e)
}

/// Row-major `height × width × channels` image with values in `[0, 1]`.
#[pyclass(name = "ImageTensor", module = "ganlip_py", from_py_object)]
#[derive(Clone)]
pub struct PyImage(pub ganlip_core::media_io::ImageTensor);

#[pymethods]
impl PyImage {
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> PyResult<Self> {
        ganlip_core::media_io::ImageTensor::new(height, width, channels, data)
            .map(Self)
            .map_err(media_err)
    }

    #[staticmethod]
    fn filled(height: usize, width: usize, channels: usize, value: f64) -> PyResult<Self> {
        ganlip_core::media_io::ImageTensor::filled(height, width, channels, value)
            .map(Self)
            .map_err(media_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_frame(path).map(Self).map_err(media_err)
    }

    fn save_png(&self, path: &str) -> PyResult<()> {
        self.0.save_png(path).map_err(media_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.0.dims()
    }

    fn tolist(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn __repr__(&self) -> String {
        let (h, w, c) = self.0.dims();
        format!("ImageTensor({h}x{w}x{c})")
    }
}

#[pyfunction]
#[pyo3(signature = (a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, dynamic_range=1.0))]
fn ssim(
    a: &PyImage,
    b: &PyImage,
    window: usize,
    sigma: f64,
    k1: f64,
    k2: f64,
    dynamic_range: f64,
) -> PyResult<f64> {
    let p = SsimParams {
        window,
        sigma,
        k1,
        k2,
        dynamic_range,
    };
    metrics::ssim(&a.0, &b.0, &p).map_err(metrics_err)
}

/// PSNR in dB; identical images give `inf`.
#[pyfunction]
#[pyo3(signature = (a, b, max_val=1.0))]
fn psnr(a: &PyImage, b: &PyImage, max_val: f64) -> PyResult<f64> {
    metrics::psnr(&a.0, &b.0, max_val).map_err(metrics_err)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(value_err("covariance must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn stats(mean: Vec<f64>, cov: &[Vec<f64>]) -> PyResult<GaussianStats> {
    GaussianStats::new(DVector::from_vec(mean), matrix(cov)?).map_err(metrics_err)
}

/// Fréchet distance between two Gaussians given as `(mean, covariance)`.
#[pyfunction]
fn frechet_distance(
    mean1: Vec<f64>,
    cov1: Vec<Vec<f64>>,
    mean2: Vec<f64>,
    cov2: Vec<Vec<f64>>,
) -> PyResult<f64> {
    metrics::frechet_distance(&stats(mean1, &cov1)?, &stats(mean2, &cov2)?).map_err(metrics_err)
}

/// Fréchet distance between Gaussians fitted to two sets of embedding rows.
#[pyfunction]
fn frechet_from_embeddings(real: Vec<Vec<f64>>, generated: Vec<Vec<f64>>) -> PyResult<f64> {
    let fit = |rows: &[Vec<f64>]| -> PyResult<GaussianStats> {
        let e = EmbeddingSet::from_rows(rows).map_err(metrics_err)?;
        metrics::gaussian_stats(&e).map_err(metrics_err)
    };
    metrics::frechet_distance(&fit(&real)?, &fit(&generated)?).map_err(metrics_err)
}

/// FID under the built-in random projection, for two lists of images.
#[pyfunction]
fn toy_fid(real: Vec<PyImage>, generated: Vec<PyImage>) -> PyResult<f64> {
    let first = real.first().ok_or_else(|| value_err("no real images"))?;
    let embedder = ToyEmbedder::new(first.0.data().len());
    let embed = |imgs: &[PyImage]| -> PyResult<GaussianStats> {
        let imgs: Vec<_> = imgs.iter().map(|i| i.0.clone()).collect();
        let e = embedder.embed_all(&imgs).map_err(metrics_err)?;
        metrics::gaussian_stats(&e).map_err(metrics_err)
    };
    metrics::frechet_distance(&embed(&real)?, &embed(&generated)?).map_err(metrics_err)
}

/// Summary statistics of the finite scores; infinite ones are counted.
#[pyfunction]
fn summarize<'py>(py: Python<'py>, scores: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let (finite, n_infinite) = metrics::partition_finite(&scores);
    let s = metrics::summarize(&finite).map_err(metrics_err)?;
    let d = PyDict::new(py);
    for (k, v) in [
        ("mean", s.mean),
        ("median", s.median),
        ("max", s.max),
        ("min", s.min),
        ("q1", s.q1),
        ("q3", s.q3),
        ("lower_fence", s.lower_fence),
        ("upper_fence", s.upper_fence),
    ] {
        d.set_item(k, v)?;
    }
    d.set_item("n", s.n)?;
    d.set_item("n_outliers", s.n_outliers)?;
    d.set_item("n_infinite", n_infinite)?;
    Ok(d)
}

/// Log-mel spectrogram of a mono signal as `(n_mels, n_frames, data)`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000, n_mels=80))]
fn log_mel(
    samples: Vec<f64>,
    sample_rate: u32,
    n_mels: usize,
) -> PyResult<(usize, usize, Vec<f64>)> {
    let cfg = MelConfig {
        sample_rate,
        n_mels,
        ..MelConfig::default()
    };
    let sig = AudioSignal::new(samples, sample_rate).map_err(mel_err)?;
    let m = log_mel_spectrogram(&sig, &cfg).map_err(mel_err)?;
    Ok((m.n_mels(), m.n_frames(), m.data().to_vec()))
}

/// Generator and critic trained on the toy corpus, plus the training log.
#[pyclass(name = "ToyRun", module = "ganlip_py")]
pub struct PyToyRun {
    outcome: TrainOutcome,
    held_out: Vec<ganlip_core::media_io::FramePair>,
}

#[pymethods]
impl PyToyRun {
    #[getter]
    fn generator_updates(&self) -> usize {
        self.outcome.diagnostics.generator_updates
    }

    #[getter]
    fn discriminator_updates(&self) -> usize {
        self.outcome.diagnostics.discriminator_updates
    }

    /// Mean critic input-gradient norm per iteration (empty for LipGAN).
    #[getter]
    fn gp_norms(&self) -> Vec<f64> {
        self.outcome.diagnostics.gp_norms.clone()
    }

    fn log_csv(&self) -> String {
        self.outcome.log.to_csv_string()
    }

    /// `(generated, target, reference)` for every held-out pair.
    fn held_out_samples(&self) -> PyResult<Vec<(PyImage, PyImage, PyImage)>> {
        let inputs: Vec<(_, &MelSpectrogram)> = self
            .held_out
            .iter()
            .map(|p| (&p.reference, &p.audio))
            .collect();
        let generated = self
            .outcome
            .generator
            .generate_batch(&inputs)
            .map_err(gan_err)?;
        Ok(generated
            .into_iter()
            .zip(&self.held_out)
            .map(|(g, p)| {
                (
                    PyImage(g),
                    PyImage(p.target.clone()),
                    PyImage(p.reference.clone()),
                )
            })
            .collect())
    }

    fn save_checkpoint(&self, path: &str) -> PyResult<()> {
        Checkpoint::from_models(&self.outcome.generator, &self.outcome.discriminator)
            .save(path)
            .map_err(gan_err)
    }
}

/// Trains `model` ("lipgan" or "l1wgan-gp") on the toy corpus. Both
/// configurations are JSON objects; missing fields take their defaults.
#[pyfunction]
#[pyo3(signature = (model, train_config="{}", toy_config="{}", held_out_videos=1))]
fn train_toy(
    py: Python<'_>,
    model: &str,
    train_config: &str,
    toy_config: &str,
    held_out_videos: usize,
) -> PyResult<PyToyRun> {
    let kind: ModelKind = model.parse().map_err(gan_err)?;
    let cfg: TrainConfig = serde_json::from_str(train_config).map_err(value_err)?;
    let toy: ToyConfig = serde_json::from_str(toy_config).map_err(value_err)?;
    py.detach(|| {
        let corpus = make_toy_dataset(&toy)?;
        let (pairs, held_out) = corpus.train_test_pairs(held_out_videos, cfg.seed)?;
        let outcome = train(kind, &cfg, &pairs, &mut |_, _| Ok(()))?;
        Ok(PyToyRun { outcome, held_out })
    })
    .map_err(gan_err)
}

#[pymodule]
fn ganlip_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyToyRun>()?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_from_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(toy_fid, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(log_mel, m)?)?;
    m.add_function(wrap_pyfunction!(train_toy, m)?)?;
    Ok(())
}
