use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::MetricsError;
use crate::media_io::ImageTensor;

/// Absolute asymmetry tolerated by [`matrix_sqrt_psd`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// `n × dim` matrix of feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    dim: usize,
    vectors: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(n: usize, dim: usize, vectors: Vec<f64>) -> Result<Self, MetricsError> {
        if vectors.len() != n * dim {
            return Err(MetricsError::InvalidArgument(format!(
                "{} values for {n} vectors of dim {dim}",
                vectors.len()
            )));
        }
        Ok(Self { n, dim, vectors })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricsError> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MetricsError::InvalidArgument(
                "ragged embedding rows".into(),
            ));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn write_emb1<W: Write>(&self, mut w: W) -> Result<(), MetricsError> {
        let mut buf = Vec::with_capacity(12 + 4 * self.vectors.len());
        buf.extend_from_slice(b"EMB1");
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for &v in &self.vectors {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_emb1<R: Read>(mut r: R) -> Result<Self, MetricsError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..4] != b"EMB1" {
            return Err(MetricsError::Format("missing EMB1 header".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != 4 * n * dim {
            return Err(MetricsError::Format(format!(
                "expected {} data bytes for {n}x{dim}, found {}",
                4 * n * dim,
                body.len()
            )));
        }
        let vectors = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::new(n, dim, vectors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        self.write_emb1(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        Self::read_emb1(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Mean and covariance of an embedding distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, MetricsError> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(MetricsError::DimensionMismatch {
                lhs: format!("mean {}", mean.len()),
                rhs: format!("cov {}x{}", cov.nrows(), cov.ncols()),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased (n − 1) covariance, symmetrized.
pub fn gaussian_stats(e: &EmbeddingSet) -> Result<GaussianStats, MetricsError> {
    if e.n() < 2 {
        return Err(MetricsError::TooFewSamples(e.n()));
    }
    let x = DMatrix::from_row_slice(e.n(), e.dim(), &e.vectors);
    let mean = DVector::from_iterator(e.dim(), x.column_iter().map(|c| c.sum() / e.n() as f64));
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }
    let c = centered.transpose() * &centered / (e.n() - 1) as f64;
    let cov = (&c + c.transpose()) * 0.5;
    GaussianStats::new(mean, cov)
}

/// Symmetric square root of a symmetric positive semi-definite matrix via
/// eigendecomposition. Negative eigenvalues (numerical noise) are clamped to 0.
pub fn matrix_sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    if !a.is_square() {
        return Err(MetricsError::InvalidArgument(format!(
            "{}x{} matrix is not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let asym = (a - a.transpose()).abs().max();
    if asym > SYMMETRY_TOL * a.abs().max().max(1.0) {
        return Err(MetricsError::NotSymmetric(asym));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Fréchet distance between two Gaussians:
/// `‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2 (Σ₁ Σ₂)^½)`.
///
/// The trace of `(Σ₁Σ₂)^½` equals that of the symmetric
/// `(Σ₁^½ Σ₂ Σ₁^½)^½`, which is what gets computed.
pub fn frechet_distance(g1: &GaussianStats, g2: &GaussianStats) -> Result<f64, MetricsError> {
    if g1.dim() != g2.dim() {
        return Err(MetricsError::DimensionMismatch {
            lhs: format!("dim {}", g1.dim()),
            rhs: format!("dim {}", g2.dim()),
        });
    }
    let diff = &g1.mean - &g2.mean;
    let s1 = matrix_sqrt_psd(&g1.cov)?;
    let inner = &s1 * &g2.cov * &s1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = matrix_sqrt_psd(&inner)?.trace();
    let d = diff.dot(&diff) + g1.cov.trace() + g2.cov.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

/// Fixed random projection of flattened images to a low-dimensional space.
///
/// Scores computed with it are internally consistent but not comparable to
/// FID values from an Inception network.
#[derive(Clone, Debug)]
pub struct ToyEmbedder {
    input_dim: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl ToyEmbedder {
    pub const LABEL: &'static str = "toy-random-projection-64";
    pub const DIM: usize = 64;
    pub const SEED: u64 = 0x5eed_f1d0;

    pub fn new(input_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(Self::SEED ^ input_dim as u64);
        let scale = 1.0 / (input_dim as f64).sqrt();
        let weights = (0..input_dim * Self::DIM)
            .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>();
        Self {
            input_dim,
            dim: Self::DIM,
            weights,
        }
    }

    pub fn embed(&self, img: &ImageTensor) -> Result<Vec<f64>, MetricsError> {
        let x = img.data();
        if x.len() != self.input_dim {
            return Err(MetricsError::DimensionMismatch {
                lhs: format!("embedder input {}", self.input_dim),
                rhs: format!("image {}", x.len()),
            });
        }
        Ok((0..self.dim)
            .map(|j| {
                let w = &self.weights[j * self.input_dim..(j + 1) * self.input_dim];
                w.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    pub fn embed_all(&self, imgs: &[ImageTensor]) -> Result<EmbeddingSet, MetricsError> {
        let rows = imgs
            .iter()
            .map(|i| self.embed(i))
            .collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return EmbeddingSet::new(0, self.dim, Vec::new());
        }
        EmbeddingSet::from_rows(&rows)
    }
}
