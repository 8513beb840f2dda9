use rand::Rng;

use crate::autodiff::{Tape, Tensor, Value};
use crate::media_io::ImageTensor;
use crate::melspec::MelSpectrogram;

use super::GanError;

/// Scores a batch of `(face, audio)` rows, one `[N, 1]` column of logits or
/// critic values.
pub trait Critic {
    fn score(&self, faces: &Value, audio: &Value) -> Result<Value, GanError>;
}

impl<F> Critic for F
where
    F: Fn(&Value, &Value) -> Result<Value, GanError>,
{
    fn score(&self, faces: &Value, audio: &Value) -> Result<Value, GanError> {
        self(faces, audio)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
}

/// Fully connected network; `params` alternate weight `[in, out]` and bias
/// `[1, out]` per layer. Hidden layers use `activation`, the last is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<Tensor>,
}

impl Mlp {
    /// Uniform init in `±1/√fan_in` for weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            };
            let weight = draw(fan_in * fan_out);
            let bias = draw(fan_out);
            params.push(Tensor::matrix(fan_in, fan_out, weight).expect("sized"));
            params.push(Tensor::matrix(1, fan_out, bias).expect("sized"));
        }
        Self {
            sizes: sizes.to_vec(),
            activation,
            params,
        }
    }

    pub fn from_params(
        sizes: &[usize],
        activation: Activation,
        params: Vec<Tensor>,
    ) -> Result<Self, GanError> {
        if sizes.len() < 2 || params.len() != 2 * (sizes.len() - 1) {
            return Err(GanError::Shape(format!(
                "{} tensors for layer sizes {sizes:?}",
                params.len()
            )));
        }
        for (l, w) in sizes.windows(2).enumerate() {
            let (pw, pb) = (&params[2 * l], &params[2 * l + 1]);
            if pw.shape() != [w[0], w[1]] || pb.shape() != [1, w[1]] {
                return Err(GanError::Shape(format!(
                    "layer {l}: weight {:?}, bias {:?}, expected [{}, {}]",
                    pw.shape(),
                    pb.shape(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Parameter tensors as leaves of `tape`.
    pub fn bind(&self, tape: &Tape) -> Vec<Value> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// Names of the layer kinds in evaluation order.
    pub fn layer_kinds(&self) -> Vec<&'static str> {
        let n = self.sizes.len() - 1;
        let mut kinds = Vec::new();
        for l in 0..n {
            kinds.push("dense");
            if l + 1 < n {
                kinds.push(match self.activation {
                    Activation::Relu => "relu",
                    Activation::LeakyRelu(_) => "leaky_relu",
                });
            }
        }
        kinds
    }

    pub fn forward(&self, params: &[Value], x: &Value) -> Result<Value, GanError> {
        let n = params.len() / 2;
        let mut h = x.clone();
        for l in 0..n {
            h = h.matmul(&params[2 * l])?.add_bias(&params[2 * l + 1])?;
            if l + 1 < n {
                h = match self.activation {
                    Activation::Relu => h.relu()?,
                    Activation::LeakyRelu(s) => h.leaky_relu(s)?,
                };
            }
        }
        Ok(h)
    }
}

/// Image in storage range `[0, 1]` to a training-range row in `[-1, 1]`.
pub fn face_row(img: &ImageTensor) -> Vec<f64> {
    img.data().iter().map(|v| 2.0 * v - 1.0).collect()
}

/// Log-mel window rescaled so the floor maps to 0 and 0 dB maps to 1.
pub fn audio_row(mel: &MelSpectrogram, log_floor: f64) -> Vec<f64> {
    let s = log_floor.abs();
    mel.data().iter().map(|v| (v - log_floor) / s).collect()
}

/// Largest magnitude fed to `atanh` for the reference skip connection.
const SKIP_CLAMP: f64 = 0.999;

/// Conditional generator `Ŝ = G(S′, A)`.
///
/// The hidden stack sees the reference frame, the audio window and optional
/// noise; its output is added to `atanh(S′)` before the final `tanh`, so an
/// all-zero network reproduces the reference frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyGenerator {
    pub image_dims: (usize, usize, usize),
    pub audio_dims: (usize, usize),
    pub noise_dim: usize,
    pub log_floor: f64,
    pub net: Mlp,
}

impl ToyGenerator {
    pub fn new<R: Rng + ?Sized>(
        image_dims: (usize, usize, usize),
        audio_dims: (usize, usize),
        noise_dim: usize,
        hidden: usize,
        log_floor: f64,
        rng: &mut R,
    ) -> Self {
        let d = image_dims.0 * image_dims.1 * image_dims.2;
        let a = audio_dims.0 * audio_dims.1;
        let net = Mlp::new(
            &[d + a + noise_dim, hidden, hidden, d],
            Activation::Relu,
            rng,
        );
        Self {
            image_dims,
            audio_dims,
            noise_dim,
            log_floor,
            net,
        }
    }

    pub fn face_dim(&self) -> usize {
        self.image_dims.0 * self.image_dims.1 * self.image_dims.2
    }

    pub fn audio_dim(&self) -> usize {
        self.audio_dims.0 * self.audio_dims.1
    }

    /// `reference` and the result are `[N, face_dim]` in `[-1, 1]`.
    pub fn forward(
        &self,
        params: &[Value],
        reference: &Value,
        audio: &Value,
        noise: Option<&Value>,
    ) -> Result<Value, GanError> {
        let tape = reference.tape();
        let mut parts = vec![reference, audio];
        if let Some(z) = noise {
            parts.push(z);
        }
        let x = Value::concat(&parts)?;
        if x.shape()[1] != self.net.input_dim() {
            return Err(GanError::Shape(format!(
                "generator expects {} input columns, got {}",
                self.net.input_dim(),
                x.shape()[1]
            )));
        }
        let skip = tape.leaf(
            reference
                .tensor()
                .map(|v| v.clamp(-SKIP_CLAMP, SKIP_CLAMP).atanh()),
        );
        Ok(self.net.forward(params, &x)?.add(&skip)?.tanh()?)
    }

    fn check_inputs(
        &self,
        reference: &ImageTensor,
        audio: &MelSpectrogram,
    ) -> Result<(), GanError> {
        if reference.dims() != self.image_dims {
            return Err(GanError::Shape(format!(
                "reference frame {:?}, generator expects {:?}",
                reference.dims(),
                self.image_dims
            )));
        }
        if (audio.n_mels(), audio.n_frames()) != self.audio_dims {
            return Err(GanError::Shape(format!(
                "audio window {}x{}, generator expects {:?}",
                audio.n_mels(),
                audio.n_frames(),
                self.audio_dims
            )));
        }
        Ok(())
    }

    /// Batched inference in storage range; noise, if any, is held at zero.
    pub fn generate_batch(
        &self,
        inputs: &[(&ImageTensor, &MelSpectrogram)],
    ) -> Result<Vec<ImageTensor>, GanError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let (d, a) = (self.face_dim(), self.audio_dim());
        let mut refs = Vec::with_capacity(inputs.len() * d);
        let mut mels = Vec::with_capacity(inputs.len() * a);
        for (r, m) in inputs {
            self.check_inputs(r, m)?;
            refs.extend(face_row(r));
            mels.extend(audio_row(m, self.log_floor));
        }
        let n = inputs.len();
        let tape = Tape::new();
        let params = self.net.bind(&tape);
        let r = tape.leaf(Tensor::matrix(n, d, refs)?);
        let m = tape.leaf(Tensor::matrix(n, a, mels)?);
        let z = (self.noise_dim > 0).then(|| tape.leaf(Tensor::zeros(&[n, self.noise_dim])));
        let out = self.forward(&params, &r, &m, z.as_ref())?;
        let (h, w, c) = self.image_dims;
        out.data()
            .chunks(d)
            .map(|row| {
                let px = row
                    .iter()
                    .map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0))
                    .collect();
                Ok(ImageTensor::new(h, w, c, px)?)
            })
            .collect()
    }
}

/// `Ŝ = G(S′, A)` in storage range `[0, 1]`.
pub fn generate(
    g: &ToyGenerator,
    reference: &ImageTensor,
    audio: &MelSpectrogram,
) -> Result<ImageTensor, GanError> {
    Ok(g.generate_batch(&[(reference, audio)])?.remove(0))
}

/// Conditional critic / discriminator on concatenated `(face, audio)` rows.
/// Dense layers and leaky ReLUs only: no batch statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDiscriminator {
    pub image_dims: (usize, usize, usize),
    pub audio_dims: (usize, usize),
    pub net: Mlp,
}

pub const LEAKY_SLOPE: f64 = 0.2;

impl ToyDiscriminator {
    pub fn new<R: Rng + ?Sized>(
        image_dims: (usize, usize, usize),
        audio_dims: (usize, usize),
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let d = image_dims.0 * image_dims.1 * image_dims.2 + audio_dims.0 * audio_dims.1;
        Self {
            image_dims,
            audio_dims,
            net: Mlp::new(
                &[d, hidden, hidden, 1],
                Activation::LeakyRelu(LEAKY_SLOPE),
                rng,
            ),
        }
    }

    /// A [`Critic`] over parameters bound to `tape`.
    pub fn bind(&self, tape: &Tape) -> BoundCritic<'_> {
        BoundCritic {
            net: &self.net,
            params: self.net.bind(tape),
        }
    }
}

pub struct BoundCritic<'a> {
    net: &'a Mlp,
    pub params: Vec<Value>,
}

impl Critic for BoundCritic<'_> {
    fn score(&self, faces: &Value, audio: &Value) -> Result<Value, GanError> {
        let x = Value::concat(&[faces, audio])?;
        self.net.forward(&self.params, &x)
    }
}
