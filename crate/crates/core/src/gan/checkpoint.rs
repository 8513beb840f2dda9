//! `CKPT` files: `u32` tensor count, then per tensor a `u32` name length,
//! the UTF-8 name, `u32` rank, `u32` dims and `f32` data, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;

use super::model::{Activation, Mlp, ToyDiscriminator, ToyGenerator, LEAKY_SLOPE};
use super::GanError;

const MAGIC: &[u8; 4] = b"CKPT";

type ImageDims = (usize, usize, usize);
type AudioDims = (usize, usize);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
}

fn bad(msg: impl Into<String>) -> GanError {
    GanError::Checkpoint(msg.into())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, GanError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> Result<(), GanError> {
    w.write_all(MAGIC)?;
    w.write_all(&(ck.tensors.len() as u32).to_le_bytes())?;
    for (name, t) in &ck.tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, GanError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("missing CKPT header"));
    }
    let count = read_u32(&mut r)?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.push((name, Tensor::new(shape, data)?));
    }
    Ok(Checkpoint { tensors })
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GanError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_checkpoint(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GanError> {
        read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn require(&self, name: &str) -> Result<&Tensor, GanError> {
        self.get(name)
            .ok_or_else(|| bad(format!("missing tensor {name}")))
    }

    fn dims(&self, name: &str, len: usize) -> Result<Vec<usize>, GanError> {
        let t = self.require(name)?;
        if t.numel() != len {
            return Err(bad(format!(
                "{name} holds {} values, expected {len}",
                t.numel()
            )));
        }
        Ok(t.data().iter().map(|&v| v as usize).collect())
    }

    fn push_mlp(&mut self, prefix: &str, net: &Mlp) {
        for (l, pair) in net.params.chunks(2).enumerate() {
            self.tensors
                .push((format!("{prefix}.fc{}.w", l + 1), pair[0].clone()));
            self.tensors
                .push((format!("{prefix}.fc{}.b", l + 1), pair[1].clone()));
        }
    }

    fn mlp(&self, prefix: &str, activation: Activation) -> Result<Mlp, GanError> {
        let mut params = Vec::new();
        let mut sizes = Vec::new();
        for l in 1.. {
            let Some(w) = self.get(&format!("{prefix}.fc{l}.w")) else {
                break;
            };
            let b = self.require(&format!("{prefix}.fc{l}.b"))?;
            let (i, o) = w
                .dims2()
                .ok_or_else(|| bad(format!("{prefix}.fc{l}.w is not a matrix")))?;
            if sizes.is_empty() {
                sizes.push(i);
            }
            sizes.push(o);
            params.push(w.clone());
            params.push(b.clone());
        }
        if params.is_empty() {
            return Err(bad(format!("no {prefix} layers")));
        }
        Mlp::from_params(&sizes, activation, params)
    }

    pub fn from_models(g: &ToyGenerator, d: &ToyDiscriminator) -> Self {
        let mut ck = Self::default();
        let (h, w, c) = g.image_dims;
        let meta = |v: Vec<f64>| Tensor::new(vec![v.len()], v).expect("sized");
        ck.tensors.push((
            "meta.image".into(),
            meta(vec![h as f64, w as f64, c as f64]),
        ));
        ck.tensors.push((
            "meta.audio".into(),
            meta(vec![g.audio_dims.0 as f64, g.audio_dims.1 as f64]),
        ));
        ck.tensors
            .push(("meta.noise".into(), meta(vec![g.noise_dim as f64])));
        ck.tensors
            .push(("meta.log_floor".into(), meta(vec![g.log_floor])));
        ck.push_mlp("G", &g.net);
        ck.push_mlp("D", &d.net);
        ck
    }

    fn image_audio(&self) -> Result<(ImageDims, AudioDims), GanError> {
        let im = self.dims("meta.image", 3)?;
        let au = self.dims("meta.audio", 2)?;
        Ok(((im[0], im[1], im[2]), (au[0], au[1])))
    }

    pub fn generator(&self) -> Result<ToyGenerator, GanError> {
        let (image_dims, audio_dims) = self.image_audio()?;
        let noise_dim = self.dims("meta.noise", 1)?[0];
        let log_floor = self.require("meta.log_floor")?.data()[0];
        let net = self.mlp("G", Activation::Relu)?;
        let d = image_dims.0 * image_dims.1 * image_dims.2;
        let expected_in = d + audio_dims.0 * audio_dims.1 + noise_dim;
        if net.input_dim() != expected_in || net.sizes.last() != Some(&d) {
            return Err(bad(format!(
                "generator layers {:?} do not fit image {image_dims:?} and audio {audio_dims:?}",
                net.sizes
            )));
        }
        Ok(ToyGenerator {
            image_dims,
            audio_dims,
            noise_dim,
            log_floor,
            net,
        })
    }

    pub fn discriminator(&self) -> Result<ToyDiscriminator, GanError> {
        let (image_dims, audio_dims) = self.image_audio()?;
        let net = self.mlp("D", Activation::LeakyRelu(LEAKY_SLOPE))?;
        let expected_in = image_dims.0 * image_dims.1 * image_dims.2 + audio_dims.0 * audio_dims.1;
        if net.input_dim() != expected_in || net.sizes.last() != Some(&1) {
            return Err(bad(format!(
                "discriminator layers {:?} do not fit the data",
                net.sizes
            )));
        }
        Ok(ToyDiscriminator {
            image_dims,
            audio_dims,
            net,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = ToyGenerator::new((8, 8, 3), (4, 3), 0, 12, -11.5, &mut rng);
        let d = ToyDiscriminator::new((8, 8, 3), (4, 3), 10, &mut rng);
        let ck = Checkpoint::from_models(&g, &d);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ck).unwrap();
        assert_eq!(&buf[..4], b"CKPT");
        assert_eq!(
            u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize,
            ck.tensors.len()
        );
        let back = read_checkpoint(&buf[..]).unwrap();
        let g2 = back.generator().unwrap();
        let d2 = back.discriminator().unwrap();
        assert_eq!(g2.image_dims, g.image_dims);
        assert_eq!(g2.net.sizes, g.net.sizes);
        assert_eq!(d2.net.sizes, d.net.sizes);
        for (a, b) in g.net.params.iter().zip(&g2.net.params) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
    }

    #[test]
    fn corrupt_rejected() {
        assert!(read_checkpoint(&b"NOPE\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        let ck = Checkpoint {
            tensors: vec![("x".into(), Tensor::zeros(&[2, 2]))],
        };
        write_checkpoint(&mut buf, &ck).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(&buf[..]).is_err());
        assert!(ck.generator().is_err());
    }
}
