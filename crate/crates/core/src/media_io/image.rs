use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use super::MediaError;

/// `height × width × channels` image, row-major with interleaved channels,
/// values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, MediaError> {
        if channels != 1 && channels != 3 {
            return Err(MediaError::InvalidImage(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if height * width * channels != data.len() {
            return Err(MediaError::InvalidImage(format!(
                "{height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MediaError::InvalidImage(format!(
                "value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
    ) -> Result<Self, MediaError> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a row-major `height × width` plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), MediaError> {
        let px: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let img = if self.channels == 3 {
            DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, px).unwrap())
        } else {
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, px).unwrap())
        };
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Reads an 8-bit RGB or grayscale raster image, scaling values by 1/255.
pub fn load_frame(path: impl AsRef<Path>) -> Result<ImageTensor, MediaError> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| MediaError::Unreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, raw) = match img {
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        other => {
            return Err(MediaError::UnsupportedFormat {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    let data = raw.into_iter().map(|v| v as f64 / 255.0).collect();
    ImageTensor::new(h, w, channels, data)
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn full(img: &ImageTensor) -> Self {
        Self {
            x: 0,
            y: 0,
            w: img.width(),
            h: img.height(),
        }
    }
}

/// Crops `bbox` out of `img` and resamples it to `size × size` with
/// bilinear interpolation on half-pixel-centered sample positions.
pub fn crop_and_resize(
    img: &ImageTensor,
    bbox: BoundingBox,
    size: usize,
) -> Result<ImageTensor, MediaError> {
    if bbox.w < 2 || bbox.h < 2 {
        return Err(MediaError::DegenerateBox(bbox));
    }
    if bbox.x + bbox.w > img.width() || bbox.y + bbox.h > img.height() {
        return Err(MediaError::BoxOutOfBounds {
            bbox,
            width: img.width(),
            height: img.height(),
        });
    }
    if size < 2 {
        return Err(MediaError::InvalidImage(format!("output size {size} < 2")));
    }
    let c = img.channels();
    let sample_axis = |i: usize, src_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / size as f64;
        let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, pos - i0 as f64)
    };
    let xs: Vec<_> = (0..size).map(|j| sample_axis(j, bbox.w)).collect();
    let mut data = Vec::with_capacity(size * size * c);
    for i in 0..size {
        let (y0, y1, fy) = sample_axis(i, bbox.h);
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |y: usize, x: usize| img.get(bbox.y + y, bbox.x + x, ch);
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                data.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(size, size, c, data)
}
