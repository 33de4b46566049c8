//! Image to spike-train encoders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InputSequence;
use crate::error::{Error, Result};

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![0.0; width * height] }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    fn check_intensities(&self) -> Result<()> {
        match self.pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            Some(i) => Err(Error::InvalidArgument(format!(
                "pixel {i} has intensity {} outside [0, 1]",
                self.pixels[i]
            ))),
            None => Ok(()),
        }
    }
}

/// How images become input spike sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpikeEncoding {
    /// Each pixel spikes independently per step with probability equal
    /// to its intensity.
    Poisson { t_end: usize },
    /// One step; a pixel spikes iff its intensity exceeds `theta`.
    Thresholded { theta: f64 },
}

impl SpikeEncoding {
    pub const DEFAULT_THETA: f64 = 0.5;

    pub fn thresholded() -> Self {
        SpikeEncoding::Thresholded { theta: Self::DEFAULT_THETA }
    }

    pub fn t_end(&self) -> usize {
        match *self {
            SpikeEncoding::Poisson { t_end } => t_end,
            SpikeEncoding::Thresholded { .. } => 1,
        }
    }

    /// Encodes the `index`-th instance of a dataset. Poisson draws come
    /// from an independent stream per `(seed, index)`.
    pub fn encode(&self, img: &Image, seed: u64, index: u64) -> Result<InputSequence> {
        match *self {
            SpikeEncoding::Poisson { t_end } => poisson_encode_stream(img, t_end, seed, index),
            SpikeEncoding::Thresholded { theta } => threshold_encode(img, theta),
        }
    }
}

/// Poisson rate coding on stream 0 of `seed`.
pub fn poisson_encode(img: &Image, t_end: usize, seed: u64) -> Result<InputSequence> {
    poisson_encode_stream(img, t_end, seed, 0)
}

/// Poisson rate coding on an explicit ChaCha stream, so instance `k` of a
/// batch gets the same spikes regardless of scheduling.
pub fn poisson_encode_stream(img: &Image, t_end: usize, seed: u64, stream: u64) -> Result<InputSequence> {
    if t_end == 0 {
        return Err(Error::InvalidArgument("Poisson encoding needs t_end >= 1".into()));
    }
    img.check_intensities()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let spikes = (0..t_end)
        .map(|_| img.pixels.iter().map(|&p| rng.gen::<f64>() < p).collect())
        .collect();
    Ok(InputSequence::new(img.len(), spikes))
}

/// Single-step binarization: spike iff `intensity > theta`.
pub fn threshold_encode(img: &Image, theta: f64) -> Result<InputSequence> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {theta} outside (0, 1)")));
    }
    img.check_intensities()?;
    let row = img.pixels.iter().map(|&p| p > theta).collect();
    Ok(InputSequence::new(img.len(), vec![row]))
}
