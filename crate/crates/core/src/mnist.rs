//! IDX (MNIST) image and label files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::snn::Image;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data("truncated IDX header".into()))
}

pub fn parse_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Data(format!("bad IDX image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * size {
        return Err(Error::Data(format!(
            "IDX image body has {} bytes, header promises {count} x {rows} x {cols}",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| Image {
            width: cols,
            height: rows,
            pixels: px.iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
        .collect())
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Data(format!("bad IDX label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Data(format!("IDX label body has {} bytes, header promises {count}", body.len())));
    }
    Ok(body.to_vec())
}

/// Serializes images (intensities rounded back to bytes) in IDX format.
pub fn encode_images(images: &[Image]) -> Vec<u8> {
    let (rows, cols) = images.first().map_or((0, 0), |i| (i.height, i.width));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for word in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        out.extend(img.pixels.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Labelled images.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn load(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| {
            fs::read(p).map_err(|e| Error::Data(format!("cannot read {}: {e}", p.display())))
        };
        let images = parse_images(&read(images.as_ref())?)?;
        let labels = parse_labels(&read(labels.as_ref())?)?;
        if images.len() != labels.len() {
            return Err(Error::Data(format!("{} images but {} labels", images.len(), labels.len())));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keeps only instances whose label is in `digits`, preserving order.
    pub fn filter_digits(&self, digits: &[u8]) -> Self {
        let (images, labels) = self
            .images
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| digits.contains(l))
            .map(|(i, &l)| (i.clone(), l))
            .unzip();
        Self { images, labels }
    }

    /// Splits off the last `fraction` of the instances.
    pub fn split_tail(mut self, fraction: f64) -> (Self, Self) {
        let tail = ((self.len() as f64) * fraction).round() as usize;
        let at = self.len() - tail.min(self.len());
        let images = self.images.split_off(at);
        let labels = self.labels.split_off(at);
        (self, Self { images, labels })
    }

    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        self.labels.truncate(n);
    }
}

/// The standard four-file MNIST layout in one directory.
#[derive(Clone, Debug)]
pub struct MnistDir(pub PathBuf);

impl MnistDir {
    pub fn train(&self) -> Result<Dataset> {
        Dataset::load(self.0.join("train-images-idx3-ubyte"), self.0.join("train-labels-idx1-ubyte"))
    }

    pub fn test(&self) -> Result<Dataset> {
        Dataset::load(self.0.join("t10k-images-idx3-ubyte"), self.0.join("t10k-labels-idx1-ubyte"))
    }

    /// `$BSNN_MNIST_DIR`, else `data/mnist` under the current directory or any ancestor.
    pub fn locate() -> Option<Self> {
        if let Some(dir) = std::env::var_os("BSNN_MNIST_DIR") {
            return Some(Self(dir.into()));
        }
        let cwd = std::env::current_dir().ok()?;
        cwd.ancestors()
            .map(|a| a.join("data").join("mnist"))
            .find(|d| d.join("t10k-images-idx3-ubyte").exists())
            .map(Self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_small_files() {
        let imgs = vec![
            Image::new(2, 3, vec![0.0, 1.0, 0.5, 0.2, 0.0, 1.0]).unwrap(),
            Image::new(2, 3, vec![1.0; 6]).unwrap(),
        ];
        let bytes = encode_images(&imgs);
        assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        let back = parse_images(&bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!((back[0].width, back[0].height), (2, 3));
        assert!((back[0].pixels[2] - 128.0 / 255.0).abs() < 1e-12);
        let labels = encode_labels(&[1, 5, 9]);
        assert_eq!(&labels[..4], &[0, 0, 8, 1]);
        assert_eq!(parse_labels(&labels).unwrap(), vec![1, 5, 9]);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let labels = encode_labels(&[1, 2]);
        assert!(parse_images(&labels).is_err());
        let imgs = encode_images(&[Image::blank(2, 2)]);
        assert!(parse_labels(&imgs).is_err());
        assert!(parse_images(&imgs[..imgs.len() - 1]).is_err());
        assert!(parse_labels(&[0, 0]).is_err());
    }

    #[test]
    fn filtering_and_split() {
        let ds = Dataset {
            images: (0..10).map(|_| Image::blank(1, 1)).collect(),
            labels: vec![0, 1, 5, 9, 1, 2, 5, 9, 9, 3],
        };
        let f = ds.filter_digits(&[1, 5, 9]);
        assert_eq!(f.labels, vec![1, 5, 9, 1, 5, 9, 9]);
        let (train, val) = f.split_tail(0.3);
        assert_eq!(train.len(), 5);
        assert_eq!(val.labels, vec![9, 9]);
    }
}
