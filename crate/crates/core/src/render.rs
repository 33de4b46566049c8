//! Binary PPM/PGM pictures of explanations and attributions.
//!
//! Colours: black background, green for pixels wired to the hidden layer,
//! red and yellow for positive and negative literals of a term, purple for
//! pixels a Shapley audit flags as relevant.

use crate::axp::ExplanationRecord;
use crate::error::{Error, Result};
use crate::shap::AttributionReport;

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [0, 0, 0];
pub const CONNECTED: Rgb = [0, 160, 0];
pub const POSITIVE: Rgb = [230, 0, 0];
pub const NEGATIVE: Rgb = [240, 220, 0];
pub const RELEVANT: Rgb = [150, 0, 200];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![BACKGROUND; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    /// Nearest-neighbour enlargement by an integer factor.
    pub fn scaled(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let mut out = Canvas::new(self.width * factor, self.height * factor);
        for y in 0..out.height {
            for x in 0..out.width {
                out.set(x, y, self.get(x / factor, y / factor));
            }
        }
        out
    }

    /// P6 encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let (header, body) = split_header(bytes, "P6")?;
        let (width, height) = header;
        if body.len() != width * height * 3 {
            return Err(Error::Data(format!("PPM body has {} bytes, expected {}", body.len(), width * height * 3)));
        }
        let pixels = body.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self { width, height, pixels })
    }
}

/// Parses `magic w h 255` followed by one whitespace byte.
fn split_header<'a>(bytes: &'a [u8], magic: &str) -> Result<((usize, usize), &'a [u8])> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Data("truncated image header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != magic || fields[3] != "255" {
        return Err(Error::Data(format!("expected a {magic} image with maxval 255")));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Data(format!("bad image dimension {s:?}")));
    Ok(((parse(&fields[1])?, parse(&fields[2])?), &bytes[(pos + 1).min(bytes.len())..]))
}

fn connectivity_canvas(connected: &[bool], width: usize) -> Result<Canvas> {
    if width == 0 || !connected.len().is_multiple_of(width) {
        return Err(Error::DimensionMismatch(format!("{} pixels do not form rows of width {width}", connected.len())));
    }
    let mut c = Canvas::new(width, connected.len() / width);
    for (i, _) in connected.iter().enumerate().filter(|(_, &k)| k) {
        c.set(i % width, i / width, CONNECTED);
    }
    Ok(c)
}

/// Connected pixels in green, the term's literals in red or yellow.
pub fn explanation_image(record: &ExplanationRecord, connected: &[bool]) -> Result<Canvas> {
    if connected.len() != record.width * record.height {
        return Err(Error::DimensionMismatch(format!(
            "connectivity mask has {} pixels, explanation is {}x{}",
            connected.len(),
            record.width,
            record.height
        )));
    }
    let mut c = connectivity_canvas(connected, record.width)?;
    for l in &record.literals {
        if l.x >= record.width || l.y >= record.height {
            return Err(Error::Data(format!("literal at ({}, {}) lies outside the image", l.x, l.y)));
        }
        c.set(l.x, l.y, if l.polarity { POSITIVE } else { NEGATIVE });
    }
    Ok(c)
}

/// Connected pixels in green, flagged pixels in purple.
pub fn attribution_image(report: &AttributionReport, connected: &[bool], width: usize) -> Result<Canvas> {
    if connected.len() != report.scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "connectivity mask has {} pixels, report has {} scores",
            connected.len(),
            report.scores.len()
        )));
    }
    let mut c = connectivity_canvas(connected, width)?;
    for &i in &report.relevant {
        if i >= connected.len() {
            return Err(Error::Data(format!("relevant pixel {i} out of range")));
        }
        c.set(i % width, i / width, RELEVANT);
    }
    Ok(c)
}

/// P5 picture of one spike frame: white where a pixel fired.
pub fn spike_pgm(frame: &[bool], width: usize) -> Result<Vec<u8>> {
    if width == 0 || !frame.len().is_multiple_of(width) {
        return Err(Error::DimensionMismatch(format!("{} pixels do not form rows of width {width}", frame.len())));
    }
    let mut out = format!("P5\n{} {}\n255\n", width, frame.len() / width).into_bytes();
    out.extend(frame.iter().map(|&f| if f { 255u8 } else { 0 }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axp::{Certificates, Explanandum, LiteralRecord};
    use crate::solver::Backend;

    fn record(literals: Vec<LiteralRecord>) -> ExplanationRecord {
        ExplanationRecord {
            t: 1,
            literals,
            certificates: Certificates { i: true, ii: true, iii: true },
            backend: Backend::Cnf,
            order_seed: None,
            solver_calls: 0,
            wall_time_ms: 0,
            explanandum: Explanandum { time: 1, positive: vec![], negative: vec![0] },
            width: 3,
            height: 2,
            input: vec!["000000".into()],
        }
    }

    #[test]
    fn colours_and_geometry() {
        let r = record(vec![
            LiteralRecord { x: 0, y: 0, time: 1, polarity: true },
            LiteralRecord { x: 2, y: 1, time: 1, polarity: false },
        ]);
        let connected = [true, true, false, false, false, true];
        let c = explanation_image(&r, &connected).unwrap();
        assert_eq!((c.width(), c.height()), (3, 2));
        assert_eq!(c.get(0, 0), POSITIVE);
        assert_eq!(c.get(1, 0), CONNECTED);
        assert_eq!(c.get(2, 0), BACKGROUND);
        assert_eq!(c.get(2, 1), NEGATIVE);
        let ppm = c.to_ppm();
        assert!(ppm.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(ppm.len(), 11 + 18);
        assert_eq!(Canvas::from_ppm(&ppm).unwrap(), c);
    }

    #[test]
    fn empty_term_shows_only_the_mask() {
        let connected = [false, true, false, true, false, true];
        let c = explanation_image(&record(vec![]), &connected).unwrap();
        for i in 0..6 {
            assert_eq!(c.get(i % 3, i / 3), if connected[i] { CONNECTED } else { BACKGROUND });
        }
    }

    #[test]
    fn scaling() {
        let mut c = Canvas::new(2, 1);
        c.set(1, 0, RELEVANT);
        let s = c.scaled(3);
        assert_eq!((s.width(), s.height()), (6, 3));
        assert_eq!(s.get(5, 2), RELEVANT);
        assert_eq!(s.get(2, 2), BACKGROUND);
    }

    #[test]
    fn pgm_frame() {
        let p = spike_pgm(&[true, false], 2).unwrap();
        assert_eq!(p, b"P5\n2 1\n255\n\xff\x00".to_vec());
        assert!(spike_pgm(&[true, false, true], 2).is_err());
    }
}
