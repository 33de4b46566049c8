//! Binary/ternary-weight integrate-and-fire networks.
//!
//! A network has one fully connected hidden layer between the input
//! neurons (one per pixel) and the output neurons (one per class). All
//! weights are small integers from the network's [`WeightScale`] and every
//! non-input neuron has an integer firing threshold, so the dynamics are
//! simulated exactly over the integers.

mod encode;
mod simulate;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{poisson_encode, poisson_encode_stream, threshold_encode, Image, SpikeEncoding};
pub use simulate::{classify, simulate, DynamicsTrace, InputSequence, TraceStep};
pub(crate) use simulate::{bitmap, parse_bitmap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Input,
    Hidden,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: Layer,
    pub index: usize,
}

impl NeuronId {
    pub const fn input(index: usize) -> Self {
        Self { layer: Layer::Input, index }
    }

    pub const fn hidden(index: usize) -> Self {
        Self { layer: Layer::Hidden, index }
    }

    pub const fn output(index: usize) -> Self {
        Self { layer: Layer::Output, index }
    }

    pub fn is_input(&self) -> bool {
        self.layer == Layer::Input
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.layer {
            Layer::Input => 'i',
            Layer::Hidden => 'h',
            Layer::Output => 'o',
        };
        write!(f, "{tag}{}", self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScale {
    /// `{0, 1}`
    Binary,
    /// `{-1, 0, 1}`
    Ternary,
}

impl WeightScale {
    pub fn contains(self, w: i8) -> bool {
        match self {
            WeightScale::Binary => w == 0 || w == 1,
            WeightScale::Ternary => (-1..=1).contains(&w),
        }
    }

    /// Deploys a full-precision proxy weight onto this scale.
    pub fn quantize(self, w: f64) -> Result<i8> {
        match self {
            WeightScale::Binary => quantize_binary(w),
            WeightScale::Ternary => quantize_ternary(w),
        }
    }
}

impl fmt::Display for WeightScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScale::Binary => "binary",
            WeightScale::Ternary => "ternary",
        })
    }
}

fn check_finite(w: f64) -> Result<()> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("cannot quantize non-finite weight {w}")))
    }
}

/// `0` for `w <= 0`, `1` for `w > 0`.
pub fn quantize_binary(w: f64) -> Result<i8> {
    check_finite(w)?;
    Ok(if w == 0.0 { 0 } else { (quantize_ternary(w)? + 1) / 2 })
}

/// The sign of `w`, with `sign(0) = 0`.
pub fn quantize_ternary(w: f64) -> Result<i8> {
    check_finite(w)?;
    Ok(if w > 0.0 {
        1
    } else if w < 0.0 {
        -1
    } else {
        0
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub hidden: Vec<i32>,
    pub output: Vec<i32>,
}

/// A fully connected input → hidden → output network.
///
/// `hidden_weights[h][i]` is the weight of the edge from input `i` into
/// hidden neuron `h`; `output_weights[c][h]` likewise for output `c`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub weight_scale: WeightScale,
    pub input_count: usize,
    pub hidden_count: usize,
    pub output_count: usize,
    pub hidden_weights: Vec<Vec<i8>>,
    pub output_weights: Vec<Vec<i8>>,
    pub thresholds: Thresholds,
    /// Dataset label represented by each output neuron, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<Vec<u8>>,
}

impl Network {
    pub fn new(
        weight_scale: WeightScale,
        hidden_weights: Vec<Vec<i8>>,
        output_weights: Vec<Vec<i8>>,
        thresholds: Thresholds,
    ) -> Result<Self> {
        let hidden_count = hidden_weights.len();
        let input_count = hidden_weights.first().map_or(0, Vec::len);
        let output_count = output_weights.len();
        let net = Self {
            weight_scale,
            input_count,
            hidden_count,
            output_count,
            hidden_weights,
            output_weights,
            thresholds,
            class_labels: None,
        };
        net.validate()?;
        Ok(net)
    }

    /// A network of the given shape with every weight zero and every
    /// threshold equal to `threshold`.
    pub fn zeroed(
        weight_scale: WeightScale,
        input_count: usize,
        hidden_count: usize,
        output_count: usize,
        threshold: i32,
    ) -> Self {
        Self {
            weight_scale,
            input_count,
            hidden_count,
            output_count,
            hidden_weights: vec![vec![0; input_count]; hidden_count],
            output_weights: vec![vec![0; hidden_count]; output_count],
            thresholds: Thresholds {
                hidden: vec![threshold; hidden_count],
                output: vec![threshold; output_count],
            },
            class_labels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if self.input_count == 0 || self.hidden_count == 0 || self.output_count == 0 {
            return bad("every layer needs at least one neuron".into());
        }
        if self.hidden_weights.len() != self.hidden_count {
            return bad(format!(
                "hidden_weights has {} rows, expected {}",
                self.hidden_weights.len(),
                self.hidden_count
            ));
        }
        if self.output_weights.len() != self.output_count {
            return bad(format!(
                "output_weights has {} rows, expected {}",
                self.output_weights.len(),
                self.output_count
            ));
        }
        for (h, row) in self.hidden_weights.iter().enumerate() {
            if row.len() != self.input_count {
                return bad(format!("hidden_weights[{h}] has {} columns, expected {}", row.len(), self.input_count));
            }
        }
        for (c, row) in self.output_weights.iter().enumerate() {
            if row.len() != self.hidden_count {
                return bad(format!("output_weights[{c}] has {} columns, expected {}", row.len(), self.hidden_count));
            }
        }
        let all = self.hidden_weights.iter().chain(&self.output_weights).flatten();
        if let Some(w) = all.copied().find(|&w| !self.weight_scale.contains(w)) {
            return bad(format!("weight {w} outside the {} scale", self.weight_scale));
        }
        if self.thresholds.hidden.len() != self.hidden_count || self.thresholds.output.len() != self.output_count {
            return bad("one threshold per hidden and output neuron required".into());
        }
        if let Some(labels) = &self.class_labels {
            if labels.len() != self.output_count {
                return bad(format!("{} class labels for {} outputs", labels.len(), self.output_count));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Threshold of a non-input neuron.
    pub fn threshold(&self, neuron: NeuronId) -> i32 {
        match neuron.layer {
            Layer::Input => panic!("input neuron {neuron} has no threshold"),
            Layer::Hidden => self.thresholds.hidden[neuron.index],
            Layer::Output => self.thresholds.output[neuron.index],
        }
    }

    /// Every non-input neuron in layer order.
    pub fn non_input_neurons(&self) -> impl Iterator<Item = NeuronId> + '_ {
        (0..self.hidden_count)
            .map(NeuronId::hidden)
            .chain((0..self.output_count).map(NeuronId::output))
    }

    /// Non-zero incoming edges `(predecessor, weight)` of a non-input neuron.
    pub fn incoming(&self, neuron: NeuronId) -> Vec<(NeuronId, i8)> {
        let (row, pred): (&[i8], fn(usize) -> NeuronId) = match neuron.layer {
            Layer::Input => return Vec::new(),
            Layer::Hidden => (&self.hidden_weights[neuron.index], NeuronId::input),
            Layer::Output => (&self.output_weights[neuron.index], NeuronId::hidden),
        };
        row.iter()
            .enumerate()
            .filter(|(_, &w)| w != 0)
            .map(|(j, &w)| (pred(j), w))
            .collect()
    }

    /// Predecessors with weight `+1`.
    pub fn excitatory(&self, neuron: NeuronId) -> Vec<NeuronId> {
        self.incoming(neuron).into_iter().filter(|&(_, w)| w == 1).map(|(x, _)| x).collect()
    }

    /// Predecessors with weight `-1`.
    pub fn inhibitory(&self, neuron: NeuronId) -> Vec<NeuronId> {
        self.incoming(neuron).into_iter().filter(|&(_, w)| w == -1).map(|(x, _)| x).collect()
    }

    /// Number of non-zero incoming edges.
    pub fn fan_in(&self, neuron: NeuronId) -> usize {
        self.incoming(neuron).len()
    }

    /// Whether each input feature has a non-zero edge into the hidden layer.
    pub fn connected_inputs(&self) -> Vec<bool> {
        (0..self.input_count)
            .map(|i| self.hidden_weights.iter().any(|row| row[i] != 0))
            .collect()
    }

    pub fn label_of(&self, class: usize) -> Option<u8> {
        self.class_labels.as_ref().map(|l| l[class])
    }

    pub fn class_of_label(&self, label: u8) -> Option<usize> {
        match &self.class_labels {
            Some(labels) => labels.iter().position(|&l| l == label),
            None => Some(label as usize).filter(|&c| c < self.output_count),
        }
    }
}
