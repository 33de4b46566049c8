//! Exact integer integrate-and-fire dynamics with hard reset and no leak.

use serde::{Deserialize, Serialize};

use super::{Layer, Network, NeuronId};
use crate::error::{Error, Result};

/// Input spikes for times `1..=t_end`; time 0 is silent by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSequence {
    input_count: usize,
    /// `spikes[t - 1][i]`
    spikes: Vec<Vec<bool>>,
}

impl InputSequence {
    pub fn new(input_count: usize, spikes: Vec<Vec<bool>>) -> Self {
        assert!(spikes.iter().all(|r| r.len() == input_count), "ragged input sequence");
        Self { input_count, spikes }
    }

    pub fn silent(input_count: usize, t_end: usize) -> Self {
        Self::new(input_count, vec![vec![false; input_count]; t_end])
    }

    pub fn t_end(&self) -> usize {
        self.spikes.len()
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn fires(&self, t: usize, input: usize) -> bool {
        t > 0 && self.spikes[t - 1][input]
    }

    /// Spikes at time `t`; all false at `t = 0`.
    pub fn row(&self, t: usize) -> Vec<bool> {
        if t == 0 {
            vec![false; self.input_count]
        } else {
            self.spikes[t - 1].clone()
        }
    }

    pub fn set(&mut self, t: usize, input: usize, value: bool) {
        assert!(t > 0, "time-0 inputs are fixed silent");
        self.spikes[t - 1][input] = value;
    }

    /// Copy with every spike of the unmasked inputs removed.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let spikes = self
            .spikes
            .iter()
            .map(|row| row.iter().zip(keep).map(|(&s, &k)| s && k).collect())
            .collect();
        Self { input_count: self.input_count, spikes }
    }
}

/// Firing bits and membrane potentials of every neuron at times `0..=t_end`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicsTrace {
    pub input: InputSequence,
    /// `hidden_firing[t][h]`
    pub hidden_firing: Vec<Vec<bool>>,
    pub output_firing: Vec<Vec<bool>>,
    pub hidden_potential: Vec<Vec<i32>>,
    pub output_potential: Vec<Vec<i32>>,
}

impl DynamicsTrace {
    pub fn t_end(&self) -> usize {
        self.hidden_firing.len() - 1
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_firing[0].len()
    }

    pub fn output_count(&self) -> usize {
        self.output_firing[0].len()
    }

    pub fn firing(&self, t: usize, neuron: NeuronId) -> bool {
        match neuron.layer {
            Layer::Input => self.input.fires(t, neuron.index),
            Layer::Hidden => self.hidden_firing[t][neuron.index],
            Layer::Output => self.output_firing[t][neuron.index],
        }
    }

    pub fn set_firing(&mut self, t: usize, neuron: NeuronId, value: bool) {
        match neuron.layer {
            Layer::Input => self.input.set(t, neuron.index, value),
            Layer::Hidden => self.hidden_firing[t][neuron.index] = value,
            Layer::Output => self.output_firing[t][neuron.index] = value,
        }
    }

    /// Potential `A(X, t)`; input neurons are driven and have none.
    pub fn potential(&self, t: usize, neuron: NeuronId) -> Option<i32> {
        match neuron.layer {
            Layer::Input => None,
            Layer::Hidden => Some(self.hidden_potential[t][neuron.index]),
            Layer::Output => Some(self.output_potential[t][neuron.index]),
        }
    }

    /// Total spikes per output neuron over the whole run.
    pub fn output_counts(&self) -> Vec<usize> {
        (0..self.output_count())
            .map(|c| self.output_firing.iter().filter(|row| row[c]).count())
            .collect()
    }

    pub fn to_steps(&self) -> Vec<TraceStep> {
        (0..=self.t_end())
            .map(|t| TraceStep {
                t,
                input: bitmap(&self.input.row(t)),
                hidden: bitmap(&self.hidden_firing[t]),
                output: bitmap(&self.output_firing[t]),
                hidden_potential: self.hidden_potential[t].clone(),
                output_potential: self.output_potential[t].clone(),
            })
            .collect()
    }

    pub fn from_steps(steps: &[TraceStep]) -> Result<Self> {
        let first = steps.first().ok_or_else(|| Error::Data("empty trace".into()))?;
        let input_count = first.input.len();
        let mut spikes = Vec::new();
        let mut trace = DynamicsTrace {
            input: InputSequence::silent(input_count, 0),
            hidden_firing: Vec::new(),
            output_firing: Vec::new(),
            hidden_potential: Vec::new(),
            output_potential: Vec::new(),
        };
        for (t, step) in steps.iter().enumerate() {
            if step.t != t {
                return Err(Error::Data(format!("trace step {t} is labelled t = {}", step.t)));
            }
            let input = parse_bitmap(&step.input)?;
            let hidden = parse_bitmap(&step.hidden)?;
            let output = parse_bitmap(&step.output)?;
            if input.len() != input_count
                || hidden.len() != first.hidden.len()
                || output.len() != first.output.len()
                || step.hidden_potential.len() != hidden.len()
                || step.output_potential.len() != output.len()
            {
                return Err(Error::Data(format!("trace step {t} has inconsistent widths")));
            }
            if t == 0 {
                if input.iter().any(|&b| b) {
                    return Err(Error::Data("inputs fire at t = 0".into()));
                }
            } else {
                spikes.push(input);
            }
            trace.hidden_firing.push(hidden);
            trace.output_firing.push(output);
            trace.hidden_potential.push(step.hidden_potential.clone());
            trace.output_potential.push(step.output_potential.clone());
        }
        trace.input = InputSequence::new(input_count, spikes);
        Ok(trace)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_steps()).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let steps: Vec<TraceStep> = serde_json::from_str(text)?;
        Self::from_steps(&steps)
    }
}

/// One element of the exported trace array.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub input: String,
    pub hidden: String,
    pub output: String,
    pub hidden_potential: Vec<i32>,
    pub output_potential: Vec<i32>,
}

pub(crate) fn bitmap(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub(crate) fn parse_bitmap(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Data(format!("bad bitmap character {other:?}"))),
        })
        .collect()
}

/// One integrate-and-fire layer update: fold the incoming weighted spikes
/// into the carried potentials and fire wherever the threshold is reached.
fn step_layer(
    weights: &[Vec<i8>],
    thresholds: &[i32],
    spikes_in: &[bool],
    prev_potential: &[i32],
    prev_firing: &[bool],
    potential: &mut [i32],
    firing: &mut [bool],
) {
    for (x, row) in weights.iter().enumerate() {
        let carried = if prev_firing[x] { 0 } else { prev_potential[x] };
        let stimulus: i32 = row
            .iter()
            .zip(spikes_in)
            .filter(|(_, &s)| s)
            .map(|(&w, _)| i32::from(w))
            .sum();
        potential[x] = carried + stimulus;
        firing[x] = potential[x] >= thresholds[x];
    }
}

pub fn simulate(net: &Network, input: &InputSequence) -> Result<DynamicsTrace> {
    if input.input_count() != net.input_count {
        return Err(Error::DimensionMismatch(format!(
            "input sequence has {} neurons, network expects {}",
            input.input_count(),
            net.input_count
        )));
    }
    let t_end = input.t_end();
    let (nh, no) = (net.hidden_count, net.output_count);
    let mut trace = DynamicsTrace {
        input: input.clone(),
        hidden_firing: vec![vec![false; nh]; t_end + 1],
        output_firing: vec![vec![false; no]; t_end + 1],
        hidden_potential: vec![vec![0; nh]; t_end + 1],
        output_potential: vec![vec![0; no]; t_end + 1],
    };
    for t in 1..=t_end {
        let (hp_prev, hp_now) = trace.hidden_potential.split_at_mut(t);
        let (hf_prev, hf_now) = trace.hidden_firing.split_at_mut(t);
        step_layer(
            &net.hidden_weights,
            &net.thresholds.hidden,
            &input.spikes[t - 1],
            &hp_prev[t - 1],
            &hf_prev[t - 1],
            &mut hp_now[0],
            &mut hf_now[0],
        );
        let (op_prev, op_now) = trace.output_potential.split_at_mut(t);
        let (of_prev, of_now) = trace.output_firing.split_at_mut(t);
        step_layer(
            &net.output_weights,
            &net.thresholds.output,
            &hf_now[0],
            &op_prev[t - 1],
            &of_prev[t - 1],
            &mut op_now[0],
            &mut of_now[0],
        );
    }
    Ok(trace)
}

/// Spike-count argmax over the output layer, ties to the lowest index.
pub fn classify(trace: &DynamicsTrace) -> usize {
    argmax_lowest(&trace.output_counts())
}

pub(crate) fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}
