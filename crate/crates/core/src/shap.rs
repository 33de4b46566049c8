//! Shapley attributions over input pixels and an audit of how many
//! disconnected pixels they flag as relevant.
//!
//! The sampled estimator is the kernel-weighted regression scheme: coalition
//! sizes whose full enumeration fits the budget are enumerated (smallest and
//! largest first), the rest are sampled in complement pairs, and the fit is
//! constrained so that the scores sum to `v(full) - v(empty)`.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::{simulate, InputSequence, Network};

/// Largest player count `exact_shapley` accepts.
pub const EXACT_PLAYER_LIMIT: usize = 12;

/// Ridge added to the diagonal when the regression system is singular.
pub const RIDGE: f64 = 1e-10;

/// A cooperative game over `players()` features.
pub trait ValueFunction: Sync {
    fn players(&self) -> usize;
    /// `coalition[i]` says whether player `i` is present.
    fn value(&self, coalition: &[bool]) -> f64;
}

/// Target-class output spike count with absent pixels forced dark.
pub struct NetworkValue<'a> {
    net: &'a Network,
    input: &'a InputSequence,
    class: usize,
    /// Input neuron of each player; inputs that are not players stay as given.
    features: Vec<usize>,
}

impl<'a> NetworkValue<'a> {
    /// Every input pixel is a player.
    pub fn new(net: &'a Network, input: &'a InputSequence, class: usize) -> Result<Self> {
        Self::with_features(net, input, class, (0..net.input_count).collect())
    }

    pub fn with_features(
        net: &'a Network,
        input: &'a InputSequence,
        class: usize,
        features: Vec<usize>,
    ) -> Result<Self> {
        if input.input_count() != net.input_count {
            return Err(Error::DimensionMismatch(format!(
                "input sequence has {} neurons, network expects {}",
                input.input_count(),
                net.input_count
            )));
        }
        if class >= net.output_count {
            return Err(Error::InvalidArgument(format!("class {class} out of range")));
        }
        if let Some(&f) = features.iter().find(|&&f| f >= net.input_count) {
            return Err(Error::InvalidArgument(format!("feature {f} is not an input neuron")));
        }
        Ok(Self { net, input, class, features })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }
}

impl ValueFunction for NetworkValue<'_> {
    fn players(&self) -> usize {
        self.features.len()
    }

    fn value(&self, coalition: &[bool]) -> f64 {
        let mut keep = vec![true; self.net.input_count];
        for (&f, &present) in self.features.iter().zip(coalition) {
            keep[f] = present;
        }
        let trace = simulate(self.net, &self.input.masked(&keep)).expect("dimensions checked at construction");
        trace.output_counts()[self.class] as f64
    }
}

/// A game given by a closure, for tests and toy examples.
pub struct FnValue<F> {
    pub players: usize,
    pub f: F,
}

impl<F: Fn(&[bool]) -> f64 + Sync> ValueFunction for FnValue<F> {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: &[bool]) -> f64 {
        (self.f)(coalition)
    }
}

fn mask_to_coalition(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Shapley values by enumerating all `2^n` coalitions.
pub fn exact_shapley(v: &dyn ValueFunction) -> Result<Vec<f64>> {
    let n = v.players();
    if n > EXACT_PLAYER_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exact Shapley values need at most {EXACT_PLAYER_LIMIT} players, got {n}"
        )));
    }
    let values: Vec<f64> = (0..1usize << n).into_par_iter().map(|m| v.value(&mask_to_coalition(m, n))).collect();
    // weight of a coalition of size s not containing i: s! (n - s - 1)! / n!
    let mut weight = vec![0.0; n.max(1)];
    for (s, w) in weight.iter_mut().enumerate().take(n) {
        *w = 1.0 / (n as f64 * binomial(n - 1, s));
    }
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        for m in 0..1usize << n {
            if m >> i & 1 == 0 {
                let s = m.count_ones() as usize;
                *p += weight[s] * (values[m | 1 << i] - values[m]);
            }
        }
    }
    Ok(phi)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Scores from a sampled or exact attribution run.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribution {
    pub scores: Vec<f64>,
    /// Coalitions evaluated besides the empty and full ones.
    pub sample_size: usize,
    /// Whether the regression needed the ridge term.
    pub regularized: bool,
    pub wall_time_ms: u64,
}

/// Coalitions as bitsets, with accumulated kernel weight.
struct Design {
    n: usize,
    index: HashMap<Vec<u64>, usize>,
    rows: Vec<(Vec<u64>, f64)>,
}

impl Design {
    fn new(n: usize) -> Self {
        Self { n, index: HashMap::new(), rows: Vec::new() }
    }

    fn words(&self) -> usize {
        self.n.div_ceil(64)
    }

    fn bits_of(&self, members: &[usize]) -> Vec<u64> {
        let mut bits = vec![0u64; self.words()];
        for &i in members {
            bits[i / 64] |= 1 << (i % 64);
        }
        bits
    }

    fn add_bits(&mut self, bits: Vec<u64>, weight: f64) {
        match self.index.get(&bits) {
            Some(&r) => self.rows[r].1 += weight,
            None => {
                self.index.insert(bits.clone(), self.rows.len());
                self.rows.push((bits, weight));
            }
        }
    }

    fn complement(&self, bits: &[u64]) -> Vec<u64> {
        let mut c: Vec<u64> = bits.iter().map(|w| !w).collect();
        let tail = self.n % 64;
        if tail != 0 {
            *c.last_mut().unwrap() &= (1u64 << tail) - 1;
        }
        c
    }
}

fn members(bits: &[u64], n: usize) -> Vec<usize> {
    (0..n).filter(|&i| bits[i / 64] >> (i % 64) & 1 == 1).collect()
}

/// Kernel-weighted regression estimate from `sample_size` coalitions.
pub fn sampled_shapley(v: &dyn ValueFunction, sample_size: usize, seed: u64) -> Result<Attribution> {
    let start = Instant::now();
    let n = v.players();
    if n < 2 {
        return Err(Error::InvalidArgument("sampled Shapley values need at least two players".into()));
    }
    if sample_size < n {
        return Err(Error::InvalidArgument(format!(
            "sample size {sample_size} is below the feature count {n}"
        )));
    }
    let v_empty = v.value(&vec![false; n]);
    let v_full = v.value(&vec![true; n]);
    let design = draw_coalitions(n, sample_size, seed);
    let values: Vec<f64> = design
        .rows
        .par_iter()
        .map(|(bits, _)| {
            let mut c = vec![false; n];
            for i in members(bits, n) {
                c[i] = true;
            }
            v.value(&c)
        })
        .collect();
    let (scores, regularized) = solve_constrained(&design, &values, v_empty, v_full)?;
    Ok(Attribution {
        scores,
        sample_size: design.rows.len(),
        regularized,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Total kernel mass of all coalitions of size `s` or `n - s`.
fn size_mass(n: usize, s: usize) -> f64 {
    let m = (n - 1) as f64 / (s * (n - s)) as f64;
    if 2 * s == n {
        m
    } else {
        2.0 * m
    }
}

fn draw_coalitions(n: usize, budget: usize, seed: u64) -> Design {
    let mut design = Design::new(n);
    let top = n / 2;
    let mut mass: Vec<f64> = (1..=top).map(|s| size_mass(n, s)).collect();
    let mut remaining = budget;
    let mut next = 1;
    // enumerate whole size classes while the budget covers them at the
    // rate the kernel would sample them
    while next <= top {
        let paired = 2 * next != n;
        let count = binomial(n, next) * if paired { 2.0 } else { 1.0 };
        let share: f64 = mass[next - 1] / mass[next - 1..].iter().sum::<f64>();
        if count > remaining as f64 * share + 1e-8 {
            break;
        }
        let per = (n - 1) as f64 / (binomial(n, next) * (next * (n - next)) as f64);
        for_each_subset(n, next, |m| {
            let bits = design.bits_of(m);
            if paired {
                design.add_bits(design.complement(&bits), per);
            }
            design.add_bits(bits, per);
        });
        remaining -= count as usize;
        mass[next - 1] = 0.0;
        next += 1;
    }
    if next > top || remaining < 2 {
        return design;
    }
    let left: f64 = mass.iter().sum();
    let sizes: Vec<usize> = (next..=top).collect();
    let cumulative: Vec<f64> = sizes
        .iter()
        .scan(0.0, |acc, &s| {
            *acc += mass[s - 1];
            Some(*acc)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = remaining / 2;
    let per = left / (2 * draws) as f64;
    for _ in 0..draws {
        let u = rng.gen::<f64>() * left;
        let pick = cumulative.iter().position(|&c| u < c).unwrap_or(sizes.len() - 1);
        let s = sizes[pick];
        let bits = design.bits_of(&sample_indices(&mut rng, n, s).into_vec());
        let c = design.complement(&bits);
        design.add_bits(bits, per);
        design.add_bits(c, per);
    }
    design
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimises the weighted squared error subject to the efficiency
/// constraint, via the bordered normal equations.
fn solve_constrained(design: &Design, values: &[f64], v_empty: f64, v_full: f64) -> Result<(Vec<f64>, bool)> {
    let n = design.n;
    // small coalitions accumulate directly; large ones through their
    // complement c, using z z' = 1 1' - 1 c' - c 1' + c c'
    let mut direct = DMatrix::<f64>::zeros(n, n);
    let mut comp = DMatrix::<f64>::zeros(n, n);
    let mut comp_lin = DVector::<f64>::zeros(n);
    let mut comp_mass = 0.0;
    let mut rhs = DVector::<f64>::zeros(n);
    let mut rhs_comp = DVector::<f64>::zeros(n);
    let mut rhs_mass = 0.0;
    for ((bits, w), &value) in design.rows.iter().zip(values) {
        let y = value - v_empty;
        let m = members(bits, n);
        if 2 * m.len() <= n {
            for (a, &i) in m.iter().enumerate() {
                rhs[i] += w * y;
                for &j in &m[a..] {
                    direct[(i, j)] += w;
                }
            }
        } else {
            let c = members(&design.complement(bits), n);
            comp_mass += w;
            rhs_mass += w * y;
            for (a, &i) in c.iter().enumerate() {
                comp_lin[i] += w;
                rhs_comp[i] += w * y;
                for &j in &c[a..] {
                    comp[(i, j)] += w;
                }
            }
        }
    }
    let dim = n + 1;
    let mut system = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        for j in i..n {
            let a = direct[(i, j)] + comp[(i, j)] + comp_mass - comp_lin[i] - comp_lin[j];
            system[(i, j)] = a;
            system[(j, i)] = a;
        }
        system[(i, n)] = 1.0;
        system[(n, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(dim);
    for i in 0..n {
        b[i] = rhs[i] + rhs_mass - rhs_comp[i];
    }
    b[n] = v_full - v_empty;
    if let Some(x) = system.clone().lu().solve(&b) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok((x.rows(0, n).iter().copied().collect(), false));
        }
    }
    for i in 0..n {
        system[(i, i)] += RIDGE;
    }
    match system.lu().solve(&b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok((x.rows(0, n).iter().copied().collect(), true)),
        _ => Err(Error::SingularRegression(n)),
    }
}

/// Fraction of the largest absolute score used as the default threshold.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.1;

/// `DEFAULT_DELTA_FRACTION` of the largest absolute score, kept positive.
pub fn default_delta(scores: &[f64]) -> f64 {
    let max = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    (DEFAULT_DELTA_FRACTION * max).max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    /// One score per input pixel.
    pub scores: Vec<f64>,
    pub delta: f64,
    pub sample_size: usize,
    /// Pixels with score above `delta` or below `-delta`.
    pub relevant: Vec<usize>,
    /// Relevant pixels with no hidden-layer connection.
    pub wrongly_relevant: Vec<usize>,
    pub wrongly_relevant_pct: f64,
    pub regularized: bool,
    pub wall_time_ms: u64,
}

impl AttributionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Flags scores beyond `±delta` and counts the flagged pixels whose
/// hidden-weight column is all zero.
pub fn relevance_audit(attribution: &Attribution, delta: f64, net: &Network) -> Result<AttributionReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let scores = &attribution.scores;
    if scores.len() != net.input_count {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} input pixels",
            scores.len(),
            net.input_count
        )));
    }
    let connected = net.connected_inputs();
    let relevant: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > delta || scores[i] < -delta).collect();
    let wrongly_relevant: Vec<usize> = relevant.iter().copied().filter(|&i| !connected[i]).collect();
    let wrongly_relevant_pct = if relevant.is_empty() {
        0.0
    } else {
        100.0 * wrongly_relevant.len() as f64 / relevant.len() as f64
    };
    Ok(AttributionReport {
        scores: scores.clone(),
        delta,
        sample_size: attribution.sample_size,
        relevant,
        wrongly_relevant,
        wrongly_relevant_pct,
        regularized: attribution.regularized,
        wall_time_ms: attribution.wall_time_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn glove() -> FnValue<impl Fn(&[bool]) -> f64 + Sync> {
        // player 0 owns a left glove, players 1 and 2 right gloves
        FnValue { players: 3, f: |c: &[bool]| f64::from(u8::from(c[0] && (c[1] || c[2]))) }
    }

    #[test]
    fn glove_game_by_hand() {
        // over the six orderings player 0 is pivotal in four
        let phi = exact_shapley(&glove()).unwrap();
        assert!((phi[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((phi[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((phi[2] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn null_player_is_exactly_zero() {
        let v = FnValue { players: 4, f: |c: &[bool]| (c[0] as u8 * 3 + c[1] as u8 * c[2] as u8) as f64 };
        let phi = exact_shapley(&v).unwrap();
        assert_eq!(phi[3], 0.0);
        assert_eq!(phi[1], phi[2]);
        assert!((phi.iter().sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_players() {
        let v = FnValue { players: 13, f: |_: &[bool]| 0.0 };
        assert!(exact_shapley(&v).is_err());
    }

    #[test]
    fn subsets_in_order() {
        let mut all = Vec::new();
        for_each_subset(4, 2, |m| all.push(m.to_vec()));
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_subset(5, 5, |_| count += 1);
        assert_eq!(count, 1);
        for_each_subset(6, 3, |_| count += 1);
        assert_eq!(count, 21);
    }

    #[test]
    fn full_budget_recovers_exact_values() {
        let v = FnValue {
            players: 6,
            f: |c: &[bool]| {
                let k = c.iter().filter(|&&b| b).count() as f64;
                k * k + if c[0] && c[5] { 2.0 } else { 0.0 } - if c[2] { 1.5 } else { 0.0 }
            },
        };
        let exact = exact_shapley(&v).unwrap();
        let est = sampled_shapley(&v, 62, 0).unwrap();
        assert_eq!(est.sample_size, 62);
        assert!(!est.regularized);
        for (a, b) in exact.iter().zip(&est.scores) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let v = FnValue { players: 20, f: |c: &[bool]| c.iter().take(7).filter(|&&b| b).count().min(3) as f64 };
        let a = sampled_shapley(&v, 300, 9).unwrap();
        let b = sampled_shapley(&v, 300, 9).unwrap();
        assert_eq!(a.scores, b.scores);
        let s: f64 = a.scores.iter().sum();
        assert!((s - 3.0).abs() < 1e-9);
        assert!(sampled_shapley(&v, 19, 0).is_err());
    }

    #[test]
    fn strict_threshold() {
        let mut net = Network::zeroed(crate::snn::WeightScale::Binary, 3, 1, 1, 1);
        net.hidden_weights[0][1] = 1;
        let att = Attribution { scores: vec![0.5, -0.5, 0.2], sample_size: 3, regularized: false, wall_time_ms: 0 };
        let r = relevance_audit(&att, 0.2, &net).unwrap();
        assert_eq!(r.relevant, vec![0, 1]);
        assert_eq!(r.wrongly_relevant, vec![0]);
        assert_eq!(r.wrongly_relevant_pct, 50.0);
        assert!(relevance_audit(&att, 0.0, &net).is_err());
    }
}
