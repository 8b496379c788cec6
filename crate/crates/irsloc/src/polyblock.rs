//! Polyblock outer-approximation solver for dwell-time allocation.
//!
//! The objectives handled here are monotone decreasing in every coordinate
//! on the box [0,1]^N, so the minimum over the feasible set lies on the
//! simplex face and the classic Polyblock vertex-splitting scheme applies:
//! pop the vertex with the smallest lower bound, project it radially onto
//! the simplex, evaluate, and split the box at the projection. A
//! coordinate-descent polish runs on the incumbent before returning, which
//! in practice delivers machine-precision allocations even when the
//! certification gap has not closed.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolyblockError {
    #[error("objective increased under a coordinate increase")]
    NonMonotoneObjective,
    #[error("target {0} has fewer than 2 associated measurements")]
    InfeasiblePlan(usize),
    #[error("grid oracle limited to dimension 4, got {0}")]
    DimensionTooLarge(usize),
    #[error("dimension must be at least 1")]
    EmptyProblem,
    #[error("min_eta must lie in (0, 1/M)")]
    InvalidMinEta,
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAllocation {
    pub eta: Vec<f64>,
}

impl TimeAllocation {
    /// Accepts a nonnegative vector whose simplex residual |Ση − 1| is at
    /// most 1e-12.
    pub fn new(eta: Vec<f64>) -> Result<Self, String> {
        if eta.is_empty() {
            return Err("empty allocation".into());
        }
        if eta.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
            return Err("entries must lie in [0,1]".into());
        }
        let s: f64 = eta.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(format!("simplex residual {} exceeds 1e-12", (s - 1.0).abs()));
        }
        Ok(Self { eta })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            eta: vec![1.0 / n as f64; n],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Relative certification tolerance.
    pub epsilon: f64,
    /// Vertex-expansion cap.
    pub max_iter: usize,
    /// Time share handed to a forcibly included BS.
    pub min_eta: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iter: 10_000,
            min_eta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: TimeAllocation,
    pub value: f64,
    pub iterations: usize,
    /// True when the bound gap closed within epsilon; false when the
    /// iteration cap was reached first (the returned point is still the
    /// polished incumbent).
    pub certified: bool,
}

/// An objective that never increases when any coordinate increases.
pub trait MonotoneObjective {
    fn eval(&self, eta: &[f64]) -> f64;

    /// A lower bound on the objective over the box [0, z]. Monotonicity
    /// makes `eval(z)` valid; implementations may tighten it.
    fn lower_bound(&self, z: &[f64]) -> f64 {
        self.eval(z)
    }
}

/// Single-target CRLB as a function of the allocation:
/// C₀·Σx_m / (½·xᵀSx) with x = η∘γ̃ and S_ij = sin²(φ_i − φ_j).
pub struct CrlbObjective {
    gamma_tilde: Vec<f64>,
    s: Vec<Vec<f64>>,
    c0: f64,
}

impl CrlbObjective {
    pub fn new(gamma_tilde: Vec<f64>, azimuths: &[f64], c0: f64) -> Self {
        assert_eq!(gamma_tilde.len(), azimuths.len());
        let m = azimuths.len();
        let mut s = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let v = (azimuths[i] - azimuths[j]).sin();
                s[i][j] = v * v;
            }
        }
        Self { gamma_tilde, s, c0 }
    }

    fn coupling(&self, eta: &[f64]) -> Vec<f64> {
        let m = eta.len();
        let mut out = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += self.s[i][j] * eta[j] * self.gamma_tilde[j];
            }
            out[i] = acc;
        }
        out
    }
}

impl MonotoneObjective for CrlbObjective {
    fn eval(&self, eta: &[f64]) -> f64 {
        let c = self.coupling(eta);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..eta.len() {
            let x = eta[i] * self.gamma_tilde[i];
            num += x;
            den += x * c[i];
        }
        den *= 0.5;
        if den > 0.0 {
            self.c0 * num / den
        } else {
            f64::INFINITY
        }
    }

    /// Over the box [0, z] the denominator term attached to x_i is at most
    /// x_i·(S·x(z))_i, so CRLB ≥ 2C₀/max_i (S·x(z))_i.
    fn lower_bound(&self, z: &[f64]) -> f64 {
        let c = self.coupling(z);
        let cmax = c.iter().cloned().fold(0.0, f64::max);
        let structural = if cmax > 0.0 {
            2.0 * self.c0 / cmax
        } else {
            f64::INFINITY
        };
        self.eval(z).max(structural)
    }
}

/// Worst per-target CRLB as a function of the slot allocation η (length N);
/// each target accumulates x over its associated links through the slot map.
pub struct MinMaxObjective {
    targets: Vec<CrlbObjective>,
    /// Per target, per link, the slot index feeding that link.
    slots: Vec<Vec<usize>>,
    n: usize,
}

impl MinMaxObjective {
    /// `assoc[k][m]` is `Some(n)` when target k takes its BS-m measurement in
    /// slot n. Targets need at least two associated links.
    pub fn new(
        assoc: &[Vec<Option<usize>>],
        gamma_tilde: &[Vec<f64>],
        azimuth: &[Vec<f64>],
        n: usize,
        c0: f64,
    ) -> Result<Self, PolyblockError> {
        let mut targets = Vec::new();
        let mut slots = Vec::new();
        for k in 0..assoc.len() {
            let mut gt = Vec::new();
            let mut ph = Vec::new();
            let mut sl = Vec::new();
            for (m, entry) in assoc[k].iter().enumerate() {
                if let Some(slot) = entry {
                    gt.push(gamma_tilde[k][m]);
                    ph.push(azimuth[k][m]);
                    sl.push(*slot);
                }
            }
            if sl.len() < 2 {
                return Err(PolyblockError::InfeasiblePlan(k));
            }
            targets.push(CrlbObjective::new(gt, &ph, c0));
            slots.push(sl);
        }
        Ok(Self { targets, slots, n })
    }

    fn expand(&self, k: usize, eta: &[f64]) -> Vec<f64> {
        self.slots[k].iter().map(|&s| eta[s]).collect()
    }

    pub fn num_slots(&self) -> usize {
        self.n
    }
}

impl MonotoneObjective for MinMaxObjective {
    fn eval(&self, eta: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.targets.len() {
            worst = worst.max(self.targets[k].eval(&self.expand(k, eta)));
        }
        worst
    }

    fn lower_bound(&self, z: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.targets.len() {
            worst = worst.max(self.targets[k].lower_bound(&self.expand(k, z)));
        }
        worst
    }
}

struct HeapEntry {
    lb: f64,
    z: Vec<f64>,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Ties broken by the lexicographically smallest vertex so runs are
        // reproducible.
        self.lb.total_cmp(&other.lb).then_with(|| {
            for (a, b) in self.z.iter().zip(&other.z) {
                match a.total_cmp(b) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

fn probe_monotone(obj: &dyn MonotoneObjective, m: usize) -> Result<(), PolyblockError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x706f6c79);
    for _ in 0..8 {
        let mut eta: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = eta.iter().sum();
        eta.iter_mut().for_each(|v| *v /= s);
        let base = obj.eval(&eta);
        if !base.is_finite() {
            continue;
        }
        for i in 0..m {
            let mut bumped = eta.clone();
            bumped[i] += 1e-6;
            if obj.eval(&bumped) > base * (1.0 + 1e-9) {
                return Err(PolyblockError::NonMonotoneObjective);
            }
        }
    }
    Ok(())
}

fn pair_seed(obj: &dyn MonotoneObjective, m: usize) -> (f64, Vec<f64>) {
    let mut best = (f64::INFINITY, vec![1.0 / m as f64; m]);
    for i in 0..m {
        for j in (i + 1)..m {
            for k in 1..100 {
                let t = k as f64 / 100.0;
                let mut eta = vec![0.0; m];
                eta[i] = t;
                eta[j] = 1.0 - t;
                let v = obj.eval(&eta);
                if v < best.0 {
                    best = (v, eta);
                }
            }
        }
    }
    best
}

fn polish(obj: &dyn MonotoneObjective, mut eta: Vec<f64>) -> (f64, Vec<f64>) {
    let normalize = |e: &mut Vec<f64>| {
        e.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = e.iter().sum();
        e.iter_mut().for_each(|v| *v /= s);
    };
    normalize(&mut eta);
    let mut value = obj.eval(&eta);
    let mut step = 0.25;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..eta.len() {
            for dir in [step, -step] {
                let mut trial = eta.clone();
                trial[i] = (trial[i] + dir).max(0.0);
                let s: f64 = trial.iter().sum();
                if s <= 0.0 {
                    continue;
                }
                trial.iter_mut().for_each(|v| *v /= s);
                let tv = obj.eval(&trial);
                if tv < value {
                    eta = trial;
                    value = tv;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (value, eta)
}

fn solve_core(
    obj: &dyn MonotoneObjective,
    m: usize,
    config: &SolverConfig,
) -> Result<Solution, PolyblockError> {
    if m == 0 {
        return Err(PolyblockError::EmptyProblem);
    }
    if m == 1 {
        return Ok(Solution {
            value: obj.eval(&[1.0]),
            allocation: TimeAllocation { eta: vec![1.0] },
            iterations: 0,
            certified: true,
        });
    }
    probe_monotone(obj, m)?;

    let (mut best_val, mut best_pt) = pair_seed(obj, m);
    let uniform = vec![1.0 / m as f64; m];
    let uv = obj.eval(&uniform);
    if uv < best_val {
        best_val = uv;
        best_pt = uniform;
    }

    let top = vec![1.0; m];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(HeapEntry {
        lb: obj.lower_bound(&top),
        z: top,
    }));

    let mut iterations = 0;
    let mut certified = false;
    while let Some(Reverse(entry)) = heap.pop() {
        if iterations >= config.max_iter {
            heap.push(Reverse(entry));
            break;
        }
        iterations += 1;
        if best_val <= (1.0 + config.epsilon) * entry.lb {
            certified = true;
            break;
        }
        let total: f64 = entry.z.iter().sum();
        let projection: Vec<f64> = entry.z.iter().map(|v| v / total).collect();
        let pv = obj.eval(&projection);
        if pv < best_val {
            best_val = pv;
            best_pt = projection.clone();
        }
        for i in 0..m {
            if entry.z[i] - projection[i] <= 1e-15 {
                continue;
            }
            let mut child = entry.z.clone();
            child[i] = projection[i];
            let lb = obj.lower_bound(&child);
            if lb < best_val / (1.0 + config.epsilon) {
                heap.push(Reverse(HeapEntry { lb, z: child }));
            }
        }
    }
    if heap.is_empty() {
        certified = true;
    }

    let (value, eta) = polish(obj, best_pt);
    Ok(Solution {
        allocation: TimeAllocation { eta },
        value,
        iterations,
        certified,
    })
}

/// Minimizes a monotone-decreasing objective over the M-simplex.
pub fn solve_single(
    objective: &dyn MonotoneObjective,
    m: usize,
    config: &SolverConfig,
) -> Result<Solution, PolyblockError> {
    solve_core(objective, m, config)
}

/// Threshold below which an allocation entry counts as inactive.
pub const ACTIVE_ETA: f64 = 1e-9;

/// As [`solve_single`], but when the optimum activates only two BSs a third
/// is forced in at share `config.min_eta`: the added BS is chosen by
/// exhaustive scan to minimize the resulting value, and the incumbent pair
/// is rescaled by (1 − min_eta).
pub fn solve_single_min_three(
    objective: &dyn MonotoneObjective,
    m: usize,
    config: &SolverConfig,
) -> Result<Solution, PolyblockError> {
    let base = solve_core(objective, m, config)?;
    if m < 3 {
        return Ok(base);
    }
    if !(config.min_eta > 0.0 && config.min_eta < 1.0 / m as f64) {
        return Err(PolyblockError::InvalidMinEta);
    }
    let active: Vec<usize> = (0..m)
        .filter(|&i| base.allocation.eta[i] > ACTIVE_ETA)
        .collect();
    if active.len() >= 3 {
        return Ok(base);
    }
    let t = config.min_eta;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for q in 0..m {
        if active.contains(&q) {
            continue;
        }
        let mut eta: Vec<f64> = base.allocation.eta.iter().map(|v| v * (1.0 - t)).collect();
        eta[q] = t;
        let v = objective.eval(&eta);
        if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
            best = Some((v, eta));
        }
    }
    let (value, eta) = best.expect("m >= 3 guarantees a candidate");
    Ok(Solution {
        allocation: TimeAllocation { eta },
        value,
        iterations: base.iterations,
        certified: base.certified,
    })
}

/// Minimizes the worst per-target CRLB over the N-slot simplex for a fixed
/// association. `assoc[k][m]` maps target k's BS-m link to its slot.
pub fn solve_minmax(
    assoc: &[Vec<Option<usize>>],
    gamma_tilde: &[Vec<f64>],
    azimuth: &[Vec<f64>],
    n: usize,
    c0: f64,
    config: &SolverConfig,
) -> Result<Solution, PolyblockError> {
    let obj = MinMaxObjective::new(assoc, gamma_tilde, azimuth, n, c0)?;
    solve_core(&obj, n, config)
}

/// Exhaustive minimum over the regular simplex lattice with `resolution`
/// subdivisions per unit.
pub fn grid_oracle(
    objective: &dyn MonotoneObjective,
    dim: usize,
    resolution: usize,
) -> Result<(Vec<f64>, f64), PolyblockError> {
    if dim == 0 {
        return Err(PolyblockError::EmptyProblem);
    }
    if dim > 4 {
        return Err(PolyblockError::DimensionTooLarge(dim));
    }
    let mut best_v = f64::INFINITY;
    let mut best_p = vec![0.0; dim];
    let mut point = vec![0.0; dim];
    fn rec(
        obj: &dyn MonotoneObjective,
        point: &mut Vec<f64>,
        level: usize,
        remaining: usize,
        resolution: usize,
        best_v: &mut f64,
        best_p: &mut Vec<f64>,
    ) {
        if level + 1 == point.len() {
            point[level] = remaining as f64 / resolution as f64;
            let v = obj.eval(point);
            if v < *best_v {
                *best_v = v;
                best_p.clone_from(point);
            }
            return;
        }
        for t in 0..=remaining {
            point[level] = t as f64 / resolution as f64;
            rec(obj, point, level + 1, remaining - t, resolution, best_v, best_p);
        }
    }
    rec(
        objective,
        &mut point,
        0,
        resolution,
        resolution,
        &mut best_v,
        &mut best_p,
    );
    Ok((best_p, best_v))
}
