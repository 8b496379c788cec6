//! Synthetic range-measurement generation and grid-search MLE, used to
//! verify empirically that the optimized allocations reach their CRLB.

use crate::association::AssociationPlan;
use crate::channel::full_budgets;
use crate::crlb::{crlb_closed_form, Measurement, MeasurementSet};
use crate::geometry::Scenario;
use crate::polyblock::TimeAllocation;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("target {0}: fewer than 2 usable measurements")]
    TooFewMeasurements(usize),
    #[error("search region is empty")]
    EmptyRegion,
}

/// One noisy range to one BS.
#[derive(Debug, Clone, Copy)]
pub struct RangeMeasurement {
    pub bs: usize,
    pub d_tilde: f64,
    pub variance: f64,
}

/// A trial's measurement vector plus the ground truth that generated it.
#[derive(Debug, Clone)]
pub struct MeasurementSample {
    pub truth: (f64, f64),
    pub ranges: Vec<RangeMeasurement>,
}

/// Square search window, optionally clipped to a disk about its center.
#[derive(Debug, Clone, Copy)]
pub struct SearchRegion {
    pub center: (f64, f64),
    pub half_width: f64,
    pub disk_radius: Option<f64>,
}

impl SearchRegion {
    /// Prior disk of target `k`.
    pub fn prior_disk(scenario: &Scenario, k: usize) -> Self {
        Self {
            center: scenario.target_priors[k],
            half_width: scenario.r_e.max(1e-6),
            disk_radius: Some(scenario.r_e.max(1e-6)),
        }
    }

    /// Default window: the uncertainty disk inflated by 3× the largest
    /// measurement deviation. With exactly two ranges the window stays
    /// clipped to the prior disk, which suppresses the mirror solution.
    pub fn default_for(scenario: &Scenario, k: usize, sample: &MeasurementSample) -> Self {
        if sample.ranges.len() == 2 {
            return Self::prior_disk(scenario, k);
        }
        let sigma_max = sample
            .ranges
            .iter()
            .map(|r| r.variance.sqrt())
            .fold(0.0, f64::max);
        Self {
            center: scenario.target_priors[k],
            half_width: (scenario.r_e + 3.0 * sigma_max).max(1e-6),
            disk_radius: None,
        }
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        match self.disk_radius {
            None => true,
            Some(r) => {
                let dx = p.0 - self.center.0;
                let dy = p.1 - self.center.1;
                dx * dx + dy * dy <= r * r * (1.0 + 1e-12)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MleConfig {
    /// Cells per axis of the first grid stage.
    pub coarse_cells: usize,
    /// Cells per axis of each refinement stage.
    pub refine_cells: usize,
    /// Stop refining once the cell size falls below this (m).
    pub fine_resolution: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            coarse_cells: 80,
            refine_cells: 30,
            fine_resolution: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub x: f64,
    pub y: f64,
    /// Set when the coarse stage found two well-separated near-tied minima
    /// (mirror solutions).
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloResult {
    pub mse: f64,
    /// Standard error of the MSE estimate (spread of per-trial squared
    /// errors over √trials).
    pub mse_se: f64,
    pub crlb: f64,
    pub trials: usize,
    pub power: f64,
    pub seed: u64,
    /// Trials whose coarse grid flagged a mirror ambiguity.
    pub ambiguous_trials: usize,
}

fn dist3d(p: (f64, f64), bs: (f64, f64), dh: f64) -> f64 {
    let dx = p.0 - bs.0;
    let dy = p.1 - bs.1;
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// Draws a trial: truth uniform over the uncertainty disk of target `k`,
/// then one Gaussian range per requested (bs, variance); non-positive ranges
/// are redrawn.
pub fn sample_measurements(
    scenario: &Scenario,
    k: usize,
    variances: &[(usize, f64)],
    rng: &mut impl Rng,
) -> MeasurementSample {
    let center = scenario.target_priors[k];
    let r = scenario.r_e * rng.gen::<f64>().sqrt();
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    let truth = (center.0 + r * th.cos(), center.1 + r * th.sin());
    let dh = scenario.height_gap();
    let ranges = variances
        .iter()
        .map(|&(bs, variance)| {
            let d = dist3d(truth, scenario.bs_positions[bs], dh);
            let sigma = variance.sqrt();
            let mut d_tilde = d + sigma * rng.sample::<f64, _>(StandardNormal);
            while d_tilde <= 0.0 {
                d_tilde = d + sigma * rng.sample::<f64, _>(StandardNormal);
            }
            RangeMeasurement {
                bs,
                d_tilde,
                variance,
            }
        })
        .collect();
    MeasurementSample { truth, ranges }
}

fn cost(sample: &MeasurementSample, scenario: &Scenario, p: (f64, f64)) -> f64 {
    let dh = scenario.height_gap();
    sample
        .ranges
        .iter()
        .map(|r| {
            let d = dist3d(p, scenario.bs_positions[r.bs], dh);
            let e = r.d_tilde - d;
            e * e / r.variance
        })
        .sum()
}

struct GridMin {
    point: (f64, f64),
    cell: f64,
    runner_up: Option<((f64, f64), f64)>,
}

fn grid_scan(
    sample: &MeasurementSample,
    scenario: &Scenario,
    center: (f64, f64),
    half: f64,
    cells: usize,
    region: &SearchRegion,
) -> Option<GridMin> {
    let cell = 2.0 * half / cells as f64;
    let mut best: Option<((f64, f64), f64)> = None;
    let mut second: Option<((f64, f64), f64)> = None;
    for i in 0..=cells {
        let x = center.0 - half + i as f64 * cell;
        for j in 0..=cells {
            let y = center.1 - half + j as f64 * cell;
            if !region.contains((x, y)) {
                continue;
            }
            let v = cost(sample, scenario, (x, y));
            match best {
                None => best = Some(((x, y), v)),
                Some((bp, bv)) => {
                    if v < bv {
                        if (bp.0 - x).hypot(bp.1 - y) > 3.0 * cell {
                            second = Some((bp, bv));
                        }
                        best = Some(((x, y), v));
                    } else {
                        let far = (bp.0 - x).hypot(bp.1 - y) > 3.0 * cell;
                        if far && second.map_or(true, |(_, sv)| v < sv) {
                            second = Some(((x, y), v));
                        }
                    }
                }
            }
        }
    }
    best.map(|(point, _)| GridMin {
        point,
        cell,
        runner_up: second,
    })
}

/// Weighted least-squares grid localization: a coarse pass over the search
/// region followed by ~10× finer passes around the incumbent until the cell
/// size drops below the configured resolution.
pub fn mle_locate(
    sample: &MeasurementSample,
    scenario: &Scenario,
    region: &SearchRegion,
    config: &MleConfig,
) -> Result<Estimate, EstimatorError> {
    if sample.ranges.len() < 2 {
        return Err(EstimatorError::TooFewMeasurements(usize::MAX));
    }
    let coarse = grid_scan(
        sample,
        scenario,
        region.center,
        region.half_width,
        config.coarse_cells,
        region,
    )
    .ok_or(EstimatorError::EmptyRegion)?;

    let refine = |start: (f64, f64), start_cell: f64| -> Result<((f64, f64), f64), EstimatorError> {
        let mut point = start;
        let mut cell = start_cell;
        while cell > config.fine_resolution {
            let half = 1.5 * cell;
            let stage = grid_scan(sample, scenario, point, half, config.refine_cells, region)
                .ok_or(EstimatorError::EmptyRegion)?;
            point = stage.point;
            cell = stage.cell;
        }
        Ok((point, cost(sample, scenario, point)))
    };

    let (mut point, value) = refine(coarse.point, coarse.cell)?;
    let mut ambiguous = false;
    // A well-separated second basin that refines to a statistically
    // indistinguishable cost is a mirror solution.
    if let Some((rp, _)) = coarse.runner_up {
        let (p2, v2) = refine(rp, coarse.cell)?;
        if (p2.0 - point.0).hypot(p2.1 - point.1) > 3.0 * coarse.cell {
            ambiguous = (v2 - value).abs() <= 9.0;
        }
        if v2 < value {
            point = p2;
        }
    }
    Ok(Estimate {
        x: point.0,
        y: point.1,
        ambiguous,
    })
}

/// Search-region policy for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionMode {
    /// Per-sample default (inflated disk; prior disk for 2-range samples).
    Default,
    /// Always the prior disk.
    PriorDisk,
}

/// Runs `trials` independent localization trials of every target under the
/// given plan and allocation, and reports the empirical MSE next to the
/// matching CRLB. Each trial owns RNG substream `trial + 1` of the master
/// seed, so results are order-independent, parallel, and bit-reproducible.
pub fn monte_carlo(
    scenario: &Scenario,
    plan: &AssociationPlan,
    allocation: &TimeAllocation,
    trials: usize,
    seed: u64,
    region_mode: RegionMode,
    config: &MleConfig,
) -> Result<MonteCarloResult, EstimatorError> {
    assert!(trials >= 1);
    let budgets = full_budgets(scenario).expect("scenario budgets");
    let slot_map = plan.slot_map();
    let c0 = scenario.radio.c0;
    let k_count = scenario.num_targets();

    // Per target: (bs, variance) of each funded link.
    let mut variances: Vec<Vec<(usize, f64)>> = Vec::with_capacity(k_count);
    let mut crlb_sum = 0.0;
    for k in 0..k_count {
        let mut links = Vec::new();
        let mut entries = Vec::new();
        for (m, slot) in slot_map[k].iter().enumerate() {
            if let Some(n) = slot {
                let eta = allocation.eta[*n];
                if eta <= 0.0 {
                    continue;
                }
                let gamma = eta * budgets[k][m].gamma_bar;
                if gamma <= 0.0 {
                    continue;
                }
                let variance = c0 / gamma;
                links.push((m, variance));
                entries.push(Measurement {
                    azimuth: budgets[k][m].geometry.azimuth,
                    elevation: budgets[k][m].geometry.elevation,
                    variance,
                });
            }
        }
        if links.len() < 2 {
            return Err(EstimatorError::TooFewMeasurements(k));
        }
        let report = crlb_closed_form(&MeasurementSet::new(entries).unwrap()).unwrap();
        crlb_sum += report.value;
        variances.push(links);
    }

    // Adapt the stopping cell to the noise floor: far finer grids than
    // σ/10 only burn time without moving the MSE.
    let sigma_min = variances
        .iter()
        .flat_map(|v| v.iter())
        .map(|&(_, var)| var.sqrt())
        .fold(f64::INFINITY, f64::min);
    let fine = (sigma_min / 10.0).clamp(config.fine_resolution, f64::INFINITY);
    let run_config = MleConfig {
        fine_resolution: fine,
        ..*config
    };

    let per_trial: Vec<(f64, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            let mut sq = 0.0;
            let mut amb = 0;
            for k in 0..k_count {
                let sample = sample_measurements(scenario, k, &variances[k], &mut rng);
                let region = match region_mode {
                    RegionMode::Default => SearchRegion::default_for(scenario, k, &sample),
                    RegionMode::PriorDisk => SearchRegion::prior_disk(scenario, k),
                };
                let est = mle_locate(&sample, scenario, &region, &run_config)
                    .expect("non-empty region");
                let dx = est.x - sample.truth.0;
                let dy = est.y - sample.truth.1;
                sq += dx * dx + dy * dy;
                if est.ambiguous {
                    amb += 1;
                }
            }
            (sq / k_count as f64, amb)
        })
        .collect();

    let mut mse = 0.0;
    let mut ambiguous_trials = 0;
    for &(sq, amb) in &per_trial {
        mse += sq;
        ambiguous_trials += (amb > 0) as usize;
    }
    mse /= trials as f64;
    let var = per_trial
        .iter()
        .map(|&(sq, _)| (sq - mse) * (sq - mse))
        .sum::<f64>()
        / (trials.max(2) - 1) as f64;
    let mse_se = (var / trials as f64).sqrt();

    Ok(MonteCarloResult {
        mse,
        mse_se,
        crlb: crlb_sum / k_count as f64,
        trials,
        power: scenario.radio.p_tx,
        seed,
        ambiguous_trials,
    })
}
