//! Scenario-file ingestion and experiment orchestration: every command reads
//! a JSON scenario, runs one pipeline, and emits a results CSV plus a JSON
//! run manifest.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{
    benchmark_plan, build_interference_graph, choose_pairs, max_targets, min_slots, pack_slots,
    proposed_plan, AssociationError, AssociationPlan, BenchmarkScheme, InterferenceLevel,
};
use crate::channel::{full_budgets, ChannelError};
use crate::crlb::{analytic_lower_bound, crlb_multitarget};
use crate::estimator::{monte_carlo, EstimatorError, MleConfig, RegionMode};
use crate::geometry::{GeometryError, RadioParams, Scenario};
use crate::polyblock::{
    solve_single, CrlbObjective, PolyblockError, SolverConfig, TimeAllocation, ACTIVE_ETA,
};

/// Allocation share above which a BS counts as actively used in reported
/// statistics.
pub const ACTIVE_BS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error(transparent)]
    Solver(#[from] PolyblockError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// On-disk scenario schema. dB-valued fields are converted to linear scale
/// when building a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub bs: Vec<[f64; 2]>,
    pub targets: Vec<[f64; 2]>,
    pub heights: HeightsFile,
    pub irs: IrsFile,
    pub radio: RadioFile,
    pub r_e_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightsFile {
    pub h_bs_m: f64,
    pub h_irs_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsFile {
    #[serde(rename = "L_x")]
    pub l_x: usize,
    #[serde(rename = "L_y")]
    pub l_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioFile {
    pub beta0_db: f64,
    pub sigma_s2_db: f64,
    pub p_tx_w: f64,
    #[serde(rename = "delta_T_s")]
    pub delta_t_window_s: f64,
    #[serde(rename = "delta_t_s")]
    pub delta_t_symbol_s: f64,
    pub c0: f64,
    pub d_min_m: f64,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        if self.bs.len() < 2 {
            return Err(invalid("bs", "need at least 2 base stations"));
        }
        if self.targets.is_empty() {
            return Err(invalid("targets", "need at least 1 target"));
        }
        if !(self.r_e_m >= 0.0) {
            return Err(invalid("r_e_m", "must be nonnegative"));
        }
        if self.irs.l_x == 0 || self.irs.l_y == 0 {
            return Err(invalid("irs.L_x", "IRS dimensions must be positive"));
        }
        for (field, v) in [
            ("radio.p_tx_w", self.radio.p_tx_w),
            ("radio.delta_T_s", self.radio.delta_t_window_s),
            ("radio.delta_t_s", self.radio.delta_t_symbol_s),
            ("radio.c0", self.radio.c0),
            ("radio.d_min_m", self.radio.d_min_m),
        ] {
            if !(v > 0.0) {
                return Err(invalid(field, "must be positive"));
            }
        }
        let scenario = Scenario {
            bs_positions: self.bs.iter().map(|p| (p[0], p[1])).collect(),
            target_priors: self.targets.iter().map(|p| (p[0], p[1])).collect(),
            h_bs: self.heights.h_bs_m,
            h_irs: self.heights.h_irs_m,
            r_e: self.r_e_m,
            irs_size: (self.irs.l_x, self.irs.l_y),
            radio: RadioParams {
                beta0: db_to_linear(self.radio.beta0_db),
                sigma_s2: db_to_linear(self.radio.sigma_s2_db),
                p_tx: self.radio.p_tx_w,
                delta_t_window: self.radio.delta_t_window_s,
                delta_t_symbol: self.radio.delta_t_symbol_s,
                c0: self.radio.c0,
                d_min: self.radio.d_min_m,
            },
        };
        scenario
            .validate()
            .map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            bs: s.bs_positions.iter().map(|&(x, y)| [x, y]).collect(),
            targets: s.target_priors.iter().map(|&(x, y)| [x, y]).collect(),
            heights: HeightsFile {
                h_bs_m: s.h_bs,
                h_irs_m: s.h_irs,
            },
            irs: IrsFile {
                l_x: s.irs_size.0,
                l_y: s.irs_size.1,
            },
            radio: RadioFile {
                beta0_db: linear_to_db(s.radio.beta0),
                sigma_s2_db: linear_to_db(s.radio.sigma_s2),
                p_tx_w: s.radio.p_tx,
                delta_t_window_s: s.radio.delta_t_window,
                delta_t_symbol_s: s.radio.delta_t_symbol,
                c0: s.radio.c0,
                d_min_m: s.radio.d_min,
            },
            r_e_m: s.r_e,
        }
    }
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    load_scenario_file(path)?.to_scenario()
}

pub fn save_scenario_file(file: &ScenarioFile, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(file)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Average,
    Closest,
    TimeDivision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Power,
    L,
    M,
    K,
    Re,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Crlb,
    OptimizeSingle,
    Associate,
    SimulateMle,
    Sweep,
    Bounds,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub scheme: Scheme,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Builds the association plan and time allocation for a scheme. The
/// proposed scheme with one target allocates over all BSs directly; with
/// several targets it runs the pair-selection and packing pipeline.
pub fn build_scheme(
    scenario: &Scenario,
    scheme: Scheme,
    config: &SolverConfig,
) -> Result<(AssociationPlan, TimeAllocation), CliError> {
    let budgets = full_budgets(scenario)?;
    match scheme {
        Scheme::Proposed if scenario.num_targets() == 1 => {
            let m = scenario.num_bs();
            let gt: Vec<f64> = budgets[0].iter().map(|b| b.gamma_tilde_rate).collect();
            let az: Vec<f64> = budgets[0].iter().map(|b| b.geometry.azimuth).collect();
            let obj = CrlbObjective::new(gt, &az, scenario.radio.c0);
            let sol = solve_single(&obj, m, config)?;
            let active: Vec<(usize, f64)> = sol
                .allocation
                .eta
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > ACTIVE_ETA)
                .map(|(i, &e)| (i, e))
                .collect();
            let mut plan = AssociationPlan::empty(1, m, active.len());
            let mut eta = Vec::with_capacity(active.len());
            for (slot, &(bs, e)) in active.iter().enumerate() {
                plan.b[0][bs][slot] = true;
                eta.push(e);
            }
            let total: f64 = eta.iter().sum();
            eta.iter_mut().for_each(|v| *v /= total);
            Ok((plan, TimeAllocation { eta }))
        }
        Scheme::Proposed => {
            let (plan, eta) = proposed_plan(scenario, &budgets, config)?;
            Ok((plan, eta))
        }
        Scheme::Average => Ok(benchmark_plan(
            scenario,
            &budgets,
            BenchmarkScheme::Average,
            config,
        )?),
        Scheme::Closest => Ok(benchmark_plan(
            scenario,
            &budgets,
            BenchmarkScheme::Closest,
            config,
        )?),
        Scheme::TimeDivision => Ok(benchmark_plan(
            scenario,
            &budgets,
            BenchmarkScheme::TimeDivision,
            config,
        )?),
    }
}

/// Per-target CRLBs of a plan under an allocation.
pub fn plan_crlbs(
    scenario: &Scenario,
    plan: &AssociationPlan,
    eta: &TimeAllocation,
) -> Result<Vec<f64>, CliError> {
    let budgets = full_budgets(scenario)?;
    let gt: Vec<Vec<f64>> = budgets
        .iter()
        .map(|row| row.iter().map(|b| b.gamma_tilde_rate).collect())
        .collect();
    let az: Vec<Vec<f64>> = budgets
        .iter()
        .map(|row| row.iter().map(|b| b.geometry.azimuth).collect())
        .collect();
    Ok(crlb_multitarget(
        &plan.slot_map(),
        &eta.eta,
        &gt,
        &az,
        scenario.radio.c0,
    ))
}

fn sweep_scenario(base: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario, CliError> {
    let mut s = base.clone();
    match axis {
        SweepAxis::Power => s.radio.p_tx = value,
        SweepAxis::L => {
            let l = value as usize;
            if l == 0 || (value - l as f64).abs() > 0.0 {
                return Err(invalid("sweep", "L values must be positive integers"));
            }
            s.irs_size = (l, l);
        }
        SweepAxis::M => {
            let m = value as usize;
            if m < 2 || m > base.num_bs() || (value - m as f64).abs() > 0.0 {
                return Err(invalid("sweep", "M values must be 2..=#bs"));
            }
            s.bs_positions.truncate(m);
        }
        SweepAxis::K => {
            let k = value as usize;
            if k < 1 || k > base.num_targets() || (value - k as f64).abs() > 0.0 {
                return Err(invalid("sweep", "K values must be 1..=#targets"));
            }
            s.target_priors.truncate(k);
        }
        SweepAxis::Re => {
            if !(value >= 0.0) {
                return Err(invalid("sweep", "r_e values must be nonnegative"));
            }
            s.r_e = value;
        }
    }
    s.validate().map_err(|e| invalid("sweep", e.to_string()))?;
    Ok(s)
}

fn write_manifest(spec: &ExperimentSpec) -> Result<(), CliError> {
    let spec_json = serde_json::to_string(spec)?;
    let mut hasher = DefaultHasher::new();
    spec_json.hash(&mut hasher);
    let manifest = serde_json::json!({
        "spec": serde_json::from_str::<serde_json::Value>(&spec_json)?,
        "config_hash": format!("{:016x}", hasher.finish()),
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let path = spec.out.with_extension("manifest.json");
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Executes the experiment, writing the results CSV at `spec.out` and a
/// `<out>.manifest.json` beside it.
pub fn run(spec: &ExperimentSpec) -> Result<(), CliError> {
    if let Some((_, values)) = &spec.sweep {
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sweep", "values must be strictly increasing"));
        }
    }
    let scenario = load_scenario(&spec.scenario_path)?;
    let config = SolverConfig::default();
    let mut csv = String::new();

    match spec.command {
        Command::Crlb => {
            let (plan, eta) = build_scheme(&scenario, spec.scheme, &config)?;
            let crlbs = plan_crlbs(&scenario, &plan, &eta)?;
            csv.push_str("target,crlb_m2\n");
            for (k, v) in crlbs.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", k, v));
            }
        }
        Command::OptimizeSingle => {
            let budgets = full_budgets(&scenario)?;
            let gt: Vec<f64> = budgets[0].iter().map(|b| b.gamma_tilde_rate).collect();
            let az: Vec<f64> = budgets[0].iter().map(|b| b.geometry.azimuth).collect();
            let obj = CrlbObjective::new(gt, &az, scenario.radio.c0);
            let sol = solve_single(&obj, scenario.num_bs(), &config)?;
            let bound = analytic_lower_bound(
                &scenario.radio,
                scenario.irs_elements(),
                scenario.height_gap(),
            )
            .map(|v| v.to_string())
            .unwrap_or_default();
            csv.push_str("crlb_m2,analytic_bound_m2,certified,iterations,eta\n");
            let etas = sol
                .allocation
                .eta
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(";");
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                sol.value, bound, sol.certified, sol.iterations, etas
            ));
        }
        Command::Associate => {
            let budgets = full_budgets(&scenario)?;
            let graph = build_interference_graph(&scenario)?;
            let pairs = choose_pairs(&scenario, &budgets)?;
            let plan = pack_slots(&pairs, &graph);
            csv.push_str("target,bs,slot,eta_bar\n");
            for (k, p) in pairs.iter().enumerate() {
                let (b1, b2) = p.eta_bar();
                let map = plan.slot_map();
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    k,
                    p.bs.0,
                    map[k][p.bs.0].unwrap(),
                    b1
                ));
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    k,
                    p.bs.1,
                    map[k][p.bs.1].unwrap(),
                    b2
                ));
            }
        }
        Command::SimulateMle => {
            let (plan, eta) = build_scheme(&scenario, spec.scheme, &config)?;
            let trials = spec.trials.max(1);
            let result = monte_carlo(
                &scenario,
                &plan,
                &eta,
                trials,
                spec.seed,
                RegionMode::Default,
                &MleConfig::default(),
            )?;
            csv.push_str("scheme,power_w,trials,seed,mse_m2,crlb_m2,ambiguous_trials\n");
            csv.push_str(&format!(
                "{:?},{},{},{},{},{},{}\n",
                spec.scheme,
                result.power,
                result.trials,
                result.seed,
                result.mse,
                result.crlb,
                result.ambiguous_trials
            ));
        }
        Command::Sweep => {
            let (axis, values) = spec
                .sweep
                .as_ref()
                .ok_or_else(|| invalid("sweep", "sweep command needs an axis and values"))?;
            use rayon::prelude::*;
            let rows: Result<Vec<String>, CliError> = values
                .par_iter()
                .map(|&v| {
                    let s = sweep_scenario(&scenario, *axis, v)?;
                    let (plan, eta) = build_scheme(&s, spec.scheme, &config)?;
                    let crlbs = plan_crlbs(&s, &plan, &eta)?;
                    let crlb = crlbs.iter().fold(0.0f64, |a, &b| a.max(b));
                    let mse = if spec.trials > 0 {
                        let r = monte_carlo(
                            &s,
                            &plan,
                            &eta,
                            spec.trials,
                            spec.seed,
                            RegionMode::Default,
                            &MleConfig::default(),
                        )?;
                        r.mse.to_string()
                    } else {
                        String::new()
                    };
                    Ok(format!(
                        "{:?},{},{:?},{},{},{},{}\n",
                        axis, v, spec.scheme, crlb, mse, spec.trials, spec.seed
                    ))
                })
                .collect();
            csv.push_str("axis,value,scheme,worst_crlb_m2,mse_m2,trials,seed\n");
            for row in rows? {
                csv.push_str(&row);
            }
        }
        Command::Bounds => {
            let k = scenario.num_targets();
            let m = scenario.num_bs();
            let n_none = min_slots(k, m, InterferenceLevel::None);
            let n_full = min_slots(k, m, InterferenceLevel::Full);
            csv.push_str("k,m,n_min,n_min_full,k_max,k_max_full\n");
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                k,
                m,
                n_none,
                n_full,
                max_targets(m, n_none, InterferenceLevel::None),
                max_targets(m, n_none, InterferenceLevel::Full),
            ));
        }
    }

    std::fs::write(&spec.out, csv)?;
    write_manifest(spec)?;
    Ok(())
}

/// Table of active-BS counts over repeated single-target optimizations with
/// random BS placements.
#[derive(Debug, Clone)]
pub struct StatsTable {
    /// (active count, scenarios with that count, smallest active share seen).
    pub rows: Vec<(usize, usize, f64)>,
    pub scenarios: usize,
}

impl StatsTable {
    pub fn fraction_with(&self, count: usize) -> f64 {
        self.rows
            .iter()
            .find(|r| r.0 == count)
            .map_or(0.0, |r| r.1 as f64 / self.scenarios as f64)
    }

    pub fn fraction_at_least(&self, count: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.0 >= count)
            .map(|r| r.1 as f64)
            .sum::<f64>()
            / self.scenarios as f64
    }
}

/// Solves the single-target allocation for `scenarios` random BS placements
/// (uniform in an annulus around the target prior) and histograms the number
/// of BSs receiving more than [`ACTIVE_BS_THRESHOLD`] of the time.
pub fn stats_table(
    template: &Scenario,
    scenarios: usize,
    annulus: (f64, f64),
    seed: u64,
) -> Result<StatsTable, CliError> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    assert!(scenarios >= 100);
    let m = template.num_bs();
    let config = SolverConfig::default();
    let mut counts = vec![0usize; m + 1];
    let mut min_eta = vec![f64::INFINITY; m + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = template.target_priors[0];
    let mut done = 0;
    while done < scenarios {
        let mut s = template.clone();
        for bs in s.bs_positions.iter_mut() {
            let r = rng.gen_range(annulus.0..annulus.1);
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            *bs = (center.0 + r * a.cos(), center.1 + r * a.sin());
        }
        let budgets = match full_budgets(&s) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let gt: Vec<f64> = budgets[0].iter().map(|b| b.gamma_tilde_rate).collect();
        let az: Vec<f64> = budgets[0].iter().map(|b| b.geometry.azimuth).collect();
        let obj = CrlbObjective::new(gt, &az, s.radio.c0);
        let sol = match solve_single(&obj, m, &config) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let active: Vec<f64> = sol
            .allocation
            .eta
            .iter()
            .copied()
            .filter(|&e| e > ACTIVE_BS_THRESHOLD)
            .collect();
        let c = active.len();
        counts[c] += 1;
        for e in active {
            min_eta[c] = min_eta[c].min(e);
        }
        done += 1;
    }
    let rows = (0..=m)
        .filter(|&c| counts[c] > 0)
        .map(|c| (c, counts[c], min_eta[c]))
        .collect();
    Ok(StatsTable { rows, scenarios })
}
