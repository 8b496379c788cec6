//! Positions, distances, angles, and uncertainty-disk angular spans for every
//! BS/target pair.
//!
//! Targets carry an uncertainty disk of radius `r_e` around their prior
//! center; the spatial-frequency spans of that disk as seen from each BS drive
//! the subarray partitioning in the channel module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of boundary samples used to extremize the spatial frequencies over
/// the uncertainty disk. Sampling error is O((2π/n)²), far below the 1e-4
/// agreement required against the interior-grid oracle.
pub const SPAN_SAMPLES: usize = 3600;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// The BS lies inside the target's uncertainty disk, so the azimuth set
    /// seen from the disk wraps around and the spans are meaningless.
    #[error("BS {bs} lies inside the uncertainty disk of target {target}")]
    DegenerateSpan { target: usize, bs: usize },
    #[error("scenario invalid: {0}")]
    InvalidScenario(String),
}

/// Radio-layer constants shared by every link.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadioParams {
    /// Linear channel power gain at 1 m reference distance.
    pub beta0: f64,
    /// Linear noise power (W).
    pub sigma_s2: f64,
    /// Transmit power (W).
    pub p_tx: f64,
    /// Dwell window ΔT (s).
    pub delta_t_window: f64,
    /// Symbol time Δt (s).
    pub delta_t_symbol: f64,
    /// Estimator variance constant C₀ (m² per unit SNR).
    pub c0: f64,
    /// Minimum BS-target distance (m); used only by the analytic lower bound.
    pub d_min: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("beta0", self.beta0),
            ("sigma_s2", self.sigma_s2),
            ("p_tx", self.p_tx),
            ("delta_T", self.delta_t_window),
            ("delta_t", self.delta_t_symbol),
            ("c0", self.c0),
            ("d_min", self.d_min),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GeometryError::InvalidScenario(format!(
                    "radio.{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.delta_t_symbol > self.delta_t_window {
            return Err(GeometryError::InvalidScenario(
                "radio: delta_t must not exceed delta_T".into(),
            ));
        }
        Ok(())
    }
}

/// Immutable world description: BS and target placement plus radio constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// BS (x, y) positions in meters, all at height `h_bs`.
    pub bs_positions: Vec<(f64, f64)>,
    /// Target prior centers (x, y) in meters, all at IRS height `h_irs`.
    pub target_priors: Vec<(f64, f64)>,
    pub h_bs: f64,
    pub h_irs: f64,
    /// Uncertainty-disk radius around each prior center (m).
    pub r_e: f64,
    /// IRS element counts (L_x, L_y).
    pub irs_size: (usize, usize),
    pub radio: RadioParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.bs_positions.len() < 2 {
            return Err(GeometryError::InvalidScenario(
                "at least 2 BSs required".into(),
            ));
        }
        if self.target_priors.is_empty() {
            return Err(GeometryError::InvalidScenario(
                "at least 1 target required".into(),
            ));
        }
        if !self.h_bs.is_finite() || !self.h_irs.is_finite() {
            return Err(GeometryError::InvalidScenario("heights must be finite".into()));
        }
        if !(self.r_e >= 0.0) {
            return Err(GeometryError::InvalidScenario(format!(
                "r_e must be nonnegative, got {}",
                self.r_e
            )));
        }
        if self.irs_size.0 < 1 || self.irs_size.1 < 1 {
            return Err(GeometryError::InvalidScenario(
                "irs_size components must be >= 1".into(),
            ));
        }
        self.radio.validate()
    }

    /// Total IRS element count L = L_x · L_y.
    pub fn irs_elements(&self) -> usize {
        self.irs_size.0 * self.irs_size.1
    }

    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_targets(&self) -> usize {
        self.target_priors.len()
    }

    /// Height gap |h_bs − h_irs|.
    pub fn height_gap(&self) -> f64 {
        (self.h_bs - self.h_irs).abs()
    }
}

/// Per-link geometry derived from the prior center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// 3D distance (m).
    pub distance: f64,
    /// Azimuth of the BS as seen from the target, radians in (−π, π].
    pub azimuth: f64,
    /// Elevation arcsin(|Δh|/d), radians in [0, π/2).
    pub elevation: f64,
    /// Min/max of Φ = sin(el)·cos(az) over the uncertainty disk.
    pub phi_span: (f64, f64),
    /// Min/max of Ω = sin(el)·sin(az) over the uncertainty disk.
    pub omega_span: (f64, f64),
}

impl LinkGeometry {
    pub fn phi_width(&self) -> f64 {
        self.phi_span.1 - self.phi_span.0
    }

    pub fn omega_width(&self) -> f64 {
        self.omega_span.1 - self.omega_span.0
    }

    /// Point spatial frequencies (Φ, Ω) at the prior center.
    pub fn point_frequencies(&self) -> (f64, f64) {
        (
            self.elevation.sin() * self.azimuth.cos(),
            self.elevation.sin() * self.azimuth.sin(),
        )
    }
}

fn spatial_frequencies(bs: (f64, f64), at: (f64, f64), dh: f64) -> (f64, f64) {
    let dx = bs.0 - at.0;
    let dy = bs.1 - at.1;
    let d = (dx * dx + dy * dy + dh * dh).sqrt();
    let sin_el = if d > 0.0 { dh / d } else { 0.0 };
    let az = dy.atan2(dx);
    (sin_el * az.cos(), sin_el * az.sin())
}

/// Min/max of Φ and Ω as the true target location ranges over the uncertainty
/// disk. Both functions are smooth over the (convex) disk, so the extrema lie
/// on the boundary; the center is included as a safety sample.
pub fn compute_spans(
    scenario: &Scenario,
    k: usize,
    m: usize,
) -> Result<((f64, f64), (f64, f64)), GeometryError> {
    let bs = scenario.bs_positions[m];
    let center = scenario.target_priors[k];
    let dh = scenario.height_gap();
    let r = scenario.r_e;

    let dx = bs.0 - center.0;
    let dy = bs.1 - center.1;
    if (dx * dx + dy * dy).sqrt() < r {
        return Err(GeometryError::DegenerateSpan { target: k, bs: m });
    }

    let (p0, o0) = spatial_frequencies(bs, center, dh);
    let (mut pmin, mut pmax) = (p0, p0);
    let (mut omin, mut omax) = (o0, o0);
    if r > 0.0 {
        for i in 0..SPAN_SAMPLES {
            let th = 2.0 * std::f64::consts::PI * i as f64 / SPAN_SAMPLES as f64;
            let at = (center.0 + r * th.cos(), center.1 + r * th.sin());
            let (p, o) = spatial_frequencies(bs, at, dh);
            pmin = pmin.min(p);
            pmax = pmax.max(p);
            omin = omin.min(o);
            omax = omax.max(o);
        }
    }
    Ok(((pmin, pmax), (omin, omax)))
}

/// Full per-link geometry for target `k` and BS `m`.
pub fn link_geometry(scenario: &Scenario, k: usize, m: usize) -> Result<LinkGeometry, GeometryError> {
    let bs = scenario.bs_positions[m];
    let center = scenario.target_priors[k];
    let dh = scenario.height_gap();
    let dx = bs.0 - center.0;
    let dy = bs.1 - center.1;
    let distance = (dx * dx + dy * dy + dh * dh).sqrt();
    let azimuth = dy.atan2(dx);
    let elevation = if distance > 0.0 {
        (dh / distance).asin()
    } else {
        0.0
    };
    let (phi_span, omega_span) = compute_spans(scenario, k, m)?;
    Ok(LinkGeometry {
        distance,
        azimuth,
        elevation,
        phi_span,
        omega_span,
    })
}
