//! Fisher information and CRLB evaluation: matrix form, simplified closed
//! forms, and the analytic optima for time allocation.

use crate::geometry::RadioParams;
use thiserror::Error;

/// Denominator-collapse threshold relative to the numerator scale; below this
/// the geometry is reported degenerate instead of returning a huge finite
/// value born of catastrophic cancellation.
pub const DEGENERACY_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum CrlbError {
    /// All azimuths equal modulo π: the position is unobservable transversely.
    #[error("degenerate geometry: azimuths collinear")]
    DegenerateGeometry,
    #[error("every allocation entry is zero")]
    AllZeroAllocation,
    #[error("d_min must exceed the BS/IRS height gap")]
    InvalidGeometry,
    #[error("fewer than 2 measurements")]
    TooFewMeasurements,
}

/// One range measurement: link angles plus its variance.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub azimuth: f64,
    pub elevation: f64,
    pub variance: f64,
}

/// The measurements of all BSs with allocated time toward one target.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub entries: Vec<Measurement>,
}

impl MeasurementSet {
    pub fn new(entries: Vec<Measurement>) -> Result<Self, CrlbError> {
        if entries.len() < 2 {
            return Err(CrlbError::TooFewMeasurements);
        }
        Ok(Self { entries })
    }
}

/// CRLB evaluation result.
#[derive(Debug, Clone, Copy)]
pub struct CrlbReport {
    /// tr(FIM⁻¹) in m², or +∞ when degenerate.
    pub value: f64,
    /// The 2×2 FIM as [[a, b], [b, c]].
    pub fim: [[f64; 2]; 2],
    pub degenerate: bool,
}

/// FIM = JᵀΣ⁻¹J with J rows (cosφ·cosφ_el, sinφ·cosφ_el).
pub fn fim(ms: &MeasurementSet) -> [[f64; 2]; 2] {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for e in &ms.entries {
        let ce = e.elevation.cos();
        let ux = e.azimuth.cos() * ce;
        let uy = e.azimuth.sin() * ce;
        let w = 1.0 / e.variance;
        a += ux * ux * w;
        b += ux * uy * w;
        c += uy * uy * w;
    }
    [[a, b], [b, c]]
}

/// Closed-form CRLB: trace of the inverse FIM written as the explicit ratio
/// (A + C) / (A·C − B²), with degeneracy detected when the determinant
/// underflows relative to the numerator scale.
pub fn crlb_closed_form(ms: &MeasurementSet) -> Result<CrlbReport, CrlbError> {
    let f = fim(ms);
    let (a, b, c) = (f[0][0], f[0][1], f[1][1]);
    let num = a + c;
    let det = a * c - b * b;
    if det <= DEGENERACY_THRESHOLD * num * num {
        return Ok(CrlbReport {
            value: f64::INFINITY,
            fim: f,
            degenerate: true,
        });
    }
    Ok(CrlbReport {
        value: num / det,
        fim: f,
        degenerate: false,
    })
}

/// Simplified single-target CRLB for allocation η over BSs with equivalent
/// SNR rates γ̃ and azimuths φ:
///
/// CRLB = C₀·Σ η_mγ̃_m / Σ_{j<i} η_jγ̃_j·η_iγ̃_i·sin²(φ_i−φ_j).
///
/// BSs with η_m = 0 are skipped. Equivalent to `crlb_closed_form` with
/// σ_m² = C₀/(η_mγ̃_m) and zero elevation folded into γ̃.
pub fn crlb_simplified(
    etas: &[f64],
    gamma_tildes: &[f64],
    azimuths: &[f64],
    c0: f64,
) -> Result<f64, CrlbError> {
    assert_eq!(etas.len(), gamma_tildes.len());
    assert_eq!(etas.len(), azimuths.len());
    let mut x = Vec::with_capacity(etas.len());
    let mut ph = Vec::with_capacity(etas.len());
    for i in 0..etas.len() {
        if etas[i] > 0.0 {
            x.push(etas[i] * gamma_tildes[i]);
            ph.push(azimuths[i]);
        }
    }
    if x.is_empty() {
        return Err(CrlbError::AllZeroAllocation);
    }
    let num: f64 = x.iter().sum();
    let mut den = 0.0;
    for i in 0..x.len() {
        for j in 0..i {
            let s = (ph[i] - ph[j]).sin();
            den += x[i] * x[j] * s * s;
        }
    }
    if den <= DEGENERACY_THRESHOLD * num * num {
        return Err(CrlbError::DegenerateGeometry);
    }
    Ok(c0 * num / den)
}

/// Analytic minimum over both BS placement and allocation (flexible
/// deployment at distance `d_min` on a symmetric ring):
///
/// CRLB* = 4·C₀·Δt·d_min⁶·σ_s² / (p_tx·ΔT·β₀²·L²·(d_min² − Δh²)).
pub fn analytic_lower_bound(params: &RadioParams, l: usize, height_gap: f64) -> Result<f64, CrlbError> {
    let d = params.d_min;
    if d <= height_gap {
        return Err(CrlbError::InvalidGeometry);
    }
    let l = l as f64;
    Ok(4.0 * params.c0 * params.delta_t_symbol * d.powi(6) * params.sigma_s2
        / (params.p_tx
            * params.delta_t_window
            * params.beta0
            * params.beta0
            * l
            * l
            * (d * d - height_gap * height_gap)))
}

/// Closed-form optimal two-BS allocation and value:
/// η₁* = √γ̃₂/(√γ̃₁+√γ̃₂), CRLB = C₀(√γ̃₁+√γ̃₂)²/(γ̃₁γ̃₂·sin²Δφ).
pub fn two_bs_optimal(
    gamma1: f64,
    gamma2: f64,
    azimuth_gap: f64,
    c0: f64,
) -> Result<(f64, f64, f64), CrlbError> {
    let s = azimuth_gap.sin();
    if s * s <= DEGENERACY_THRESHOLD {
        return Err(CrlbError::DegenerateGeometry);
    }
    let (r1, r2) = (gamma1.sqrt(), gamma2.sqrt());
    let eta1 = r2 / (r1 + r2);
    let crlb = c0 * (r1 + r2) * (r1 + r2) / (gamma1 * gamma2 * s * s);
    Ok((eta1, 1.0 - eta1, crlb))
}

/// Per-target CRLBs for a multi-target association plan.
///
/// `gamma_rate[k][m]` is the accumulated-SNR rate γ̄ (or γ̃ when elevation is
/// folded) for target k at BS m; `azimuth[k][m]` the link azimuth;
/// `assoc[k][m]` = Some(slot n) when target k uses BS m in slot n. The
/// per-link SNR is η_n·rate. Targets with < 2 associations report +∞.
pub fn crlb_multitarget(
    assoc: &[Vec<Option<usize>>],
    etas: &[f64],
    gamma_tilde: &[Vec<f64>],
    azimuth: &[Vec<f64>],
    c0: f64,
) -> Vec<f64> {
    let k_count = assoc.len();
    let mut out = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut g = Vec::new();
        let mut ph = Vec::new();
        for (m, slot) in assoc[k].iter().enumerate() {
            if let Some(n) = slot {
                if etas[*n] > 0.0 {
                    g.push(etas[*n] * gamma_tilde[k][m]);
                    ph.push(azimuth[k][m]);
                }
            }
        }
        if g.len() < 2 {
            out.push(f64::INFINITY);
            continue;
        }
        let ones = vec![1.0; g.len()];
        out.push(match crlb_simplified(&ones, &g, &ph, c0) {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        });
    }
    out
}
