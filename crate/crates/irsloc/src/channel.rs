//! Beam-flattening subarray model and the echo SNR / measurement-variance
//! budget per link.
//!
//! The IRS is split into Q_x × Q_y subarrays whose beams jointly cover the
//! spatial-frequency span of the uncertainty disk; flattening the beam costs a
//! factor Q² in the echo SNR budget.

use crate::geometry::{link_geometry, GeometryError, LinkGeometry, Scenario};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// A link with zero SNR has no finite measurement variance.
    #[error("measurement variance is infinite (zero SNR)")]
    InfiniteVariance,
}

/// Per-link derived radio quantities.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget {
    pub q_x: usize,
    pub q_y: usize,
    /// Total subarray count Q = q_x · q_y.
    pub q: usize,
    /// Baseline echo SNR γ̄ at full dwell (linear).
    pub gamma_bar: f64,
    /// Equivalent SNR rate γ̃ = γ̄·cos²(elevation).
    pub gamma_tilde_rate: f64,
    pub geometry: LinkGeometry,
}

/// Subarray counts covering the given span widths:
/// q = max(1, ⌈√(L·width/2)⌉) per axis. The ceiling guarantees coverage;
/// performance therefore improves in integer steps.
pub fn subarray_counts(
    l_x: usize,
    l_y: usize,
    phi_span: (f64, f64),
    omega_span: (f64, f64),
) -> (usize, usize) {
    let count = |l: usize, width: f64| -> usize {
        let q = (l as f64 * width / 2.0).sqrt().ceil() as usize;
        q.max(1)
    };
    (
        count(l_x, phi_span.1 - phi_span.0),
        count(l_y, omega_span.1 - omega_span.0),
    )
}

fn dirichlet(delta: f64, l_s: f64) -> f64 {
    let half = std::f64::consts::PI * delta / 2.0;
    let denom = half.sin();
    // Removable singularity at Δ = 0 (mod 2): the ratio tends to ±L_s; near
    // zero the limit is +L_s.
    if denom.abs() < 1e-12 {
        l_s * half.cos().signum()
    } else {
        (l_s * half).sin() / denom
    }
}

/// Effective beamforming gain of one subarray at spatial-frequency offsets
/// (ΔΦ, ΔΩ): product of two Dirichlet kernels.
pub fn flattened_gain(delta_phi: f64, delta_omega: f64, l_x_s: usize, l_y_s: usize) -> f64 {
    dirichlet(delta_phi, l_x_s as f64) * dirichlet(delta_omega, l_y_s as f64)
}

/// Beam-center spatial frequencies for `q` subarrays of `l_s` elements
/// covering `[span_lo, span_hi]`: spacing 2/L_s, first center at
/// span_lo + 1/L_s so that the union of beamwidths covers the span.
/// With q = 1 the single center sits at the span midpoint.
pub fn subarray_directions(span_lo: f64, span_hi: f64, q: usize, l_s: usize) -> Vec<f64> {
    if q == 1 {
        return vec![(span_lo + span_hi) / 2.0];
    }
    let step = 2.0 / l_s as f64;
    (0..q)
        .map(|l| span_lo + step / 2.0 + l as f64 * step)
        .collect()
}

/// Full echo-SNR budget for target `k` and BS `m`:
/// γ̄ = p_tx·β₀²·ΔT·L² / (Q²·Δt·d⁴·σ_s²), γ̃ = γ̄·cos²(elevation).
pub fn link_budget(scenario: &Scenario, k: usize, m: usize) -> Result<LinkBudget, ChannelError> {
    let geometry = link_geometry(scenario, k, m)?;
    let (l_x, l_y) = scenario.irs_size;
    let (q_x, q_y) = subarray_counts(l_x, l_y, geometry.phi_span, geometry.omega_span);
    let q = q_x * q_y;
    let l = scenario.irs_elements() as f64;
    let r = &scenario.radio;
    let d = geometry.distance;
    let gamma_bar = r.p_tx * r.beta0 * r.beta0 * r.delta_t_window * l * l
        / (q as f64 * q as f64 * r.delta_t_symbol * d.powi(4) * r.sigma_s2);
    let cos_el = geometry.elevation.cos();
    Ok(LinkBudget {
        q_x,
        q_y,
        q,
        gamma_bar,
        gamma_tilde_rate: gamma_bar * cos_el * cos_el,
        geometry,
    })
}

/// Range-measurement variance σ² = C₀/γ for accumulated SNR γ.
pub fn measurement_variance(gamma: f64, c0: f64) -> Result<f64, ChannelError> {
    if gamma <= 0.0 {
        return Err(ChannelError::InfiniteVariance);
    }
    Ok(c0 / gamma)
}

/// Budgets for every BS toward target `k`.
pub fn all_budgets(scenario: &Scenario, k: usize) -> Result<Vec<LinkBudget>, ChannelError> {
    (0..scenario.num_bs())
        .map(|m| link_budget(scenario, k, m))
        .collect()
}

/// Budgets for every target/BS link, indexed `[target][bs]`.
pub fn full_budgets(scenario: &Scenario) -> Result<Vec<Vec<LinkBudget>>, ChannelError> {
    (0..scenario.num_targets())
        .map(|k| all_budgets(scenario, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadioParams;
    use approx::assert_relative_eq;

    #[test]
    fn subarray_count_exact_square() {
        // √(40·0.2/2) = √4 = 2.
        assert_eq!(subarray_counts(40, 40, (0.0, 0.2), (0.0, 0.0)), (2, 1));
    }

    #[test]
    fn subarray_count_zero_width() {
        assert_eq!(subarray_counts(40, 40, (0.1, 0.1), (0.0, 0.0)).0, 1);
    }

    #[test]
    fn subarray_count_ceiling() {
        // √(40·0.3/2) = √6 ≈ 2.449 → 3.
        assert_eq!(subarray_counts(40, 40, (0.0, 0.3), (0.0, 0.0)).0, 3);
    }

    /// Direct phasor-sum oracle: |Σ_{n=0}^{L−1} e^{iπnΔ}| with the common
    /// phase stripped, signed to match the Dirichlet ratio.
    fn phasor_sum(delta: f64, l: usize) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for n in 0..l {
            let ph = std::f64::consts::PI * n as f64 * delta;
            re += ph.cos();
            im += ph.sin();
        }
        // Rotate by the centroid phase −π(L−1)Δ/2 to obtain the real kernel.
        let c = -std::f64::consts::PI * (l as f64 - 1.0) * delta / 2.0;
        re * c.cos() - im * c.sin()
    }

    #[test]
    fn gain_limit_at_zero() {
        assert_relative_eq!(flattened_gain(0.0, 0.0, 8, 8), 64.0, max_relative = 1e-12);
    }

    #[test]
    fn gain_null_at_two_over_l() {
        let g = flattened_gain(2.0 / 8.0, 0.0, 8, 8);
        assert!(g.abs() < 1e-10, "expected null, got {g}");
    }

    #[test]
    fn gain_matches_phasor_oracle() {
        for &d in &[1.0 / 8.0, 0.03, 0.17, -0.21, 1e-9] {
            let expect = phasor_sum(d, 8) * 8.0;
            let got = flattened_gain(d, 0.0, 8, 8);
            assert_relative_eq!(got, expect, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn gain_even_in_each_argument() {
        let g = flattened_gain(0.07, -0.11, 10, 16);
        assert_relative_eq!(g, flattened_gain(-0.07, -0.11, 10, 16), max_relative = 1e-12);
        assert_relative_eq!(g, flattened_gain(0.07, 0.11, 10, 16), max_relative = 1e-12);
    }

    #[test]
    fn directions_single_center_at_midpoint() {
        assert_eq!(subarray_directions(0.1, 0.3, 1, 20), vec![0.2]);
    }

    #[test]
    fn directions_two_centers_forced_spacing() {
        let c = subarray_directions(0.0, 0.2, 2, 20);
        assert_relative_eq!(c[0], 0.05, max_relative = 1e-12);
        assert_relative_eq!(c[1], 0.15, max_relative = 1e-12);
    }

    #[test]
    fn directions_cover_span() {
        // Every sample of the span lies within half a beamwidth (1/L_s) of a
        // center, for a q chosen by subarray_counts.
        let (lo, hi) = (-0.12f64, 0.18f64);
        let l_x = 40;
        let (q, _) = subarray_counts(l_x, 1, (lo, hi), (0.0, 0.0));
        let l_s = l_x / q;
        let centers = subarray_directions(lo, hi, q, l_s);
        for i in 0..=3600 {
            let v = lo + (hi - lo) * i as f64 / 3600.0;
            let ok = centers.iter().any(|c| (v - c).abs() <= 1.0 / l_s as f64 + 1e-12);
            assert!(ok, "span point {v} not covered");
        }
    }

    fn scenario_single(bs: (f64, f64), r_e: f64) -> Scenario {
        Scenario {
            bs_positions: vec![bs, (0.0, 1e6)],
            target_priors: vec![(0.0, 0.0)],
            h_bs: 5.0,
            h_irs: 1.0,
            r_e,
            irs_size: (40, 40),
            radio: RadioParams {
                beta0: 1e-3,
                sigma_s2: 1e-8,
                p_tx: 1.0,
                delta_t_window: 0.1,
                delta_t_symbol: 1e-6,
                c0: 0.1,
                d_min: 10.0,
            },
        }
    }

    #[test]
    fn gamma_bar_arithmetic_oracle() {
        // γ̄ = 1·(1e-3)²·0.1·1600²/(1·1e-6·10⁴·1e-8) = 2.56e9 at
        // d = 10, Q = 1 (r_e = 0 keeps the spans degenerate).
        let mut s = scenario_single((0.0, 0.0), 0.0);
        // Place the BS so the 3D distance is exactly 10 m with Δh = 4.
        let horiz = (100.0f64 - 16.0).sqrt();
        s.bs_positions[0] = (horiz, 0.0);
        let b = link_budget(&s, 0, 0).unwrap();
        assert_eq!(b.q, 1);
        assert_relative_eq!(b.gamma_bar, 2.56e9, max_relative = 1e-12);
    }

    #[test]
    fn doubling_distance_divides_gamma_by_16() {
        let s1 = scenario_single((100.0, 0.0), 0.0);
        let s2 = {
            let mut s = scenario_single((0.0, 0.0), 0.0);
            // Double the 3D distance exactly.
            let d1 = (100.0f64 * 100.0 + 16.0).sqrt();
            let horiz = (4.0 * d1 * d1 - 16.0).sqrt();
            s.bs_positions[0] = (horiz, 0.0);
            s
        };
        let b1 = link_budget(&s1, 0, 0).unwrap();
        let b2 = link_budget(&s2, 0, 0).unwrap();
        assert_relative_eq!(b1.gamma_bar / b2.gamma_bar, 16.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_elevation_keeps_gamma_tilde_equal() {
        let mut s = scenario_single((100.0, 0.0), 0.0);
        s.h_irs = s.h_bs;
        let b = link_budget(&s, 0, 0).unwrap();
        assert_eq!(b.gamma_tilde_rate, b.gamma_bar);
    }

    #[test]
    fn zero_radius_forces_single_subarray() {
        for &bs in &[(30.0, 40.0), (-200.0, 5.0), (7.0, -9.0)] {
            let s = scenario_single(bs, 0.0);
            let b = link_budget(&s, 0, 0).unwrap();
            assert_eq!(b.q, 1);
        }
    }

    #[test]
    fn variance_is_c0_over_gamma() {
        assert_relative_eq!(measurement_variance(1e3, 0.1).unwrap(), 1e-4, max_relative = 1e-12);
        assert_eq!(measurement_variance(0.0, 0.1), Err(ChannelError::InfiniteVariance));
        // Composition with the allocation: γ = η·γ̄.
        assert_relative_eq!(measurement_variance(0.5 * 2.0, 0.1).unwrap(), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn gamma_decreases_with_q() {
        // Wider disk → larger Q → smaller γ̄ at equal distance.
        let near = scenario_single((60.0, 0.0), 0.0);
        let wide = scenario_single((60.0, 0.0), 40.0);
        let b0 = link_budget(&near, 0, 0).unwrap();
        let b1 = link_budget(&wide, 0, 0).unwrap();
        assert!(b1.q > b0.q);
        assert!(b1.gamma_bar < b0.gamma_bar);
    }
}
