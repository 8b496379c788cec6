//! BS/target association: interference-graph construction, plan feasibility
//! checking, minimum-CRLB pair selection, greedy slot packing, and the
//! closed-form slot/target counting bounds.

use crate::channel::{ChannelError, LinkBudget};
use crate::crlb::two_bs_optimal;
use crate::geometry::{link_geometry, GeometryError, Scenario};
use crate::polyblock::{
    solve_minmax, solve_single, CrlbObjective, PolyblockError, SolverConfig, TimeAllocation,
    ACTIVE_ETA,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssociationError {
    #[error("target {0}: every BS pair is angularly degenerate")]
    NoFeasiblePair(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Solver(#[from] PolyblockError),
}

/// w[k][m][m'] = true when BS m's flattened beam toward target k also covers
/// BS m', so the two links cannot share a time slot.
#[derive(Debug, Clone)]
pub struct InterferenceGraph {
    pub w: Vec<Vec<Vec<bool>>>,
}

impl InterferenceGraph {
    pub fn interference_free(k: usize, m: usize) -> Self {
        Self {
            w: vec![vec![vec![false; m]; m]; k],
        }
    }

    pub fn fully_interfering(k: usize, m: usize) -> Self {
        let mut g = Self {
            w: vec![vec![vec![true; m]; m]; k],
        };
        for k in 0..g.w.len() {
            for i in 0..m {
                g.w[k][i][i] = false;
            }
        }
        g
    }

    pub fn num_targets(&self) -> usize {
        self.w.len()
    }

    pub fn num_bs(&self) -> usize {
        self.w.first().map_or(0, |t| t.len())
    }
}

/// Two-BS selection for one target with its optimal within-pair time split
/// and the pair's unit-time CRLB.
#[derive(Debug, Clone, Copy)]
pub struct PairChoice {
    pub bs: (usize, usize),
    /// Optimal within-pair fractions (sum to 1).
    pub eta_frac: (f64, f64),
    /// CRLB of the pair when it receives the whole unit of time.
    pub crlb_unit: f64,
}

impl PairChoice {
    /// Normalized ratios η̄ = crlb_unit · fraction used as the packing sort
    /// key.
    pub fn eta_bar(&self) -> (f64, f64) {
        (
            self.crlb_unit * self.eta_frac.0,
            self.crlb_unit * self.eta_frac.1,
        )
    }
}

/// Slot assignment tensor b[k][m][n].
#[derive(Debug, Clone)]
pub struct AssociationPlan {
    pub b: Vec<Vec<Vec<bool>>>,
    pub n_slots: usize,
    pub pair_choice: Vec<Option<(usize, usize)>>,
}

impl AssociationPlan {
    pub fn empty(k: usize, m: usize, n: usize) -> Self {
        Self {
            b: vec![vec![vec![false; n]; m]; k],
            n_slots: n,
            pair_choice: vec![None; k],
        }
    }

    /// Per-target slot of each used BS: `Some(n)` when b[k][m][n] is set.
    pub fn slot_map(&self) -> Vec<Vec<Option<usize>>> {
        self.b
            .iter()
            .map(|per_bs| {
                per_bs
                    .iter()
                    .map(|slots| slots.iter().position(|&v| v))
                    .collect()
            })
            .collect()
    }

    pub fn total_associations(&self) -> usize {
        self.b
            .iter()
            .flat_map(|per_bs| per_bs.iter())
            .map(|slots| slots.iter().filter(|&&v| v).count())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// A target measured by two BSs in one slot.
    TargetDoubleBooked { k: usize, n: usize },
    /// A BS serving two targets in one slot.
    BsDoubleBooked { m: usize, n: usize },
    /// A target/BS link used in more than one slot.
    RepeatedAssociation { k: usize, m: usize },
    /// Links (k, m) and (k', m') share slot n while m's beam toward k covers
    /// m'.
    Interference {
        k: usize,
        m: usize,
        m_prime: usize,
        n: usize,
    },
}

/// Marks link pairs whose beams overlap: w[k][m][m'] = 1 iff the point
/// spatial frequencies of BS m' (seen from target k's prior center) fall
/// inside the 2D footprint of the (k, m) beam, i.e. inside its Φ span and
/// its Ω span simultaneously. A single-axis overlap is not enough: two BSs
/// on opposite sides of a target share the Ω ≈ 0 plane yet can never hear
/// each other's reflection.
pub fn build_interference_graph(scenario: &Scenario) -> Result<InterferenceGraph, GeometryError> {
    let k_count = scenario.num_targets();
    let m_count = scenario.num_bs();
    let mut w = vec![vec![vec![false; m_count]; m_count]; k_count];
    for k in 0..k_count {
        let geoms: Vec<_> = (0..m_count)
            .map(|m| link_geometry(scenario, k, m))
            .collect::<Result<_, _>>()?;
        for m in 0..m_count {
            let (phi_lo, phi_hi) = geoms[m].phi_span;
            let (om_lo, om_hi) = geoms[m].omega_span;
            for mp in 0..m_count {
                if mp == m {
                    continue;
                }
                let (phi, omega) = geoms[mp].point_frequencies();
                let hit = (phi_lo <= phi && phi <= phi_hi) && (om_lo <= omega && omega <= om_hi);
                w[k][m][mp] = hit;
            }
        }
    }
    Ok(InterferenceGraph { w })
}

/// Lists every constraint violation of the plan; empty means feasible.
pub fn check_plan(plan: &AssociationPlan, graph: &InterferenceGraph) -> Vec<Violation> {
    let k_count = plan.b.len();
    let m_count = plan.b.first().map_or(0, |t| t.len());
    let n_count = plan.n_slots;
    let mut out = Vec::new();
    for k in 0..k_count {
        for n in 0..n_count {
            if (0..m_count).filter(|&m| plan.b[k][m][n]).count() > 1 {
                out.push(Violation::TargetDoubleBooked { k, n });
            }
        }
    }
    for m in 0..m_count {
        for n in 0..n_count {
            if (0..k_count).filter(|&k| plan.b[k][m][n]).count() > 1 {
                out.push(Violation::BsDoubleBooked { m, n });
            }
        }
    }
    for k in 0..k_count {
        for m in 0..m_count {
            if plan.b[k][m].iter().filter(|&&v| v).count() > 1 {
                out.push(Violation::RepeatedAssociation { k, m });
            }
        }
    }
    for k in 0..k_count {
        for m in 0..m_count {
            for mp in 0..m_count {
                if mp == m || !graph.w[k][m][mp] {
                    continue;
                }
                for n in 0..n_count {
                    let own = plan.b[k][m][n] as usize;
                    let others: usize = (0..k_count)
                        .filter(|&kp| kp != k)
                        .map(|kp| plan.b[kp][mp][n] as usize)
                        .sum();
                    if own + others > 1 {
                        out.push(Violation::Interference { k, m, m_prime: mp, n });
                    }
                }
            }
        }
    }
    out
}

/// For each target, scans all BS pairs, applies the optimal within-pair time
/// split, and keeps the minimum-CRLB pair (ties to the smallest indices).
pub fn choose_pairs(
    scenario: &Scenario,
    budgets: &[Vec<LinkBudget>],
) -> Result<Vec<PairChoice>, AssociationError> {
    let m_count = scenario.num_bs();
    let c0 = scenario.radio.c0;
    let mut out = Vec::with_capacity(budgets.len());
    for (k, row) in budgets.iter().enumerate() {
        let mut best: Option<PairChoice> = None;
        for i in 0..m_count {
            for j in (i + 1)..m_count {
                let gap = row[i].geometry.azimuth - row[j].geometry.azimuth;
                let split = match two_bs_optimal(
                    row[i].gamma_tilde_rate,
                    row[j].gamma_tilde_rate,
                    gap,
                    c0,
                ) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let (e1, e2, crlb) = split;
                if best.as_ref().map_or(true, |b| crlb < b.crlb_unit) {
                    best = Some(PairChoice {
                        bs: (i, j),
                        eta_frac: (e1, e2),
                        crlb_unit: crlb,
                    });
                }
            }
        }
        out.push(best.ok_or(AssociationError::NoFeasiblePair(k))?);
    }
    Ok(out)
}

/// Greedy first-fit packing: associations sorted ascending by η̄ are placed
/// into the earliest slot keeping the BS free, the target free, and the
/// interference constraint satisfied against every resident; a new slot opens
/// when none fits.
pub fn pack_slots(pairs: &[PairChoice], graph: &InterferenceGraph) -> AssociationPlan {
    let k_count = pairs.len();
    let m_count = graph.num_bs();
    let mut items: Vec<(f64, usize, usize)> = Vec::with_capacity(2 * k_count);
    for (k, p) in pairs.iter().enumerate() {
        let (b1, b2) = p.eta_bar();
        items.push((b1, k, p.bs.0));
        items.push((b2, k, p.bs.1));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    // Residents per slot as (target, bs).
    let mut slots: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut placement: Vec<(usize, usize, usize)> = Vec::new();
    for &(_, k, m) in &items {
        let fits = |residents: &Vec<(usize, usize)>| {
            residents.iter().all(|&(kp, mp)| {
                kp != k && mp != m && !graph.w[k][m][mp] && !graph.w[kp][mp][m]
            })
        };
        match slots.iter().position(fits) {
            Some(n) => {
                slots[n].push((k, m));
                placement.push((k, m, n));
            }
            None => {
                slots.push(vec![(k, m)]);
                placement.push((k, m, slots.len() - 1));
            }
        }
    }
    let mut plan = AssociationPlan::empty(k_count, m_count, slots.len());
    for (k, m, n) in placement {
        plan.b[k][m][n] = true;
    }
    for (k, p) in pairs.iter().enumerate() {
        plan.pair_choice[k] = Some(p.bs);
    }
    plan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceLevel {
    None,
    Full,
}

/// Minimum slot count to localize `k` targets with `m` BSs.
pub fn min_slots(k: usize, m: usize, level: InterferenceLevel) -> usize {
    assert!(k >= 1 && m >= 2);
    match level {
        InterferenceLevel::None => ((2 * k + m - 1) / m).max(2),
        InterferenceLevel::Full => 2 * k,
    }
}

/// Maximum target count localizable in `n` slots with `m` BSs.
pub fn max_targets(m: usize, n: usize, level: InterferenceLevel) -> usize {
    assert!(m >= 2);
    match level {
        InterferenceLevel::None => m * n / 2,
        InterferenceLevel::Full => n / 2,
    }
}

/// Full proposed pipeline: interference graph, minimum-CRLB pair per
/// target, greedy slot packing, then min-max time allocation over the slots.
pub fn proposed_plan(
    scenario: &Scenario,
    budgets: &[Vec<LinkBudget>],
    config: &SolverConfig,
) -> Result<(AssociationPlan, TimeAllocation), AssociationError> {
    let graph = build_interference_graph(scenario)?;
    let pairs = choose_pairs(scenario, budgets)?;
    let plan = pack_slots(&pairs, &graph);
    let gt: Vec<Vec<f64>> = budgets
        .iter()
        .map(|row| row.iter().map(|b| b.gamma_tilde_rate).collect())
        .collect();
    let az: Vec<Vec<f64>> = budgets
        .iter()
        .map(|row| row.iter().map(|b| b.geometry.azimuth).collect())
        .collect();
    let sol = solve_minmax(
        &plan.slot_map(),
        &gt,
        &az,
        plan.n_slots,
        scenario.radio.c0,
        config,
    )?;
    Ok((plan, sol.allocation))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkScheme {
    /// Every BS measures every target on its own slot with equal time.
    Average,
    /// Each target takes its two nearest BSs, packed like the proposed plan.
    Closest,
    /// Each target gets an exclusive slot group with its own optimal split.
    TimeDivision,
}

/// Builds the benchmark association plans with their time allocations.
pub fn benchmark_plan(
    scenario: &Scenario,
    budgets: &[Vec<LinkBudget>],
    scheme: BenchmarkScheme,
    config: &SolverConfig,
) -> Result<(AssociationPlan, TimeAllocation), AssociationError> {
    let k_count = scenario.num_targets();
    let m_count = scenario.num_bs();
    let c0 = scenario.radio.c0;
    match scheme {
        BenchmarkScheme::Average => {
            let n = k_count * m_count;
            let mut plan = AssociationPlan::empty(k_count, m_count, n);
            for k in 0..k_count {
                for m in 0..m_count {
                    plan.b[k][m][k * m_count + m] = true;
                }
            }
            let eta = TimeAllocation::uniform(n);
            Ok((plan, eta))
        }
        BenchmarkScheme::Closest => {
            let mut pairs = Vec::with_capacity(k_count);
            for (k, row) in budgets.iter().enumerate() {
                let mut order: Vec<usize> = (0..m_count).collect();
                order.sort_by(|&a, &b| {
                    row[a].geometry.distance.total_cmp(&row[b].geometry.distance)
                });
                let (i, j) = (order[0].min(order[1]), order[0].max(order[1]));
                let gap = row[i].geometry.azimuth - row[j].geometry.azimuth;
                let (e1, e2, crlb) =
                    two_bs_optimal(row[i].gamma_tilde_rate, row[j].gamma_tilde_rate, gap, c0)
                        .map_err(|_| AssociationError::NoFeasiblePair(k))?;
                pairs.push(PairChoice {
                    bs: (i, j),
                    eta_frac: (e1, e2),
                    crlb_unit: crlb,
                });
            }
            let graph = build_interference_graph(scenario)?;
            let plan = pack_slots(&pairs, &graph);
            let gt: Vec<Vec<f64>> = budgets
                .iter()
                .map(|row| row.iter().map(|b| b.gamma_tilde_rate).collect())
                .collect();
            let az: Vec<Vec<f64>> = budgets
                .iter()
                .map(|row| row.iter().map(|b| b.geometry.azimuth).collect())
                .collect();
            let sol = solve_minmax(&plan.slot_map(), &gt, &az, plan.n_slots, c0, config)?;
            Ok((plan, sol.allocation))
        }
        BenchmarkScheme::TimeDivision => {
            let mut groups: Vec<Vec<(usize, f64)>> = Vec::with_capacity(k_count);
            for row in budgets {
                let gt: Vec<f64> = row.iter().map(|b| b.gamma_tilde_rate).collect();
                let az: Vec<f64> = row.iter().map(|b| b.geometry.azimuth).collect();
                let obj = CrlbObjective::new(gt, &az, c0);
                let sol = solve_single(&obj, m_count, config)?;
                groups.push(
                    sol.allocation
                        .eta
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > ACTIVE_ETA)
                        .map(|(m, &e)| (m, e))
                        .collect(),
                );
            }
            let n: usize = groups.iter().map(|g| g.len()).sum();
            let mut plan = AssociationPlan::empty(k_count, m_count, n);
            let mut eta = Vec::with_capacity(n);
            let mut slot = 0;
            for (k, group) in groups.iter().enumerate() {
                for &(m, e) in group {
                    plan.b[k][m][slot] = true;
                    eta.push(e / k_count as f64);
                    slot += 1;
                }
            }
            let total: f64 = eta.iter().sum();
            eta.iter_mut().for_each(|v| *v /= total);
            Ok((plan, TimeAllocation { eta }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::full_budgets;
    use crate::geometry::RadioParams;
    use approx::assert_relative_eq;

    fn radio() -> RadioParams {
        RadioParams {
            beta0: 1e-3,
            sigma_s2: 1e-8,
            p_tx: 1.0,
            delta_t_window: 0.1,
            delta_t_symbol: 1e-6,
            c0: 0.1,
            d_min: 10.0,
        }
    }

    fn scenario(bs: Vec<(f64, f64)>, targets: Vec<(f64, f64)>, r_e: f64) -> Scenario {
        Scenario {
            bs_positions: bs,
            target_priors: targets,
            h_bs: 5.0,
            h_irs: 1.0,
            r_e,
            irs_size: (40, 40),
            radio: radio(),
        }
    }

    #[test]
    fn opposite_bs_do_not_interfere() {
        let s = scenario(vec![(100.0, 0.0), (-100.0, 0.0)], vec![(0.0, 0.0)], 0.5);
        let g = build_interference_graph(&s).unwrap();
        assert!(!g.w[0][0][1]);
        assert!(!g.w[0][1][0]);
    }

    #[test]
    fn bs_inside_beam_interferes() {
        // BS 1 sits just off the axis from the target to BS 0, at a distance
        // matching the beam's elevation band, inside the wide footprint
        // spanned by the r_e = 20 disk.
        let s = scenario(vec![(200.0, 0.0), (210.0, 4.0)], vec![(0.0, 0.0)], 20.0);
        let g = build_interference_graph(&s).unwrap();
        assert!(g.w[0][0][1]);
    }

    #[test]
    fn zero_radius_distinct_azimuths_no_interference() {
        let s = scenario(
            vec![(100.0, 0.0), (0.0, 100.0), (-50.0, -80.0)],
            vec![(0.0, 0.0)],
            0.0,
        );
        let g = build_interference_graph(&s).unwrap();
        for m in 0..3 {
            for mp in 0..3 {
                if m != mp {
                    assert!(!g.w[0][m][mp]);
                }
            }
        }
    }

    #[test]
    fn empty_plan_has_no_violations() {
        let plan = AssociationPlan::empty(2, 3, 2);
        let g = InterferenceGraph::fully_interfering(2, 3);
        assert!(check_plan(&plan, &g).is_empty());
    }

    #[test]
    fn shared_bs_is_flagged() {
        let mut plan = AssociationPlan::empty(2, 2, 1);
        plan.b[0][1][0] = true;
        plan.b[1][1][0] = true;
        let g = InterferenceGraph::interference_free(2, 2);
        let v = check_plan(&plan, &g);
        assert!(v.contains(&Violation::BsDoubleBooked { m: 1, n: 0 }));
    }

    #[test]
    fn interference_constraint_is_flagged() {
        let mut plan = AssociationPlan::empty(3, 3, 2);
        plan.b[1][1][1] = true;
        plan.b[2][2][1] = true;
        let mut g = InterferenceGraph::interference_free(3, 3);
        g.w[1][1][2] = true;
        let v = check_plan(&plan, &g);
        assert!(v.contains(&Violation::Interference {
            k: 1,
            m: 1,
            m_prime: 2,
            n: 1
        }));
        g.w[1][1][2] = false;
        assert!(check_plan(&plan, &g).is_empty());
    }

    #[test]
    fn target_double_booked_and_repeat_flagged() {
        let mut plan = AssociationPlan::empty(1, 2, 2);
        plan.b[0][0][0] = true;
        plan.b[0][1][0] = true;
        plan.b[0][0][1] = true;
        let g = InterferenceGraph::interference_free(1, 2);
        let v = check_plan(&plan, &g);
        assert!(v.contains(&Violation::TargetDoubleBooked { k: 0, n: 0 }));
        assert!(v.contains(&Violation::RepeatedAssociation { k: 0, m: 0 }));
    }

    #[test]
    fn two_bs_pair_is_forced() {
        let s = scenario(vec![(100.0, 0.0), (0.0, 120.0)], vec![(0.0, 0.0)], 1.0);
        let budgets = full_budgets(&s).unwrap();
        let pairs = choose_pairs(&s, &budgets).unwrap();
        assert_eq!(pairs[0].bs, (0, 1));
        assert_relative_eq!(pairs[0].eta_frac.0 + pairs[0].eta_frac.1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_square_picks_first_adjacent_pair() {
        let s = scenario(
            vec![(100.0, 0.0), (0.0, 100.0), (-100.0, 0.0), (0.0, -100.0)],
            vec![(0.0, 0.0)],
            1.0,
        );
        let budgets = full_budgets(&s).unwrap();
        let pairs = choose_pairs(&s, &budgets).unwrap();
        assert_eq!(pairs[0].bs, (0, 1));
        let gap = budgets[0][0].geometry.azimuth - budgets[0][1].geometry.azimuth;
        assert_relative_eq!(gap.sin().abs(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn chosen_pair_beats_nearest_pair() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let m = 6;
            let bs: Vec<(f64, f64)> = (0..m)
                .map(|_| {
                    let r = rng.gen_range(50.0..1000.0);
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    (r * a.cos(), r * a.sin())
                })
                .collect();
            let s = scenario(bs, vec![(0.0, 0.0)], 2.0);
            let budgets = full_budgets(&s).unwrap();
            let pairs = match choose_pairs(&s, &budgets) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let row = &budgets[0];
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| row[a].geometry.distance.total_cmp(&row[b].geometry.distance));
            let (i, j) = (order[0], order[1]);
            let gap = row[i].geometry.azimuth - row[j].geometry.azimuth;
            if let Ok((_, _, closest)) =
                two_bs_optimal(row[i].gamma_tilde_rate, row[j].gamma_tilde_rate, gap, 0.1)
            {
                assert!(pairs[0].crlb_unit <= closest * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn single_target_needs_two_slots() {
        let pairs = [PairChoice {
            bs: (0, 1),
            eta_frac: (0.5, 0.5),
            crlb_unit: 1.0,
        }];
        let g = InterferenceGraph::interference_free(1, 3);
        let plan = pack_slots(&pairs, &g);
        assert_eq!(plan.n_slots, 2);
        assert_eq!(plan.total_associations(), 2);
        assert!(check_plan(&plan, &g).is_empty());
    }

    #[test]
    fn full_interference_needs_two_k_slots() {
        let pairs: Vec<PairChoice> = (0..3)
            .map(|k| PairChoice {
                bs: (k, (k + 1) % 4),
                eta_frac: (0.5, 0.5),
                crlb_unit: 1.0 + k as f64,
            })
            .collect();
        let g = InterferenceGraph::fully_interfering(3, 4);
        let plan = pack_slots(&pairs, &g);
        assert_eq!(plan.n_slots, 6);
        assert!(check_plan(&plan, &g).is_empty());
    }

    // A K=10, M=4 interference-free instance packed into the counting-bound
    // minimum of 5 slots. Targets 0..4 use BSs (0,1), targets 5..9 use (2,3);
    // η̄ values stage the placements slot by slot: slot g hosts target g on
    // BS0, target (g+1) mod 5 on BS1, target 5+g on BS2, target
    // 5+((g+1) mod 5) on BS3.
    #[test]
    fn balanced_ten_targets_hit_minimum_slots() {
        let mut rank = vec![(0.0, 0.0); 10];
        for g in 0..5usize {
            let base = (4 * g) as f64;
            rank[g].0 = base;
            rank[(g + 1) % 5].1 = base + 1.0;
            rank[5 + g].0 = base + 2.0;
            rank[5 + (g + 1) % 5].1 = base + 3.0;
        }
        let pairs: Vec<PairChoice> = (0..10)
            .map(|k| {
                let bs = if k < 5 { (0, 1) } else { (2, 3) };
                let (a, b) = (rank[k].0 + 1.0, rank[k].1 + 1.0);
                PairChoice {
                    bs,
                    eta_frac: (a / (a + b), b / (a + b)),
                    crlb_unit: a + b,
                }
            })
            .collect();
        let g = InterferenceGraph::interference_free(10, 4);
        let plan = pack_slots(&pairs, &g);
        assert_eq!(plan.n_slots, min_slots(10, 4, InterferenceLevel::None));
        assert_eq!(plan.n_slots, 5);
        assert_eq!(plan.total_associations(), 20);
        assert!(check_plan(&plan, &g).is_empty());
    }

    #[test]
    fn counting_bound_examples() {
        assert_eq!(min_slots(10, 4, InterferenceLevel::None), 5);
        assert_eq!(min_slots(1, 7, InterferenceLevel::None), 2);
        assert_eq!(min_slots(3, 4, InterferenceLevel::Full), 6);
        assert_eq!(max_targets(4, 5, InterferenceLevel::None), 10);
        assert_eq!(max_targets(4, 5, InterferenceLevel::Full), 2);
        // The two bounds are mutually inverse on their boundary.
        for m in 2..=10 {
            for n in 2..=12 {
                let k = max_targets(m, n, InterferenceLevel::None);
                assert!(min_slots(k, m, InterferenceLevel::None) <= n);
            }
        }
    }

    #[test]
    fn random_plans_are_feasible() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let m = rng.gen_range(4..8);
            let k = rng.gen_range(1..5);
            let bs: Vec<(f64, f64)> = (0..m)
                .map(|_| {
                    let r = rng.gen_range(50.0..1000.0);
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    (r * a.cos(), r * a.sin())
                })
                .collect();
            let targets: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)))
                .collect();
            let s = scenario(bs, targets, 2.0);
            let budgets = match full_budgets(&s) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let graph = build_interference_graph(&s).unwrap();
            let pairs = match choose_pairs(&s, &budgets) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let plan = pack_slots(&pairs, &graph);
            assert!(check_plan(&plan, &graph).is_empty());
            assert_eq!(plan.total_associations(), 2 * k);
            assert!(plan.n_slots >= min_slots(k, m, InterferenceLevel::None));
        }
    }

    #[test]
    fn average_benchmark_uniform() {
        let s = scenario(
            vec![(100.0, 0.0), (0.0, 100.0), (-100.0, 0.0), (0.0, -100.0)],
            vec![(0.0, 0.0)],
            1.0,
        );
        let budgets = full_budgets(&s).unwrap();
        let (plan, eta) =
            benchmark_plan(&s, &budgets, BenchmarkScheme::Average, &SolverConfig::default())
                .unwrap();
        assert_eq!(plan.n_slots, 4);
        for v in &eta.eta {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn closest_benchmark_picks_nearest_two() {
        let s = scenario(
            vec![
                (900.0, 0.0),
                (0.0, 800.0),
                (120.0, 10.0),
                (-700.0, 100.0),
                (500.0, 500.0),
                (-30.0, -140.0),
            ],
            vec![(0.0, 0.0)],
            2.0,
        );
        let budgets = full_budgets(&s).unwrap();
        let (plan, eta) =
            benchmark_plan(&s, &budgets, BenchmarkScheme::Closest, &SolverConfig::default())
                .unwrap();
        assert_eq!(plan.pair_choice[0], Some((2, 5)));
        assert_relative_eq!(eta.eta.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn time_division_groups_are_disjoint() {
        let s = scenario(
            vec![(300.0, 0.0), (0.0, 300.0), (-300.0, 0.0), (0.0, -300.0)],
            vec![(10.0, 0.0), (0.0, 10.0), (-10.0, -10.0)],
            1.0,
        );
        let budgets = full_budgets(&s).unwrap();
        let (plan, eta) = benchmark_plan(
            &s,
            &budgets,
            BenchmarkScheme::TimeDivision,
            &SolverConfig::default(),
        )
        .unwrap();
        // Every slot serves exactly one association, so no constraint checks
        // apply across targets.
        for n in 0..plan.n_slots {
            let users: usize = (0..3)
                .map(|k| (0..4).filter(|&m| plan.b[k][m][n]).count())
                .sum();
            assert_eq!(users, 1);
        }
        assert_relative_eq!(eta.eta.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let g = build_interference_graph(&s).unwrap();
        assert!(check_plan(&plan, &g).is_empty());
    }
}
