//! Symbol-count search for one user group at fixed SINRs.
//!
//! Candidates are enumerated exhaustively (at most 20 for a single-modal
//! user, 25 for a bimodal pair), filtered by the score threshold, and the best
//! one is kept. Ties go to the smallest symbol count (lexicographic for
//! pairs).

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::qoe::{accuracy_score, meets_threshold, rate_score, user_qoe, QoEParams};
use crate::scenario::{GroupSpec, Scenario};
use crate::semantic_model::{AccuracyTables, SemanticConstants, TaskRole};

/// Scalar objective a solver maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Group QoE.
    QoEMax,
    /// Semantic transmission rate `Σ φ_u ξ`, in suts/s.
    SRMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolChoice {
    Single(u32),
    Bimodal { text: u32, image: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P1Solution {
    pub k_star: Option<SymbolChoice>,
    /// Group QoE at `k_star`; zero when infeasible.
    pub qoe: f64,
    /// Objective value at `k_star`; equals `qoe` for [`Objective::QoEMax`].
    pub objective: f64,
    pub feasible: bool,
}

impl P1Solution {
    pub const INFEASIBLE: P1Solution = P1Solution { k_star: None, qoe: 0.0, objective: 0.0, feasible: false };
}

/// QoE parameters of a group's members.
#[derive(Debug, Clone, Copy)]
pub enum GroupTask<'a> {
    Single(&'a QoEParams),
    Bimodal { text: &'a QoEParams, image: &'a QoEParams },
}

impl<'a> GroupTask<'a> {
    pub fn of(scenario: &'a Scenario, group: &GroupSpec) -> Self {
        match *group {
            GroupSpec::Single { user } => GroupTask::Single(&scenario.users[user].qoe),
            GroupSpec::Bimodal { text, image } => {
                GroupTask::Bimodal { text: &scenario.users[text].qoe, image: &scenario.users[image].qoe }
            }
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GroupTask::Single(_) => 1,
            GroupTask::Bimodal { .. } => 2,
        }
    }
}

/// Solves the symbol-count problem for linear SINRs `sinrs` (one per member).
pub fn solve_p1(
    task: GroupTask<'_>,
    sinrs: &[f64],
    objective: Objective,
    constants: &SemanticConstants,
    tables: &AccuracyTables,
) -> P1Solution {
    assert_eq!(sinrs.len(), task.arity(), "one SINR per group member");
    let cells: Vec<usize> = sinrs.iter().map(|&s| tables.single.cell_index(s)).collect();
    solve_p1_cells(task, &cells, objective, constants, tables)
}

/// [`solve_p1`] with SINRs already mapped to grid cells.
pub fn solve_p1_cells(
    task: GroupTask<'_>,
    cells: &[usize],
    objective: Objective,
    constants: &SemanticConstants,
    tables: &AccuracyTables,
) -> P1Solution {
    let rate = |role: TaskRole, k: u32| *constants.entropy_suts.get(role) * constants.bandwidth_hz / k as f64;
    let mut best = P1Solution::INFEASIBLE;
    let mut consider = |choice: SymbolChoice, qoe: f64, sr: f64| {
        let value = match objective {
            Objective::QoEMax => qoe,
            Objective::SRMax => sr,
        };
        if !best.feasible || value > best.objective {
            best = P1Solution { k_star: Some(choice), qoe, objective: value, feasible: true };
        }
    };
    match task {
        GroupTask::Single(p) => {
            for &k in &constants.k_set.single_text {
                let Some(ki) = table_index(tables.single.k_set(0), k) else { continue };
                let phi = rate(TaskRole::SingleText, k);
                let xi = tables.single.get(&[ki], &cells[..1]);
                let (gr, ga) = (rate_score(p, phi), accuracy_score(p, xi));
                if meets_threshold(p, gr, ga) {
                    consider(SymbolChoice::Single(k), user_qoe(p, gr, ga), phi * xi);
                }
            }
        }
        GroupTask::Bimodal { text, image } => {
            for &kt in &constants.k_set.bimodal_text {
                let Some(kti) = table_index(tables.bimodal.k_set(0), kt) else { continue };
                let phi_t = rate(TaskRole::BimodalText, kt);
                let gr_t = rate_score(text, phi_t);
                if gr_t < text.g_th {
                    continue;
                }
                for &ki in &constants.k_set.bimodal_image {
                    let Some(kii) = table_index(tables.bimodal.k_set(1), ki) else { continue };
                    let phi_i = rate(TaskRole::BimodalImage, ki);
                    let gr_i = rate_score(image, phi_i);
                    let xi = tables.bimodal.get(&[kti, kii], &cells[..2]);
                    let (ga_t, ga_i) = (accuracy_score(text, xi), accuracy_score(image, xi));
                    if meets_threshold(text, gr_t, ga_t) && meets_threshold(image, gr_i, ga_i) {
                        let qoe = user_qoe(text, gr_t, ga_t) + user_qoe(image, gr_i, ga_i);
                        consider(SymbolChoice::Bimodal { text: kt, image: ki }, qoe, phi_t * xi + phi_i * xi);
                    }
                }
            }
        }
    }
    best
}

fn table_index(ks: &[u32], k: u32) -> Option<usize> {
    ks.binary_search(&k).ok()
}

/// Exact memo of [`solve_p1`] per group, keyed by the members' SINR cells.
///
/// Accuracy is constant within a grid cell, so a cached entry is identical
/// to a fresh solve. The cache is per-thread (`!Sync`).
pub struct P1Cache<'a> {
    scenario: &'a Scenario,
    tables: &'a AccuracyTables,
    objective: Objective,
    groups: Vec<GroupSpec>,
    num_cells: usize,
    slots: Vec<RefCell<Vec<Option<P1Solution>>>>,
}

impl<'a> P1Cache<'a> {
    /// `groups` lists the groups in the order of the ids used for lookups.
    pub fn new(
        scenario: &'a Scenario,
        tables: &'a AccuracyTables,
        objective: Objective,
        groups: Vec<GroupSpec>,
    ) -> Self {
        let num_cells = tables.single.num_cells();
        let slots = groups.iter().map(|g| RefCell::new(vec![None; num_cells.pow(g.size() as u32)])).collect();
        P1Cache { scenario, tables, objective, groups, num_cells, slots }
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn tables(&self) -> &AccuracyTables {
        self.tables
    }

    pub fn get_cells(&self, group: usize, cells: &[usize]) -> P1Solution {
        let flat = cells.iter().fold(0, |acc, &c| acc * self.num_cells + c);
        if let Some(hit) = self.slots[group].borrow()[flat] {
            return hit;
        }
        let spec = self.groups[group];
        let sol = solve_p1_cells(
            GroupTask::of(self.scenario, &spec),
            cells,
            self.objective,
            &self.scenario.semantic,
            self.tables,
        );
        self.slots[group].borrow_mut()[flat] = Some(sol);
        sol
    }

    pub fn get(&self, group: usize, sinrs: &[f64]) -> P1Solution {
        let mut cells = [0usize; 2];
        for (c, &s) in cells.iter_mut().zip(sinrs) {
            *c = self.tables.single.cell_index(s);
        }
        self.get_cells(group, &cells[..sinrs.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic_model::{build_surrogate_tables, AccuracyTable, SurrogateConfig};
    use proptest::prelude::*;

    fn setup() -> (SemanticConstants, AccuracyTables) {
        let c = SemanticConstants::default();
        let t = build_surrogate_tables(&SurrogateConfig::default(), &c).unwrap();
        (c, t)
    }

    fn text_params(w: f64) -> QoEParams {
        QoEParams { w, beta: 0.2, lambda: 55.0, phi_req: 60e3, xi_req: 0.85, g_th: 0.5 }
    }

    fn image_params(w: f64) -> QoEParams {
        QoEParams { w, beta: 0.1, lambda: 55.0, phi_req: 90e3, xi_req: 0.85, g_th: 0.5 }
    }

    fn db(x: f64) -> f64 {
        10f64.powf(x / 10.0)
    }

    /// Independent enumerator straight from the definitions.
    fn brute_force(
        task: GroupTask<'_>,
        sinrs: &[f64],
        objective: Objective,
        c: &SemanticConstants,
        t: &AccuracyTables,
    ) -> (Option<SymbolChoice>, f64) {
        let mut cands: Vec<(SymbolChoice, f64)> = Vec::new();
        match task {
            GroupTask::Single(p) => {
                for &k in &c.k_set.single_text {
                    let phi = crate::semantic_model::semantic_rate(c, TaskRole::SingleText, k).unwrap();
                    let xi = t.single.accuracy(&[k], sinrs).unwrap();
                    let (gr, ga) = (rate_score(p, phi), accuracy_score(p, xi));
                    if gr >= p.g_th && ga >= p.g_th {
                        let v = if objective == Objective::QoEMax {
                            crate::qoe::group_qoe(&[p], &[phi], xi)
                        } else {
                            phi * xi
                        };
                        cands.push((SymbolChoice::Single(k), v));
                    }
                }
            }
            GroupTask::Bimodal { text, image } => {
                for &kt in &c.k_set.bimodal_text {
                    for &ki in &c.k_set.bimodal_image {
                        let pt = crate::semantic_model::semantic_rate(c, TaskRole::BimodalText, kt).unwrap();
                        let pi = crate::semantic_model::semantic_rate(c, TaskRole::BimodalImage, ki).unwrap();
                        let xi = t.bimodal.accuracy(&[kt, ki], sinrs).unwrap();
                        let ok = [(text, pt), (image, pi)]
                            .iter()
                            .all(|(p, phi)| rate_score(p, *phi) >= p.g_th && accuracy_score(p, xi) >= p.g_th);
                        if ok {
                            let v = if objective == Objective::QoEMax {
                                crate::qoe::group_qoe(&[text, image], &[pt, pi], xi)
                            } else {
                                (pt + pi) * xi
                            };
                            cands.push((SymbolChoice::Bimodal { text: kt, image: ki }, v));
                        }
                    }
                }
            }
        }
        let best = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        match cands.iter().find(|c| c.1 == best) {
            Some((k, v)) => (Some(*k), *v),
            None => (None, 0.0),
        }
    }

    #[test]
    fn only_k1_feasible_gives_k1() {
        let c = SemanticConstants {
            k_set: crate::semantic_model::PerRole { single_text: vec![1, 2, 3], ..SemanticConstants::default().k_set },
            ..SemanticConstants::default()
        };
        // accuracy high only for k = 1
        let grid = vec![0.0, 10.0];
        let t = AccuracyTables::new(
            AccuracyTable::new(
                vec![TaskRole::SingleText],
                vec![vec![1, 2, 3]],
                grid.clone(),
                vec![0.9, 0.95, 0.1, 0.2, 0.1, 0.2],
            )
            .unwrap(),
            AccuracyTable::new(
                vec![TaskRole::BimodalText, TaskRole::BimodalImage],
                vec![vec![2], vec![394]],
                grid,
                vec![0.5; 4],
            )
            .unwrap(),
        )
        .unwrap();
        let p = text_params(0.5);
        let sol = solve_p1(GroupTask::Single(&p), &[db(5.0)], Objective::QoEMax, &c, &t);
        assert_eq!(sol.k_star, Some(SymbolChoice::Single(1)));
        assert!(sol.feasible);
    }

    #[test]
    fn rate_only_user_picks_smallest_feasible_k() {
        let (c, t) = setup();
        let p = QoEParams { xi_req: 0.1, ..text_params(1.0) };
        let sol = solve_p1(GroupTask::Single(&p), &[db(30.0)], Objective::QoEMax, &c, &t);
        assert_eq!(sol.k_star, Some(SymbolChoice::Single(1)));
    }

    #[test]
    fn zero_sinr_is_infeasible() {
        let (c, t) = setup();
        let p = text_params(0.5);
        let sol = solve_p1(GroupTask::Single(&p), &[0.0], Objective::QoEMax, &c, &t);
        assert_eq!(sol, P1Solution::INFEASIBLE);
        let (pt, pi) = (text_params(0.5), image_params(0.5));
        let sol = solve_p1(GroupTask::Bimodal { text: &pt, image: &pi }, &[db(30.0), 0.0], Objective::QoEMax, &c, &t);
        assert!(!sol.feasible && sol.qoe == 0.0 && sol.k_star.is_none());
    }

    #[test]
    fn feasible_solution_passes_threshold() {
        let (c, t) = setup();
        let (pt, pi) = (text_params(0.3), image_params(0.6));
        let sol =
            solve_p1(GroupTask::Bimodal { text: &pt, image: &pi }, &[db(25.0), db(22.0)], Objective::QoEMax, &c, &t);
        assert!(sol.feasible);
        let Some(SymbolChoice::Bimodal { text, image }) = sol.k_star else { panic!() };
        let xi = t.bimodal.accuracy(&[text, image], &[db(25.0), db(22.0)]).unwrap();
        for (p, role, k) in [(&pt, TaskRole::BimodalText, text), (&pi, TaskRole::BimodalImage, image)] {
            let phi = crate::semantic_model::semantic_rate(&c, role, k).unwrap();
            assert!(meets_threshold(p, rate_score(p, phi), accuracy_score(p, xi)));
        }
    }

    #[test]
    fn cache_equals_direct_solve() {
        let (c, t) = setup();
        let s = crate::scenario::sample_scenario(&crate::scenario::ScenarioConfig::default(), 1).unwrap();
        let groups: Vec<GroupSpec> = s.groups.iter().flatten().copied().collect();
        let cache = P1Cache::new(&s, &t, Objective::QoEMax, groups.clone());
        for (gid, g) in groups.iter().enumerate() {
            for d in [-20.0, 3.3, 12.7, 18.0, 40.0] {
                let sinrs = vec![db(d); g.size()];
                let direct = solve_p1(GroupTask::of(&s, g), &sinrs, Objective::QoEMax, &c, &t);
                assert_eq!(cache.get(gid, &sinrs), direct);
                assert_eq!(cache.get(gid, &sinrs), direct);
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in 0.0f64..=1.0, w2 in 0.0f64..=1.0, xr in 0.8f64..0.9, g1 in -12.0f64..35.0, g2 in -12.0f64..35.0, gth in 0.3f64..0.9, sr in proptest::bool::ANY) {
            let (c, t) = setup();
            let objective = if sr { Objective::SRMax } else { Objective::QoEMax };
            let p = QoEParams { xi_req: xr, g_th: gth, ..text_params(w) };
            let sol = solve_p1(GroupTask::Single(&p), &[db(g1)], objective, &c, &t);
            let (k, v) = brute_force(GroupTask::Single(&p), &[db(g1)], objective, &c, &t);
            prop_assert_eq!(sol.k_star, k);
            prop_assert!((sol.objective - v).abs() <= 1e-12 * v.abs().max(1.0));

            let pi = QoEParams { xi_req: xr, g_th: gth, ..image_params(w2) };
            let task = GroupTask::Bimodal { text: &p, image: &pi };
            let sol = solve_p1(task, &[db(g1), db(g2)], objective, &c, &t);
            let (k, v) = brute_force(task, &[db(g1), db(g2)], objective, &c, &t);
            prop_assert_eq!(sol.k_star, k);
            prop_assert!((sol.objective - v).abs() <= 1e-9 * v.abs().max(1.0));
            prop_assert_eq!(sol.feasible, k.is_some());
        }

        #[test]
        fn optimum_grows_with_sinr(w in 0.0f64..=1.0, g in -12.0f64..30.0, dg in 0.0f64..10.0) {
            let (c, t) = setup();
            let (pt, pi) = (text_params(w), image_params(1.0 - w));
            let lo = solve_p1(GroupTask::Single(&pt), &[db(g)], Objective::QoEMax, &c, &t);
            let hi = solve_p1(GroupTask::Single(&pt), &[db(g + dg)], Objective::QoEMax, &c, &t);
            prop_assert!(hi.qoe >= lo.qoe);
            let task = GroupTask::Bimodal { text: &pt, image: &pi };
            let lo = solve_p1(task, &[db(g), db(g)], Objective::QoEMax, &c, &t);
            let hi = solve_p1(task, &[db(g + dg), db(g)], Objective::QoEMax, &c, &t);
            prop_assert!(hi.qoe >= lo.qoe);
        }
    }
}
