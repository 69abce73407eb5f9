//! Reference solvers and bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{augment_market, run_algorithm1, Matching, MatchingConfig, Outcome};
use crate::net_model::{sinr, Assignment, ChannelRealization, LinkBudget};
use crate::rng::Purpose;
use crate::scenario::{GroupSpec, Scenario};
use crate::semantic_model::AccuracyTables;
use crate::symbol_search::{solve_p1, GroupTask, Objective, P1Cache, SymbolChoice};

pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;

/// Outcome of an assignment under one objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Sum of group QoE at the chosen symbol counts.
    pub overall_qoe: f64,
    /// Sum of the objective values (QoE or semantic rate).
    pub objective: f64,
    /// Users in groups that meet their thresholds.
    pub served_users: usize,
}

fn group_users(g: &GroupSpec) -> Vec<usize> {
    g.users().collect()
}

fn evaluate_with(
    scenario: &Scenario,
    sinrs: &[f64],
    tables: &AccuracyTables,
    objective: Objective,
    a: &mut Assignment,
) -> Evaluation {
    let mut e = Evaluation { overall_qoe: 0.0, objective: 0.0, served_users: 0 };
    for g in scenario.groups.iter().flatten() {
        let users = group_users(g);
        for &u in &users {
            a.symbols_of[u] = None;
        }
        if users.iter().any(|&u| a.channel_of[u].is_none()) {
            continue;
        }
        let s: Vec<f64> = users.iter().map(|&u| sinrs[u]).collect();
        let sol = solve_p1(GroupTask::of(scenario, g), &s, objective, &scenario.semantic, tables);
        match sol.k_star {
            Some(SymbolChoice::Single(k)) => a.symbols_of[users[0]] = Some(k),
            Some(SymbolChoice::Bimodal { text, image }) => {
                a.symbols_of[users[0]] = Some(text);
                a.symbols_of[users[1]] = Some(image);
            }
            None => {}
        }
        e.overall_qoe += sol.qoe;
        e.objective += sol.objective;
        if sol.feasible {
            e.served_users += users.len();
        }
    }
    e
}

/// Solves symbol counts for every served group and scores the assignment.
/// A group is served when all its members hold a channel.
pub fn evaluate_assignment(
    scenario: &Scenario,
    link: &LinkBudget,
    tables: &AccuracyTables,
    objective: Objective,
    a: &mut Assignment,
) -> Evaluation {
    let sinrs = link.sinrs(scenario, a);
    evaluate_with(scenario, &sinrs, tables, objective, a)
}

/// [`evaluate_assignment`] computing SINRs from the raw channel vectors.
pub fn evaluate_assignment_exact(
    scenario: &Scenario,
    realization: &ChannelRealization,
    tables: &AccuracyTables,
    objective: Objective,
    a: &mut Assignment,
) -> Evaluation {
    let sinrs: Vec<f64> = (0..scenario.num_users()).map(|u| sinr(scenario, a, realization, u)).collect();
    evaluate_with(scenario, &sinrs, tables, objective, a)
}

/// Transmission choices of one cell: `(user, channel, power)` triples.
type CellOption = Vec<(usize, usize, usize)>;

fn cell_option_count(groups: &[GroupSpec], channels: usize, powers: usize) -> u128 {
    // ways[used] over groups processed so far
    let mut ways = vec![0u128; channels + 1];
    ways[0] = 1;
    for g in groups {
        let mut next = ways.clone();
        for used in 0..=channels {
            let w = ways[used];
            if w == 0 {
                continue;
            }
            let free = (channels - used) as u128;
            let p = powers as u128;
            if g.is_bimodal() {
                if used + 2 <= channels {
                    let add = w.saturating_mul(free * (free - 1) * p * p);
                    next[used + 2] = next[used + 2].saturating_add(add);
                }
            } else if used < channels {
                next[used + 1] = next[used + 1].saturating_add(w.saturating_mul(free * p));
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &w| a.saturating_add(w))
}

/// Number of joint leaves the oracle would evaluate.
pub fn oracle_leaf_count(scenario: &Scenario) -> u128 {
    let p = scenario.power_levels_dbm.len();
    scenario
        .groups
        .iter()
        .map(|g| cell_option_count(g, scenario.num_channels, p))
        .fold(1u128, |a, c| a.saturating_mul(c))
}

fn cell_options(groups: &[GroupSpec], channels: usize, powers: usize) -> Vec<CellOption> {
    fn rec(groups: &[GroupSpec], used: &mut Vec<bool>, powers: usize, cur: &mut CellOption, out: &mut Vec<CellOption>) {
        let Some((g, rest)) = groups.split_first() else {
            out.push(cur.clone());
            return;
        };
        rec(rest, used, powers, cur, out);
        let members = group_users(g);
        let m = used.len();
        if members.len() == 1 {
            for c in 0..m {
                if used[c] {
                    continue;
                }
                used[c] = true;
                for p in 0..powers {
                    cur.push((members[0], c, p));
                    rec(rest, used, powers, cur, out);
                    cur.pop();
                }
                used[c] = false;
            }
        } else {
            for c0 in 0..m {
                for c1 in 0..m {
                    if c0 == c1 || used[c0] || used[c1] {
                        continue;
                    }
                    used[c0] = true;
                    used[c1] = true;
                    for p0 in 0..powers {
                        for p1 in 0..powers {
                            cur.push((members[0], c0, p0));
                            cur.push((members[1], c1, p1));
                            rec(rest, used, powers, cur, out);
                            cur.pop();
                            cur.pop();
                        }
                    }
                    used[c0] = false;
                    used[c1] = false;
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(groups, &mut vec![false; channels], powers, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub assignment: Assignment,
    pub evaluation: Evaluation,
    pub leaves: u128,
}

/// Exhaustive search over every channel map, served subset and power
/// vector of every cell jointly, with optimal symbol counts at each leaf.
///
/// Ties keep the first leaf in enumeration order.
pub fn exhaustive_oracle(
    scenario: &Scenario,
    link: &LinkBudget,
    tables: &AccuracyTables,
    objective: Objective,
    cap: u128,
) -> Result<OracleResult> {
    let leaves = oracle_leaf_count(scenario);
    if leaves > cap {
        return Err(Error::TooLarge { leaves, cap });
    }
    let (m, p) = (scenario.num_channels, scenario.power_levels_dbm.len());
    let options: Vec<Vec<CellOption>> = scenario.groups.iter().map(|g| cell_options(g, m, p)).collect();
    let groups: Vec<GroupSpec> = scenario.groups.iter().flatten().copied().collect();
    let cache = P1Cache::new(scenario, tables, objective, groups.clone());
    let power_mw: Vec<f64> = (0..p).map(|i| scenario.power_mw(i)).collect();
    let nu = scenario.num_users();

    let mut index = vec![0usize; options.len()];
    let mut channel_of: Vec<Option<usize>> = vec![None; nu];
    let mut power_of = vec![0usize; nu];
    let mut best: Option<(f64, Vec<usize>)> = None;
    'leaves: loop {
        channel_of.iter_mut().for_each(|c| *c = None);
        for (b, &i) in index.iter().enumerate() {
            for &(u, c, pw) in &options[b][i] {
                channel_of[u] = Some(c);
                power_of[u] = pw;
            }
        }
        let mut value = 0.0;
        for (gid, g) in groups.iter().enumerate() {
            let users = group_users(g);
            if users.iter().any(|&u| channel_of[u].is_none()) {
                continue;
            }
            let mut cells = [0usize; 2];
            for (slot, &u) in users.iter().enumerate() {
                let c = channel_of[u].unwrap();
                let cell = scenario.users[u].cell;
                let interferers = (0..nu).filter_map(|v| {
                    (scenario.users[v].cell != cell && channel_of[v] == Some(c)).then_some((v, power_mw[power_of[v]]))
                });
                cells[slot] = tables.single.cell_index(link.sinr(u, c, power_mw[power_of[u]], interferers));
            }
            value += cache.get_cells(gid, &cells[..users.len()]).objective;
        }
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, index.clone()));
        }
        for b in (0..index.len()).rev() {
            index[b] += 1;
            if index[b] < options[b].len() {
                continue 'leaves;
            }
            index[b] = 0;
        }
        break;
    }
    let (_, index) = best.expect("at least the empty leaf exists");
    let mut assignment = Assignment::empty(nu);
    for (b, &i) in index.iter().enumerate() {
        for &(u, c, pw) in &options[b][i] {
            assignment.channel_of[u] = Some(c);
            assignment.power_of[u] = pw;
        }
    }
    let evaluation = evaluate_assignment(scenario, link, tables, objective, &mut assignment);
    Ok(OracleResult { assignment, evaluation, leaves })
}

/// Uniformly random channel permutation per cell with uniform random power
/// levels; symbol counts are still optimized.
pub fn random_matching(scenario: &Scenario, seed: u64) -> Assignment {
    let market = augment_market(scenario);
    let levels = scenario.power_levels_dbm.len();
    let m = Matching::permuted(&market, seed, Purpose::RandomMatching, |rng| rng.gen_range(0..levels));
    m.to_assignment(scenario, &market)
}

/// Swap matching where every cell decides alone, blind to inter-cell
/// interference in both directions. The returned values and assignment are
/// scored under the true interference.
pub fn no_cooperation_mode(
    scenario: &Scenario,
    link: &LinkBudget,
    tables: &AccuracyTables,
    iteration_cap: usize,
    seed: u64,
) -> Result<Outcome> {
    let config = MatchingConfig { objective: Objective::QoEMax, cooperative: false, iteration_cap };
    run_algorithm1(scenario, link, tables, &config, seed)
}

/// Every servable user scoring 1: `Σ_b min(|U^b|, |M|)`.
pub fn upper_bound(scenario: &Scenario) -> f64 {
    (0..scenario.num_cells()).map(|b| scenario.users_in_cell(b).min(scenario.num_channels) as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_model::{check_assignment, sample_channels};
    use crate::scenario::{sample_scenario, CellGroups, ScenarioConfig};
    use crate::semantic_model::{build_surrogate_tables, SurrogateConfig};

    fn tables() -> AccuracyTables {
        build_surrogate_tables(&SurrogateConfig::default(), &Default::default()).unwrap()
    }

    #[test]
    fn leaf_count_matches_enumeration() {
        let groups = vec![GroupSpec::Bimodal { text: 0, image: 1 }, GroupSpec::Single { user: 2 }];
        for m in 1..5 {
            for p in 1..3 {
                assert_eq!(cell_options(&groups, m, p).len() as u128, cell_option_count(&groups, m, p));
            }
        }
        // unserved, single alone, pair alone on 2 channels with 2 powers
        assert_eq!(cell_option_count(&groups, 2, 2), 1 + 4 + 8);
    }

    #[test]
    fn one_user_one_channel_is_best_power_p1() {
        let cfg =
            ScenarioConfig { num_cells: 1, n_single: 1, n_bimodal: 0, num_channels: 1, ..ScenarioConfig::default() };
        let t = tables();
        for seed in 0..10 {
            let s = sample_scenario(&cfg, seed).unwrap();
            let r = sample_channels(&s, seed);
            let link = LinkBudget::new(&s, &r);
            let o = exhaustive_oracle(&s, &link, &t, Objective::QoEMax, DEFAULT_ORACLE_CAP).unwrap();
            let best = (0..s.power_levels_dbm.len())
                .map(|p| {
                    let g = link.sinr(0, 0, s.power_mw(p), []);
                    solve_p1(GroupTask::of(&s, &s.groups[0][0]), &[g], Objective::QoEMax, &s.semantic, &t).qoe
                })
                .fold(0.0, f64::max);
            assert_eq!(o.evaluation.overall_qoe, best);
            assert_eq!(o.leaves, 1 + 7);
        }
    }

    #[test]
    fn oracle_separates_without_interference() {
        let cfg = ScenarioConfig {
            num_cells: 2,
            n_single: 2,
            n_bimodal: 1,
            num_channels: 2,
            power_levels_dbm: vec![0.0, 20.0],
            groups_per_cell: Some(vec![
                CellGroups { n_single: 1, n_bimodal: 1 },
                CellGroups { n_single: 1, n_bimodal: 0 },
            ]),
            ..ScenarioConfig::default()
        };
        let t = tables();
        for seed in 0..5 {
            let s = sample_scenario(&cfg, seed).unwrap();
            let mut r = sample_channels(&s, seed);
            // cut every cross-cell link
            for u in 0..s.num_users() {
                for b in 0..s.num_cells() {
                    if b != s.users[u].cell {
                        for m in 0..s.num_channels {
                            r.gain_mut(u, b, m).iter_mut().for_each(|h| *h = Default::default());
                        }
                    }
                }
            }
            let link = LinkBudget::new(&s, &r);
            let joint =
                exhaustive_oracle(&s, &link, &t, Objective::QoEMax, DEFAULT_ORACLE_CAP).unwrap().evaluation.overall_qoe;
            let mut sum = 0.0;
            for b in 0..2 {
                let mut cell_only = s.clone();
                for (c, g) in cell_only.groups.iter_mut().enumerate() {
                    if c != b {
                        g.clear();
                    }
                }
                sum += exhaustive_oracle(&cell_only, &link, &t, Objective::QoEMax, DEFAULT_ORACLE_CAP)
                    .unwrap()
                    .evaluation
                    .overall_qoe;
            }
            assert!((joint - sum).abs() < 1e-12, "{joint} vs {sum}");
        }
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let s = sample_scenario(&ScenarioConfig::default(), 1).unwrap();
        let r = sample_channels(&s, 1);
        let link = LinkBudget::new(&s, &r);
        let err = exhaustive_oracle(&s, &link, &tables(), Objective::QoEMax, DEFAULT_ORACLE_CAP).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn random_matching_is_feasible_and_seeded() {
        for seed in 0..20 {
            let cfg = ScenarioConfig { num_channels: 4 + (seed as usize % 5), ..ScenarioConfig::default() };
            let s = sample_scenario(&cfg, seed).unwrap();
            let a = random_matching(&s, seed);
            assert!(check_assignment(&s, &a).is_empty());
            assert_eq!(a, random_matching(&s, seed));
        }
    }

    #[test]
    fn upper_bound_examples() {
        let cfg = ScenarioConfig { n_single: 6, n_bimodal: 3, ..ScenarioConfig::default() };
        let s = sample_scenario(&cfg, 0).unwrap();
        // 4 users per cell, 6 channels
        assert_eq!(upper_bound(&s), 12.0);
        assert_eq!(upper_bound(&s.clone().with_g_th(0.9)), 12.0);
        let crowded = ScenarioConfig { num_channels: 4, ..ScenarioConfig::default() };
        assert_eq!(upper_bound(&sample_scenario(&crowded, 0).unwrap()), 12.0);
    }

    #[test]
    fn fast_and_exact_evaluation_agree() {
        let t = tables();
        for seed in 0..10 {
            let s = sample_scenario(&ScenarioConfig::default(), seed).unwrap();
            let r = sample_channels(&s, seed);
            let link = LinkBudget::new(&s, &r);
            let mut a = random_matching(&s, seed);
            let mut b = a.clone();
            let fast = evaluate_assignment(&s, &link, &t, Objective::QoEMax, &mut a);
            let exact = evaluate_assignment_exact(&s, &r, &t, Objective::QoEMax, &mut b);
            assert!((fast.overall_qoe - exact.overall_qoe).abs() < 1e-9);
            assert_eq!(a, b);
        }
    }
}
