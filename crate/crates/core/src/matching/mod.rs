//! Swap matching of user groups to channels and power levels.
//!
//! Each cell is padded into a balanced market ([`augment_market`]). Players
//! start from a random channel permutation at the lowest power and then take
//! any swap that blocks the current matching, until a full sweep finds none.
//! In a cell with spare channels the affected players' utilities decide;
//! in a crowded cell the affected channels' utilities do.
//!
//! In cooperative mode utilities use the true interference of every cell
//! and co-channel players of other cells must not lose. In
//! non-cooperative mode each cell decides as if it were alone; the result
//! is then scored under the true interference.

mod eval;
mod market;
mod state;

pub use eval::{Evaluator, PlayerValue};
pub use market::{augment_market, Bundle, BundleIter, CellMarket, Market, MarketCase};
pub use state::{CellMatching, Matching, SwapPlan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net_model::{Assignment, LinkBudget};
use crate::scenario::Scenario;
use crate::semantic_model::AccuracyTables;
use crate::symbol_search::{Objective, SymbolChoice};

pub const DEFAULT_ITERATION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingConfig {
    pub objective: Objective,
    pub cooperative: bool,
    /// Maximum number of sweeps.
    pub iteration_cap: usize,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig { objective: Objective::QoEMax, cooperative: true, iteration_cap: DEFAULT_ITERATION_CAP }
    }
}

/// One accepted swap. `delta_utility` is the gain summed over the units that
/// judged it (players or channels); `objective` is the sum of all player
/// utilities afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRecord {
    pub sweep: usize,
    pub cell: usize,
    pub player: usize,
    pub old_bundle: Bundle,
    pub new_bundle: Bundle,
    pub delta_utility: f64,
    pub objective: f64,
}

/// Verdict on one candidate swap.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub plan: SwapPlan,
    pub blocking: bool,
    /// NaN when the check stopped early.
    pub delta_utility: f64,
}

/// Mutable game state: the matching, the evaluator grid and cached
/// utilities.
pub struct Game<'a> {
    eval: Evaluator<'a>,
    matching: Matching,
    values: Vec<Vec<PlayerValue>>,
    cooperative: bool,
    seen: Vec<(usize, usize)>,
}

impl<'a> Game<'a> {
    pub fn new(
        scenario: &'a Scenario,
        market: &'a Market,
        link: &'a LinkBudget,
        tables: &'a AccuracyTables,
        objective: Objective,
        cooperative: bool,
        matching: Matching,
    ) -> Result<Self> {
        if scenario.num_channels > 64 {
            return Err(Error::Config("at most 64 channels are supported".into()));
        }
        let issues = matching.check_invariants(market);
        if !issues.is_empty() {
            return Err(Error::Contract(issues.join("; ")));
        }
        let mut eval = Evaluator::new(scenario, market, link, tables, objective);
        eval.set_isolated(!cooperative);
        eval.load(&matching);
        let mut game = Game { eval, matching, values: Vec::new(), cooperative, seen: Vec::new() };
        game.refresh();
        Ok(game)
    }

    fn refresh(&mut self) {
        let market = self.eval.market();
        self.values = (0..market.num_cells())
            .map(|b| {
                (0..market.cell(b).num_players()).map(|q| self.eval.value(b, q, &self.matching.bundle(b, q))).collect()
            })
            .collect();
    }

    pub fn market(&self) -> &'a Market {
        self.eval.market()
    }

    pub fn matching(&self) -> &Matching {
        &self.matching
    }

    pub fn value(&self, cell: usize, player: usize) -> PlayerValue {
        self.values[cell][player]
    }

    /// Sum of every player's utility, in cell then player order.
    pub fn total_utility(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.utility).sum()
    }

    /// Sum of group QoE, in cell then player order.
    pub fn total_qoe(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.qoe).sum()
    }

    /// Judges `player` in `cell` moving to `new` with the cell's own test.
    pub fn assess(&mut self, cell: usize, player: usize, new: Bundle, early_exit: bool) -> Result<Assessment> {
        let case = self.market().cell(cell).case;
        self.assess_as(cell, player, new, case, early_exit)
    }

    /// Judges a swap with an explicitly chosen test.
    pub fn assess_as(
        &mut self,
        cell: usize,
        player: usize,
        new: Bundle,
        case: MarketCase,
        early_exit: bool,
    ) -> Result<Assessment> {
        let plan = self.matching.plan_swap(self.market(), cell, player, new)?;
        let changed = self.eval.stage(&plan);
        let (blocking, delta_utility) = self.judge(&plan, changed, case, early_exit);
        self.eval.unstage(cell);
        Ok(Assessment { plan, blocking, delta_utility })
    }

    fn judge(&mut self, plan: &SwapPlan, changed: u64, case: MarketCase, early_exit: bool) -> (bool, f64) {
        let cell = plan.cell;
        let cm = self.market().cell(cell);
        let mut weak = true;
        let mut strict = false;
        let mut delta = 0.0;
        let mut compare = |old: f64, new: f64| -> bool {
            if new < old {
                weak = false;
            } else if new > old {
                strict = true;
            }
            delta += new - old;
            weak
        };
        match case {
            MarketCase::Users => {
                for (q, b) in plan.changes() {
                    let new = self.eval.value(cell, q, &b).utility;
                    if !compare(self.values[cell][q].utility, new) && early_exit {
                        return (false, f64::NAN);
                    }
                }
            }
            MarketCase::Channels => {
                let share = |q: usize, c: usize, u: f64| -> f64 {
                    if cm.is_virtual_channel(c) {
                        0.0
                    } else if cm.is_bimodal(q) {
                        u / 2.0
                    } else {
                        u
                    }
                };
                // (channel, old share, new share); a channel left by one
                // changed player is taken by another, so each appears once
                let mut units: [(usize, f64, f64); 6] = [(usize::MAX, 0.0, 0.0); 6];
                let mut n = 0;
                let mut slot = |c: usize, units: &mut [(usize, f64, f64); 6]| -> usize {
                    match units[..n].iter().position(|x| x.0 == c) {
                        Some(i) => i,
                        None => {
                            units[n].0 = c;
                            n += 1;
                            n - 1
                        }
                    }
                };
                for (q, b) in plan.changes() {
                    let new_u = self.eval.value(cell, q, &b).utility;
                    let old_b = self.matching.bundle(cell, q);
                    let old_u = self.values[cell][q].utility;
                    for &c in b.channels() {
                        let i = slot(c, &mut units);
                        units[i].2 = share(q, c, new_u);
                    }
                    for &c in old_b.channels() {
                        let i = slot(c, &mut units);
                        units[i].1 = share(q, c, old_u);
                    }
                }
                let n = units.iter().take_while(|x| x.0 != usize::MAX).count();
                for &(_, old, new) in &units[..n] {
                    if !compare(old, new) && early_exit {
                        return (false, f64::NAN);
                    }
                }
            }
        }
        if self.cooperative && changed != 0 {
            self.seen.clear();
            let market = self.market();
            for b in 0..market.num_cells() {
                if b == cell {
                    continue;
                }
                let mut bits = changed;
                while bits != 0 {
                    let c = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let h = self.matching.cells[b].holder(c);
                    if market.cell(b).is_virtual_player(h) || self.seen.contains(&(b, h)) {
                        continue;
                    }
                    self.seen.push((b, h));
                    let new = self.eval.value(b, h, &self.matching.bundle(b, h)).utility;
                    if !compare(self.values[b][h].utility, new) && early_exit {
                        return (false, f64::NAN);
                    }
                }
            }
        }
        (weak && strict, delta)
    }

    /// Switches to true interference, e.g. to score a non-cooperative result.
    pub fn reveal(&mut self) {
        self.eval.set_isolated(false);
        self.refresh();
    }

    /// Applies an assessed swap and refreshes cached utilities.
    pub fn accept(&mut self, plan: &SwapPlan) {
        self.eval.stage(plan);
        self.matching.apply(plan);
        self.refresh();
    }

    /// Every blocking swap available from the current matching.
    pub fn blocking_swaps(&mut self) -> Result<Vec<(usize, usize, Bundle)>> {
        let market = self.market();
        let mut out = Vec::new();
        for b in 0..market.num_cells() {
            let cm = market.cell(b);
            for q in 0..cm.num_players() {
                for t in cm.bundles(q) {
                    if t != self.matching.bundle(b, q) && self.assess(b, q, t, true)?.blocking {
                        out.push((b, q, t));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Sweeps until no blocking swap remains or the cap is hit.
    pub fn run(&mut self, iteration_cap: usize) -> Result<RunStats> {
        let market = self.market();
        let mut stats = RunStats {
            sweeps: 0,
            swaps: Vec::new(),
            candidates_per_sweep: market.cells.iter().map(|c| vec![0; c.num_players()]).collect(),
            candidates_total: 0,
        };
        loop {
            if stats.sweeps >= iteration_cap {
                return Err(Error::IterationCap { cap: iteration_cap, swaps: stats.swaps.len() });
            }
            stats.sweeps += 1;
            let mut found = false;
            for b in 0..market.num_cells() {
                let cm = market.cell(b);
                for q in 0..cm.num_players() {
                    let mut scanned = 0;
                    for t in cm.bundles(q) {
                        scanned += 1;
                        let current = self.matching.bundle(b, q);
                        if t == current {
                            continue;
                        }
                        let a = self.assess(b, q, t, true)?;
                        if a.blocking {
                            let delta = self.assess(b, q, t, false)?.delta_utility;
                            self.accept(&a.plan);
                            stats.swaps.push(SwapRecord {
                                sweep: stats.sweeps,
                                cell: b,
                                player: q,
                                old_bundle: current,
                                new_bundle: t,
                                delta_utility: delta,
                                objective: self.total_utility(),
                            });
                            found = true;
                        }
                    }
                    if stats.sweeps == 1 {
                        stats.candidates_per_sweep[b][q] = scanned;
                    }
                    stats.candidates_total += scanned as u64;
                }
            }
            if !found {
                break;
            }
        }
        Ok(stats)
    }

    /// Network decisions with optimal symbol counts for feasible groups.
    pub fn assignment(&self) -> Assignment {
        let scenario = self.eval.scenario();
        let mut a = self.matching.to_assignment(scenario, self.market());
        for (b, groups) in scenario.groups.iter().enumerate() {
            for (q, g) in groups.iter().enumerate() {
                let sol = self.eval.solution(b, q, &self.matching.bundle(b, q));
                match (sol.and_then(|s| s.k_star), g) {
                    (Some(SymbolChoice::Single(k)), crate::scenario::GroupSpec::Single { user }) => {
                        a.symbols_of[*user] = Some(k)
                    }
                    (
                        Some(SymbolChoice::Bimodal { text: kt, image: ki }),
                        crate::scenario::GroupSpec::Bimodal { text, image },
                    ) => {
                        a.symbols_of[*text] = Some(kt);
                        a.symbols_of[*image] = Some(ki);
                    }
                    _ => {}
                }
            }
        }
        a
    }
}

/// Bookkeeping of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Sweeps performed, including the final one that found no swap.
    pub sweeps: usize,
    pub swaps: Vec<SwapRecord>,
    /// Candidate bundles enumerated per player in the first sweep.
    pub candidates_per_sweep: Vec<Vec<usize>>,
    pub candidates_total: u64,
}

/// Result of [`run_algorithm1`].
#[derive(Debug, Clone)]
pub struct Outcome {
    pub market: Market,
    pub initial: Matching,
    pub matching: Matching,
    pub assignment: Assignment,
    pub values: Vec<Vec<PlayerValue>>,
    pub objective: f64,
    pub overall_qoe: f64,
    pub stats: RunStats,
}

/// Runs the swap-matching algorithm from the seeded initial matching.
pub fn run_algorithm1(
    scenario: &Scenario,
    link: &LinkBudget,
    tables: &AccuracyTables,
    config: &MatchingConfig,
    seed: u64,
) -> Result<Outcome> {
    let market = augment_market(scenario);
    let initial = Matching::initial(scenario, &market, seed);
    run_from(scenario, &market, link, tables, config, initial)
}

/// Runs the algorithm from an explicit initial matching.
pub fn run_from(
    scenario: &Scenario,
    market: &Market,
    link: &LinkBudget,
    tables: &AccuracyTables,
    config: &MatchingConfig,
    initial: Matching,
) -> Result<Outcome> {
    let mut game = Game::new(scenario, market, link, tables, config.objective, config.cooperative, initial.clone())?;
    let stats = game.run(config.iteration_cap)?;
    game.reveal();
    Ok(Outcome {
        market: market.clone(),
        initial,
        matching: game.matching().clone(),
        assignment: game.assignment(),
        values: game.values.clone(),
        objective: game.total_utility(),
        overall_qoe: game.total_qoe(),
        stats,
    })
}

/// Player-side blocking test: every affected player weakly gains and one
/// strictly gains.
pub fn is_blocking_case1(game: &mut Game<'_>, cell: usize, player: usize, new: Bundle) -> bool {
    game.assess_as(cell, player, new, MarketCase::Users, true).map(|a| a.blocking).unwrap_or(false)
}

/// Channel-side blocking test over the affected players' channels.
pub fn is_blocking_case2(game: &mut Game<'_>, cell: usize, player: usize, new: Bundle) -> bool {
    game.assess_as(cell, player, new, MarketCase::Channels, true).map(|a| a.blocking).unwrap_or(false)
}
