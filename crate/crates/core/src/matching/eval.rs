//! Utilities of players under a matching, with interference from every cell.

use serde::{Deserialize, Serialize};

use super::market::{Bundle, Market};
use super::state::{Matching, SwapPlan};
use crate::net_model::LinkBudget;
use crate::scenario::{GroupSpec, Scenario};
use crate::semantic_model::AccuracyTables;
use crate::symbol_search::{Objective, P1Cache, P1Solution};

/// Utility of one player; `utility` is the matching objective, `qoe` the
/// group QoE at the same symbol counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlayerValue {
    pub utility: f64,
    pub qoe: f64,
    pub feasible: bool,
}

impl PlayerValue {
    fn from_solution(s: &P1Solution) -> Self {
        PlayerValue { utility: s.objective, qoe: s.qoe, feasible: s.feasible }
    }
}

/// Transmitter on one real channel of one cell: `(user, power_mw)`.
type Tx = Option<(usize, f64)>;

/// Player utilities driven by a per-cell, per-channel transmitter grid.
///
/// The grid can be staged with a swap plan, queried, then restored, which
/// keeps candidate evaluation allocation-free.
pub struct Evaluator<'a> {
    scenario: &'a Scenario,
    market: &'a Market,
    link: &'a LinkBudget,
    cache: P1Cache<'a>,
    group_base: Vec<usize>,
    power_mw: Vec<f64>,
    num_real: usize,
    tx: Vec<Tx>,
    saved: Vec<Tx>,
    isolated: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        scenario: &'a Scenario,
        market: &'a Market,
        link: &'a LinkBudget,
        tables: &'a AccuracyTables,
        objective: Objective,
    ) -> Self {
        let groups: Vec<GroupSpec> = scenario.groups.iter().flatten().copied().collect();
        let mut group_base = Vec::with_capacity(scenario.num_cells());
        let mut acc = 0;
        for g in &scenario.groups {
            group_base.push(acc);
            acc += g.len();
        }
        let num_real = scenario.num_channels;
        Evaluator {
            scenario,
            market,
            link,
            cache: P1Cache::new(scenario, tables, objective, groups),
            group_base,
            power_mw: (0..scenario.power_levels_dbm.len()).map(|p| scenario.power_mw(p)).collect(),
            num_real,
            tx: vec![None; scenario.num_cells() * num_real],
            saved: vec![None; num_real],
            isolated: false,
        }
    }

    pub fn market(&self) -> &'a Market {
        self.market
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    /// When set, every cell is evaluated as if the other cells were silent.
    pub fn set_isolated(&mut self, isolated: bool) {
        self.isolated = isolated;
    }

    pub fn objective(&self) -> Objective {
        self.cache.objective()
    }

    /// Rebuilds the transmitter grid from `matching`.
    pub fn load(&mut self, matching: &Matching) {
        self.tx.iter_mut().for_each(|t| *t = None);
        for (b, state) in matching.cells.iter().enumerate() {
            for (q, bundle) in state.bundles.iter().enumerate() {
                self.set_tx(b, q, bundle, true);
            }
        }
    }

    fn set_tx(&mut self, cell: usize, player: usize, bundle: &Bundle, on: bool) {
        let cm = self.market.cell(cell);
        if cm.is_virtual_player(player) || bundle.channels().iter().any(|&c| cm.is_virtual_channel(c)) {
            return;
        }
        let (users, n) = members(&self.scenario.groups[cell][player]);
        for (i, &u) in users[..n].iter().enumerate() {
            let (c, p) = (bundle.channels()[i], bundle.powers()[i]);
            self.tx[cell * self.num_real + c] = on.then(|| (u, self.power_mw[p]));
        }
    }

    /// Applies `plan` to the grid, remembering the previous row of its cell.
    /// Returns a bitmask of real channels whose transmitter changed.
    pub fn stage(&mut self, plan: &SwapPlan) -> u64 {
        let row = plan.cell * self.num_real;
        self.saved.copy_from_slice(&self.tx[row..row + self.num_real]);
        self.set_tx(plan.cell, plan.player, &plan.old, false);
        for d in &plan.displaced {
            self.set_tx(plan.cell, d.0, &d.1, false);
        }
        for (q, b) in plan.changes() {
            self.set_tx(plan.cell, q, &b, true);
        }
        let mut mask = 0u64;
        for c in 0..self.num_real {
            if self.tx[row + c] != self.saved[c] {
                mask |= 1 << c;
            }
        }
        mask
    }

    /// Undoes the last [`Evaluator::stage`] on `cell`.
    pub fn unstage(&mut self, cell: usize) {
        let row = cell * self.num_real;
        self.tx[row..row + self.num_real].copy_from_slice(&self.saved);
    }

    fn member_sinr(&self, cell: usize, user: usize, channel: usize, power: usize) -> f64 {
        let mut interference = 0.0;
        for b in 0..self.group_base.len() {
            if b != cell && !self.isolated {
                if let Some((v, p)) = self.tx[b * self.num_real + channel] {
                    interference += p * self.link.coupling(user, v, channel);
                }
            }
        }
        self.power_mw[power] * self.link.signal_gain(user, channel) / (self.link.noise_mw() + interference)
    }

    /// Utility of `player` holding `bundle`, against the current grid.
    pub fn value(&self, cell: usize, player: usize, bundle: &Bundle) -> PlayerValue {
        let cm = self.market.cell(cell);
        if cm.is_virtual_player(player) || bundle.channels().iter().any(|&c| cm.is_virtual_channel(c)) {
            return PlayerValue::default();
        }
        let gid = self.group_base[cell] + player;
        let tables = self.cache.tables();
        let sol = match (self.scenario.groups[cell][player], *bundle) {
            (GroupSpec::Single { user }, Bundle::Single { channel, power }) => {
                let c = tables.single.cell_index(self.member_sinr(cell, user, channel, power));
                self.cache.get_cells(gid, &[c])
            }
            (GroupSpec::Bimodal { text, image }, Bundle::Pair { channels, powers }) => {
                let ct = tables.single.cell_index(self.member_sinr(cell, text, channels[0], powers[0]));
                let ci = tables.single.cell_index(self.member_sinr(cell, image, channels[1], powers[1]));
                self.cache.get_cells(gid, &[ct, ci])
            }
            _ => unreachable!("bundle shape checked by the market"),
        };
        PlayerValue::from_solution(&sol)
    }

    /// Optimal symbol counts of `player` under the current grid.
    pub fn solution(&self, cell: usize, player: usize, bundle: &Bundle) -> Option<P1Solution> {
        let cm = self.market.cell(cell);
        if cm.is_virtual_player(player) || bundle.channels().iter().any(|&c| cm.is_virtual_channel(c)) {
            return None;
        }
        let (users, n) = members(&self.scenario.groups[cell][player]);
        let sinrs: Vec<f64> = users[..n]
            .iter()
            .zip(bundle.channels())
            .zip(bundle.powers())
            .map(|((&u, &c), &p)| self.member_sinr(cell, u, c, p))
            .collect();
        Some(self.cache.get(self.group_base[cell] + player, &sinrs))
    }

    /// Holder in `cell` of real channel `channel`, if it transmits.
    pub fn transmitter(&self, cell: usize, channel: usize) -> Option<usize> {
        self.tx[cell * self.num_real + channel].map(|t| t.0)
    }
}

fn members(g: &GroupSpec) -> ([usize; 2], usize) {
    match *g {
        GroupSpec::Single { user } => ([user, 0], 1),
        GroupSpec::Bimodal { text, image } => ([text, image], 2),
    }
}
