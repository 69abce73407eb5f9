//! Matching state and the swap operation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::market::{Bundle, Market};
use crate::error::{Error, Result};
use crate::net_model::Assignment;
use crate::rng::{stream, Purpose};
use crate::scenario::{GroupSpec, Scenario};

/// One cell's player-to-bundle map. Every channel of the augmented market
/// is held by exactly one player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMatching {
    pub bundles: Vec<Bundle>,
    /// `holder[m]` is the player holding channel `m`.
    holder: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub cells: Vec<CellMatching>,
}

/// A resolved swap inside one cell: the mover's new bundle plus every
/// same-cell player displaced from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapPlan {
    pub cell: usize,
    pub player: usize,
    pub old: Bundle,
    pub new: Bundle,
    /// `(player, old bundle, new bundle)` for each displaced player.
    pub displaced: Vec<(usize, Bundle, Bundle)>,
}

impl SwapPlan {
    /// Every `(player, new bundle)` change, mover first.
    pub fn changes(&self) -> impl Iterator<Item = (usize, Bundle)> + '_ {
        std::iter::once((self.player, self.new)).chain(self.displaced.iter().map(|d| (d.0, d.2)))
    }
}

fn lowest_power(scenario: &Scenario) -> usize {
    let p = &scenario.power_levels_dbm;
    (0..p.len()).min_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0)
}

impl CellMatching {
    fn from_bundles(bundles: Vec<Bundle>, num_channels: usize) -> Result<Self> {
        let mut holder = vec![usize::MAX; num_channels];
        for (q, b) in bundles.iter().enumerate() {
            for &c in b.channels() {
                if c >= num_channels || holder[c] != usize::MAX {
                    return Err(Error::Contract(format!("channel {c} out of range or held twice")));
                }
                holder[c] = q;
            }
        }
        if let Some(c) = holder.iter().position(|&h| h == usize::MAX) {
            return Err(Error::Contract(format!("channel {c} is not held")));
        }
        Ok(CellMatching { bundles, holder })
    }

    pub fn holder(&self, channel: usize) -> usize {
        self.holder[channel]
    }
}

impl Matching {
    /// Seeded random channel permutation per cell at the lowest power level.
    /// Players take consecutive permutation entries; pairs take two.
    pub fn initial(scenario: &Scenario, market: &Market, seed: u64) -> Self {
        let p = lowest_power(scenario);
        Self::permuted(market, seed, Purpose::InitialMatching, |_| p)
    }

    pub(crate) fn permuted(
        market: &Market,
        seed: u64,
        purpose: Purpose,
        mut power: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> usize,
    ) -> Self {
        let cells = market
            .cells
            .iter()
            .enumerate()
            .map(|(b, cm)| {
                let mut rng = stream(seed, purpose, b as u64);
                let mut perm: Vec<usize> = (0..cm.num_channels).collect();
                perm.shuffle(&mut rng);
                let mut next = perm.into_iter();
                let bundles: Vec<Bundle> = (0..cm.num_players())
                    .map(|q| {
                        if cm.is_bimodal(q) {
                            let channels = [next.next().unwrap(), next.next().unwrap()];
                            let powers = [power(&mut rng), power(&mut rng)];
                            Bundle::Pair { channels, powers }
                        } else {
                            Bundle::Single { channel: next.next().unwrap(), power: power(&mut rng) }
                        }
                    })
                    .collect();
                CellMatching::from_bundles(bundles, cm.num_channels).expect("augmented market covers every channel")
            })
            .collect();
        Matching { cells }
    }

    /// Builds a matching from explicit bundles, checking coverage.
    pub fn from_bundles(market: &Market, bundles: Vec<Vec<Bundle>>) -> Result<Self> {
        if bundles.len() != market.num_cells() {
            return Err(Error::Contract("one bundle list per cell required".into()));
        }
        let cells = bundles
            .into_iter()
            .zip(&market.cells)
            .map(|(b, cm)| {
                if b.len() != cm.num_players() {
                    return Err(Error::Contract(format!("{} bundles for {} players", b.len(), cm.num_players())));
                }
                if let Some(q) = (0..b.len()).find(|&q| !cm.admits(q, &b[q])) {
                    return Err(Error::Contract(format!("bundle {:?} not admissible for player {q}", b[q])));
                }
                CellMatching::from_bundles(b, cm.num_channels)
            })
            .collect::<Result<_>>()?;
        Ok(Matching { cells })
    }

    pub fn bundle(&self, cell: usize, player: usize) -> Bundle {
        self.cells[cell].bundles[player]
    }

    pub fn bundles(&self) -> Vec<Vec<Bundle>> {
        self.cells.iter().map(|c| c.bundles.clone()).collect()
    }

    /// Resolves `player` in `cell` moving to `new`. Same-cell holders of the
    /// new channels take the vacated ones in order and keep their powers.
    pub fn plan_swap(&self, market: &Market, cell: usize, player: usize, new: Bundle) -> Result<SwapPlan> {
        let cm = market.cell(cell);
        if !cm.admits(player, &new) {
            return Err(Error::Contract(format!("bundle {new:?} not in player {player}'s resource set")));
        }
        let state = &self.cells[cell];
        let old = state.bundles[player];
        if old == new {
            return Err(Error::Contract("swap must change the bundle".into()));
        }
        let taken: Vec<usize> = new.channels().iter().copied().filter(|c| !old.holds(*c)).collect();
        let freed: Vec<usize> = old.channels().iter().copied().filter(|c| !new.holds(*c)).collect();
        debug_assert_eq!(taken.len(), freed.len());
        let mut displaced: Vec<(usize, Bundle, Bundle)> = Vec::new();
        for (&from, &to) in taken.iter().zip(&freed) {
            let h = state.holder[from];
            match displaced.iter_mut().find(|d| d.0 == h) {
                Some(d) => d.2 = d.2.with_channel_replaced(from, to),
                None => {
                    let b = state.bundles[h];
                    displaced.push((h, b, b.with_channel_replaced(from, to)));
                }
            }
        }
        for d in &displaced {
            if !cm.admits(d.0, &d.2) {
                return Err(Error::Contract(format!("displaced player {} cannot take {:?}", d.0, d.2)));
            }
        }
        Ok(SwapPlan { cell, player, old, new, displaced })
    }

    pub fn apply(&mut self, plan: &SwapPlan) {
        let state = &mut self.cells[plan.cell];
        for (q, b) in plan.changes() {
            state.bundles[q] = b;
            for &c in b.channels() {
                state.holder[c] = q;
            }
        }
    }

    /// Plans and applies a swap; on error the matching is unchanged.
    pub fn apply_swap(&mut self, market: &Market, cell: usize, player: usize, new: Bundle) -> Result<SwapPlan> {
        let plan = self.plan_swap(market, cell, player, new)?;
        self.apply(&plan);
        Ok(plan)
    }

    /// Players whose channels appear in `old` or `new`: same-cell holders
    /// of those channels (the displacement happens inside the cell) and
    /// every other cell's holders of the real ones.
    pub fn affected_set(&self, market: &Market, cell: usize, old: &Bundle, new: &Bundle) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        let mut push = |x: (usize, usize)| {
            if !out.contains(&x) {
                out.push(x);
            }
        };
        for &c in old.channels().iter().chain(new.channels()) {
            push((cell, self.cells[cell].holder[c]));
        }
        for &c in old.channels().iter().chain(new.channels()) {
            if market.cell(cell).is_virtual_channel(c) {
                continue;
            }
            for (b, state) in self.cells.iter().enumerate() {
                if b != cell {
                    push((b, state.holder[c]));
                }
            }
        }
        out
    }

    /// Structural invariant violations; empty when well-formed.
    pub fn check_invariants(&self, market: &Market) -> Vec<String> {
        let mut out = Vec::new();
        if self.cells.len() != market.num_cells() {
            out.push("cell count mismatch".to_string());
            return out;
        }
        for (b, (state, cm)) in self.cells.iter().zip(&market.cells).enumerate() {
            if state.bundles.len() != cm.num_players() {
                out.push(format!("cell {b}: {} bundles for {} players", state.bundles.len(), cm.num_players()));
                continue;
            }
            let mut count = vec![0usize; cm.num_channels];
            for (q, bundle) in state.bundles.iter().enumerate() {
                if !cm.admits(q, bundle) {
                    out.push(format!("cell {b}: player {q} holds inadmissible {bundle:?}"));
                    continue;
                }
                for &c in bundle.channels() {
                    count[c] += 1;
                    if state.holder[c] != q {
                        out.push(format!("cell {b}: holder index of channel {c} is stale"));
                    }
                }
            }
            for (c, &n) in count.iter().enumerate() {
                if n != 1 {
                    out.push(format!("cell {b}: channel {c} held {n} times"));
                }
            }
        }
        out
    }

    /// Network decisions implied by the matching (symbol counts unset).
    /// A group touching a virtual channel is unserved and does not transmit.
    pub fn to_assignment(&self, scenario: &Scenario, market: &Market) -> Assignment {
        let mut a = Assignment::empty(scenario.num_users());
        for (b, state) in self.cells.iter().enumerate() {
            let cm = market.cell(b);
            for (q, g) in scenario.groups[b].iter().enumerate() {
                let bundle = state.bundles[q];
                if bundle.channels().iter().any(|&c| cm.is_virtual_channel(c)) {
                    continue;
                }
                let users: Vec<usize> = match *g {
                    GroupSpec::Single { user } => vec![user],
                    GroupSpec::Bimodal { text, image } => vec![text, image],
                };
                for ((u, &c), &p) in users.into_iter().zip(bundle.channels()).zip(bundle.powers()) {
                    a.channel_of[u] = Some(c);
                    a.power_of[u] = p;
                }
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::market::{augment_market, CellMarket, MarketCase};
    use crate::scenario::{sample_scenario, ScenarioConfig};

    fn toy_market(pairs: usize, singles: usize, virtual_users: usize, channels: usize) -> Market {
        Market {
            cells: vec![CellMarket {
                case: MarketCase::Users,
                num_bimodal: pairs,
                num_groups: pairs + singles,
                num_virtual_users: virtual_users,
                num_real_channels: channels,
                num_channels: channels,
                num_powers: 2,
            }],
        }
    }

    #[test]
    fn initial_matching_properties() {
        let s = sample_scenario(&ScenarioConfig::default(), 5).unwrap();
        let market = augment_market(&s);
        let m = Matching::initial(&s, &market, 9);
        assert!(m.check_invariants(&market).is_empty());
        assert!(m.cells.iter().flat_map(|c| &c.bundles).all(|b| b.powers().iter().all(|&p| p == 0)));
        assert_eq!(m, Matching::initial(&s, &market, 9));
        assert_ne!(m, Matching::initial(&s, &market, 10));
    }

    #[test]
    fn power_only_swap_displaces_nobody() {
        let market = toy_market(0, 2, 0, 2);
        let mut m = Matching::from_bundles(
            &market,
            vec![vec![Bundle::Single { channel: 0, power: 0 }, Bundle::Single { channel: 1, power: 0 }]],
        )
        .unwrap();
        let plan = m.apply_swap(&market, 0, 0, Bundle::Single { channel: 0, power: 1 }).unwrap();
        assert!(plan.displaced.is_empty());
        assert_eq!(m.bundle(0, 1), Bundle::Single { channel: 1, power: 0 });
    }

    #[test]
    fn singles_exchange_channels_and_keep_powers() {
        let market = toy_market(0, 2, 0, 2);
        let mut m = Matching::from_bundles(
            &market,
            vec![vec![Bundle::Single { channel: 0, power: 0 }, Bundle::Single { channel: 1, power: 1 }]],
        )
        .unwrap();
        m.apply_swap(&market, 0, 0, Bundle::Single { channel: 1, power: 0 }).unwrap();
        assert_eq!(m.bundle(0, 1), Bundle::Single { channel: 0, power: 1 });
        assert!(m.check_invariants(&market).is_empty());
    }

    #[test]
    fn pair_moving_onto_two_singles() {
        // channels 0..4: pair on (0, 1), singles on 2 and 3
        let market = toy_market(1, 2, 0, 4);
        let mut m = Matching::from_bundles(
            &market,
            vec![vec![
                Bundle::Pair { channels: [0, 1], powers: [0, 1] },
                Bundle::Single { channel: 2, power: 1 },
                Bundle::Single { channel: 3, power: 0 },
            ]],
        )
        .unwrap();
        let plan = m.apply_swap(&market, 0, 0, Bundle::Pair { channels: [2, 3], powers: [1, 1] }).unwrap();
        assert_eq!(plan.displaced.len(), 2);
        assert_eq!(m.bundle(0, 1), Bundle::Single { channel: 0, power: 1 });
        assert_eq!(m.bundle(0, 2), Bundle::Single { channel: 1, power: 0 });
        assert!(m.check_invariants(&market).is_empty());
    }

    #[test]
    fn pair_displacing_another_pair_on_both_channels() {
        let market = toy_market(2, 0, 0, 4);
        let mut m = Matching::from_bundles(
            &market,
            vec![vec![
                Bundle::Pair { channels: [0, 1], powers: [0, 0] },
                Bundle::Pair { channels: [3, 2], powers: [1, 0] },
            ]],
        )
        .unwrap();
        m.apply_swap(&market, 0, 0, Bundle::Pair { channels: [2, 3], powers: [0, 0] }).unwrap();
        assert_eq!(m.bundle(0, 1), Bundle::Pair { channels: [1, 0], powers: [1, 0] });
        assert!(m.check_invariants(&market).is_empty());
    }

    #[test]
    fn invalid_swaps_leave_state_unchanged() {
        let market = toy_market(1, 1, 1, 4);
        let mut m = Matching::from_bundles(
            &market,
            vec![vec![
                Bundle::Pair { channels: [0, 1], powers: [0, 0] },
                Bundle::Single { channel: 2, power: 0 },
                Bundle::Single { channel: 3, power: 0 },
            ]],
        )
        .unwrap();
        let before = m.clone();
        assert!(m.apply_swap(&market, 0, 0, Bundle::Single { channel: 2, power: 0 }).is_err());
        assert!(m.apply_swap(&market, 0, 1, Bundle::Single { channel: 9, power: 0 }).is_err());
        assert!(m.apply_swap(&market, 0, 1, Bundle::Single { channel: 2, power: 0 }).is_err());
        assert_eq!(m, before);
    }

    #[test]
    fn affected_set_matches_a_full_scan() {
        for seed in 0..20 {
            let s = sample_scenario(&ScenarioConfig::default(), seed).unwrap();
            let market = augment_market(&s);
            let m = Matching::initial(&s, &market, seed);
            for (b, cm) in market.cells.iter().enumerate() {
                for q in 0..cm.num_players() {
                    let old = m.bundle(b, q);
                    for new in cm.bundles(q).step_by(37) {
                        let got = m.affected_set(&market, b, &old, &new);
                        let chans: Vec<usize> = old.channels().iter().chain(new.channels()).copied().collect();
                        let mut expect: Vec<(usize, usize)> = Vec::new();
                        for (b2, c2) in m.cells.iter().enumerate() {
                            for (q2, bundle) in c2.bundles.iter().enumerate() {
                                if bundle.channels().iter().any(|c| chans.contains(c)) {
                                    expect.push((b2, q2));
                                }
                            }
                        }
                        let mut got_sorted = got.clone();
                        got_sorted.sort();
                        assert_eq!(got_sorted, expect);
                        assert!(got.contains(&(b, q)));
                    }
                }
            }
        }
    }

    #[test]
    fn assignment_drops_groups_on_virtual_channels() {
        let cfg =
            ScenarioConfig { num_cells: 1, num_channels: 2, n_single: 1, n_bimodal: 1, ..ScenarioConfig::default() };
        let s = sample_scenario(&cfg, 1).unwrap();
        let market = augment_market(&s);
        assert_eq!(market.cells[0].num_channels, 3);
        let m = Matching::from_bundles(
            &market,
            vec![vec![Bundle::Pair { channels: [0, 2], powers: [0, 0] }, Bundle::Single { channel: 1, power: 1 }]],
        )
        .unwrap();
        let a = m.to_assignment(&s, &market);
        assert_eq!(a.channel_of, vec![None, None, Some(1)]);
        assert!(crate::net_model::check_assignment(&s, &a).is_empty());
    }
}
