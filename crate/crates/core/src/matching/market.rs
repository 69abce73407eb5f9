//! Per-cell market shape and resource bundles.

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

/// Which side of a cell's market decides swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketCase {
    /// At most as many users as channels: virtual users pad the user side,
    /// players judge swaps by their own utilities.
    Users,
    /// More users than channels: virtual channels pad the channel side,
    /// channels judge swaps.
    Channels,
}

/// Shape of one cell's augmented market.
///
/// Players are numbered bimodal pairs first, then single-modal users, then
/// virtual users. Channels `0..num_real_channels` are real; the rest are
/// virtual and private to the cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMarket {
    pub case: MarketCase,
    pub num_bimodal: usize,
    pub num_groups: usize,
    pub num_virtual_users: usize,
    pub num_real_channels: usize,
    pub num_channels: usize,
    pub num_powers: usize,
}

impl CellMarket {
    pub fn num_players(&self) -> usize {
        self.num_groups + self.num_virtual_users
    }

    pub fn num_virtual_channels(&self) -> usize {
        self.num_channels - self.num_real_channels
    }

    pub fn is_bimodal(&self, player: usize) -> bool {
        player < self.num_bimodal
    }

    pub fn is_virtual_player(&self, player: usize) -> bool {
        player >= self.num_groups
    }

    pub fn is_virtual_channel(&self, channel: usize) -> bool {
        channel >= self.num_real_channels
    }

    /// Candidate bundles of `player` in sweep order.
    pub fn bundles(&self, player: usize) -> BundleIter {
        BundleIter { bimodal: self.is_bimodal(player), channels: self.num_channels, powers: self.num_powers, next: 0 }
    }

    /// Size of `player`'s resource set.
    pub fn bundle_count(&self, player: usize) -> usize {
        let (m, p) = (self.num_channels, self.num_powers);
        if self.is_bimodal(player) {
            m * m.saturating_sub(1) / 2 * p * p
        } else {
            m * p
        }
    }

    /// True if `bundle` has the right shape for `player` and stays in range.
    pub fn admits(&self, player: usize, bundle: &Bundle) -> bool {
        let in_range = bundle.channels().iter().all(|&c| c < self.num_channels)
            && bundle.powers().iter().all(|&p| p < self.num_powers);
        match bundle {
            Bundle::Single { .. } => in_range && !self.is_bimodal(player),
            Bundle::Pair { channels, .. } => in_range && self.is_bimodal(player) && channels[0] != channels[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Market {
    pub cells: Vec<CellMarket>,
}

impl Market {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, cell: usize) -> &CellMarket {
        &self.cells[cell]
    }
}

/// Tags every cell with its case and pads it with virtual entities.
pub fn augment_market(scenario: &Scenario) -> Market {
    let m = scenario.num_channels;
    let cells = (0..scenario.num_cells())
        .map(|b| {
            let users = scenario.users_in_cell(b);
            let groups = scenario.groups[b].len();
            let num_bimodal = scenario.bimodal_in_cell(b);
            let num_powers = scenario.power_levels_dbm.len();
            if users <= m {
                CellMarket {
                    case: MarketCase::Users,
                    num_bimodal,
                    num_groups: groups,
                    num_virtual_users: m - users,
                    num_real_channels: m,
                    num_channels: m,
                    num_powers,
                }
            } else {
                CellMarket {
                    case: MarketCase::Channels,
                    num_bimodal,
                    num_groups: groups,
                    num_virtual_users: 0,
                    num_real_channels: m,
                    num_channels: users,
                    num_powers,
                }
            }
        })
        .collect();
    Market { cells }
}

/// Channels and power indices held by one player.
///
/// A pair bundle puts the text user on `channels[0]` and the image user on
/// `channels[1]`, with matching entries in `powers`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bundle {
    Single { channel: usize, power: usize },
    Pair { channels: [usize; 2], powers: [usize; 2] },
}

impl Bundle {
    pub fn channels(&self) -> &[usize] {
        match self {
            Bundle::Single { channel, .. } => std::slice::from_ref(channel),
            Bundle::Pair { channels, .. } => channels,
        }
    }

    pub fn powers(&self) -> &[usize] {
        match self {
            Bundle::Single { power, .. } => std::slice::from_ref(power),
            Bundle::Pair { powers, .. } => powers,
        }
    }

    pub fn holds(&self, channel: usize) -> bool {
        self.channels().contains(&channel)
    }

    /// Same bundle with `from` replaced by `to`.
    pub fn with_channel_replaced(mut self, from: usize, to: usize) -> Bundle {
        match &mut self {
            Bundle::Single { channel, .. } => {
                if *channel == from {
                    *channel = to;
                }
            }
            Bundle::Pair { channels, .. } => {
                for c in channels.iter_mut().filter(|c| **c == from) {
                    *c = to;
                }
            }
        }
        self
    }
}

/// Lexicographic `(channel, power)` enumeration of a resource set. Pair
/// bundles range over channel pairs `m < m'` with text on `m`.
#[derive(Debug, Clone)]
pub struct BundleIter {
    bimodal: bool,
    channels: usize,
    powers: usize,
    next: usize,
}

impl Iterator for BundleIter {
    type Item = Bundle;

    fn next(&mut self) -> Option<Bundle> {
        let (m, p) = (self.channels, self.powers);
        let i = self.next;
        if !self.bimodal {
            if i >= m * p {
                return None;
            }
            self.next += 1;
            return Some(Bundle::Single { channel: i / p, power: i % p });
        }
        let pairs = m * m.saturating_sub(1) / 2;
        if i >= pairs * p * p {
            return None;
        }
        self.next += 1;
        let (mut pair, pw) = (i / (p * p), i % (p * p));
        let mut a = 0;
        // row a holds pairs (a, a+1..m)
        while pair >= m - 1 - a {
            pair -= m - 1 - a;
            a += 1;
        }
        Some(Bundle::Pair { channels: [a, a + 1 + pair], powers: [pw / p, pw % p] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{sample_scenario, CellGroups, ScenarioConfig};

    fn scenario_with(groups: CellGroups, m: usize) -> Scenario {
        let cfg = ScenarioConfig {
            num_cells: 1,
            num_channels: m,
            n_single: groups.n_single,
            n_bimodal: groups.n_bimodal,
            groups_per_cell: Some(vec![groups]),
            ..ScenarioConfig::default()
        };
        sample_scenario(&cfg, 3).unwrap()
    }

    #[test]
    fn balanced_cell_needs_no_virtual_entities() {
        let s = scenario_with(CellGroups { n_single: 2, n_bimodal: 2 }, 6);
        let c = &augment_market(&s).cells[0];
        assert_eq!(c.case, MarketCase::Users);
        assert_eq!((c.num_virtual_users, c.num_virtual_channels()), (0, 0));
    }

    #[test]
    fn small_cell_gets_virtual_users() {
        let s = scenario_with(CellGroups { n_single: 2, n_bimodal: 1 }, 6);
        let c = &augment_market(&s).cells[0];
        assert_eq!(c.case, MarketCase::Users);
        assert_eq!(c.num_virtual_users, 2);
        assert_eq!(c.num_players(), 5);
    }

    #[test]
    fn crowded_cell_gets_virtual_channels() {
        let s = scenario_with(CellGroups { n_single: 4, n_bimodal: 2 }, 6);
        let c = &augment_market(&s).cells[0];
        assert_eq!(c.case, MarketCase::Channels);
        assert_eq!(c.num_virtual_channels(), 2);
        assert_eq!(c.num_channels, 8);
        assert!(c.is_virtual_channel(6) && !c.is_virtual_channel(5));
    }

    #[test]
    fn bundle_enumeration_is_ordered_and_complete() {
        let c = CellMarket {
            case: MarketCase::Users,
            num_bimodal: 1,
            num_groups: 2,
            num_virtual_users: 0,
            num_real_channels: 5,
            num_channels: 5,
            num_powers: 3,
        };
        let single: Vec<Bundle> = c.bundles(1).collect();
        assert_eq!(single.len(), c.bundle_count(1));
        assert!(single.windows(2).all(|w| w[0] < w[1]));
        let pair: Vec<Bundle> = c.bundles(0).collect();
        assert_eq!(pair.len(), 10 * 9);
        assert_eq!(pair.len(), c.bundle_count(0));
        assert!(pair.windows(2).all(|w| w[0] < w[1]));
        assert!(pair.iter().all(|b| c.admits(0, b) && b.channels()[0] < b.channels()[1]));
        assert_eq!(pair[0], Bundle::Pair { channels: [0, 1], powers: [0, 0] });
        assert_eq!(*pair.last().unwrap(), Bundle::Pair { channels: [3, 4], powers: [2, 2] });
    }

    #[test]
    fn replacing_a_channel() {
        let b = Bundle::Pair { channels: [2, 5], powers: [0, 1] };
        assert_eq!(b.with_channel_replaced(5, 1), Bundle::Pair { channels: [2, 1], powers: [0, 1] });
        assert_eq!(b.with_channel_replaced(4, 1), b);
    }
}
