#![allow(dead_code)]

use semqoe::matching::{augment_market, Game, Market, Matching};
use semqoe::net_model::{sample_channels, LinkBudget};
use semqoe::scenario::{sample_scenario, CellGroups, Scenario, ScenarioConfig};
use semqoe::semantic_model::{build_surrogate_tables, AccuracyTables, SurrogateConfig};
use semqoe::symbol_search::Objective;

/// Everything a game borrows, kept alive together.
pub struct Fixture {
    pub scenario: Scenario,
    pub link: LinkBudget,
    pub tables: AccuracyTables,
    pub market: Market,
}

impl Fixture {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Self {
        let scenario = sample_scenario(cfg, seed).unwrap();
        let link = LinkBudget::new(&scenario, &sample_channels(&scenario, seed ^ 0x5eed));
        let tables = build_surrogate_tables(&SurrogateConfig::default(), &scenario.semantic).unwrap();
        let market = augment_market(&scenario);
        Fixture { scenario, link, tables, market }
    }

    pub fn game(&self, matching: Matching, cooperative: bool) -> Game<'_> {
        Game::new(&self.scenario, &self.market, &self.link, &self.tables, Objective::QoEMax, cooperative, matching)
            .unwrap()
    }

    pub fn initial(&self, seed: u64) -> Matching {
        Matching::initial(&self.scenario, &self.market, seed)
    }
}

pub fn cells(per: &[(usize, usize)], channels: usize, powers: &[f64]) -> ScenarioConfig {
    ScenarioConfig {
        num_cells: per.len(),
        num_channels: channels,
        power_levels_dbm: powers.to_vec(),
        n_single: per.iter().map(|c| c.0).sum(),
        n_bimodal: per.iter().map(|c| c.1).sum(),
        groups_per_cell: Some(per.iter().map(|&(s, b)| CellGroups { n_single: s, n_bimodal: b }).collect()),
        ..ScenarioConfig::default()
    }
}
