//! Swap traces as JSON lines, and their replay.
//!
//! The first line is a [`TraceHeader`] holding everything needed to rebuild
//! the instance; each following line is one [`SwapRecord`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{augment_market, run_algorithm1, Bundle, Game, Matching, MatchingConfig, SwapRecord};
use crate::net_model::{sample_channels, LinkBudget};
use crate::scenario::Scenario;
use crate::semantic_model::{build_surrogate_tables, SurrogateConfig};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub channel_seed: u64,
    pub surrogate: SurrogateConfig,
    pub matching: MatchingConfig,
    pub initial: Vec<Vec<Bundle>>,
    pub final_objective: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub swaps: Vec<SwapRecord>,
}

impl Trace {
    /// Runs the swap matching and records its trace.
    pub fn record(
        scenario: &Scenario,
        channel_seed: u64,
        surrogate: &SurrogateConfig,
        matching: &MatchingConfig,
        matching_seed: u64,
    ) -> Result<Self> {
        let tables = build_surrogate_tables(surrogate, &scenario.semantic)?;
        let realization = sample_channels(scenario, channel_seed);
        let link = LinkBudget::new(scenario, &realization);
        let out = run_algorithm1(scenario, &link, &tables, matching, matching_seed)?;
        Ok(Trace {
            header: TraceHeader {
                schema_version: TRACE_SCHEMA_VERSION,
                scenario: scenario.clone(),
                channel_seed,
                surrogate: surrogate.clone(),
                matching: *matching,
                initial: out.initial.bundles(),
                final_objective: out.objective,
                sweeps: out.stats.sweeps,
            },
            swaps: out.stats.swaps,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        writeln!(w)?;
        for s in &self.swaps {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Config("empty trace".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(Error::Config(format!("trace schema_version {} unsupported", header.schema_version)));
        }
        let mut swaps = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                swaps.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Trace { header, swaps })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayReport {
    Verified {
        swaps: usize,
        final_objective: f64,
    },
    /// `step` is the 0-based swap index, or the swap count for a final
    /// objective mismatch.
    Diverged {
        step: usize,
        reason: String,
    },
}

/// Re-applies the swap log from the recorded initial matching, checking
/// every recorded value for exact equality.
pub fn replay(trace: &Trace) -> Result<ReplayReport> {
    let h = &trace.header;
    let tables = build_surrogate_tables(&h.surrogate, &h.scenario.semantic)?;
    let realization = sample_channels(&h.scenario, h.channel_seed);
    let link = LinkBudget::new(&h.scenario, &realization);
    let market = augment_market(&h.scenario);
    let initial = Matching::from_bundles(&market, h.initial.clone())?;
    let mut game =
        Game::new(&h.scenario, &market, &link, &tables, h.matching.objective, h.matching.cooperative, initial)?;
    let diverged = |step: usize, reason: String| Ok(ReplayReport::Diverged { step, reason });
    for (step, rec) in trace.swaps.iter().enumerate() {
        if rec.cell >= market.num_cells() || rec.player >= market.cell(rec.cell).num_players() {
            return diverged(step, format!("no player {} in cell {}", rec.player, rec.cell));
        }
        let current = game.matching().bundle(rec.cell, rec.player);
        if current != rec.old_bundle {
            return diverged(step, format!("player holds {current:?}, trace says {:?}", rec.old_bundle));
        }
        let a = match game.assess(rec.cell, rec.player, rec.new_bundle, false) {
            Ok(a) => a,
            Err(e) => return diverged(step, format!("swap rejected: {e}")),
        };
        if !a.blocking {
            return diverged(step, "swap does not block the current matching".into());
        }
        if a.delta_utility != rec.delta_utility {
            return diverged(step, format!("delta_utility {} recomputed as {}", rec.delta_utility, a.delta_utility));
        }
        game.accept(&a.plan);
        let objective = game.total_utility();
        if objective != rec.objective {
            return diverged(step, format!("objective {} recomputed as {objective}", rec.objective));
        }
    }
    game.reveal();
    let final_objective = game.total_utility();
    if final_objective != h.final_objective {
        return diverged(
            trace.swaps.len(),
            format!("final objective {} recomputed as {final_objective}", h.final_objective),
        );
    }
    Ok(ReplayReport::Verified { swaps: trace.swaps.len(), final_objective })
}
