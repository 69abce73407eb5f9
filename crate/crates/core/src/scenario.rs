//! Experiment scenarios: geometry, user groups, QoE parameters and constants.
//!
//! [`ScenarioConfig::default`] is the single source of truth for every
//! physical and behavioural default. [`sample_scenario`] turns a config and a
//! seed into an immutable [`Scenario`].

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qoe::QoEParams;
use crate::rng::{stream, Purpose};
use crate::semantic_model::{SemanticConstants, TaskRole};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Uniform distribution on `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformDist {
    pub low: f64,
    pub high: f64,
}

/// Normal distribution, truncated at `mean ± 4 std` by resampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalDist {
    pub mean: f64,
    pub std: f64,
}

const TRUNCATE_SIGMAS: f64 = 4.0;
const POSITIVE_FLOOR: f64 = 1e-6;

impl UniformDist {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.high > self.low {
            rng.gen_range(self.low..=self.high)
        } else {
            self.low
        }
    }
}

impl NormalDist {
    /// Truncated draw floored at a small positive value.
    fn sample_positive<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.std <= 0.0 {
            return self.mean.max(POSITIVE_FLOOR);
        }
        let normal = Normal::new(self.mean, self.std).expect("finite positive std");
        loop {
            let x = normal.sample(rng);
            if (x - self.mean).abs() <= TRUNCATE_SIGMAS * self.std {
                return x.max(POSITIVE_FLOOR);
            }
        }
    }
}

/// Rate-requirement distributions for one class of users; `phi_req` in ksuts/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateDists {
    pub phi_req_ksuts: UniformDist,
    pub beta: NormalDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QoeDistributions {
    pub w: UniformDist,
    pub xi_req: UniformDist,
    pub lambda: NormalDist,
    pub text: RateDists,
    pub image: RateDists,
}

impl Default for QoeDistributions {
    fn default() -> Self {
        QoeDistributions {
            w: UniformDist { low: 0.0, high: 1.0 },
            xi_req: UniformDist { low: 0.8, high: 0.9 },
            lambda: NormalDist { mean: 55.0, std: 2.5 },
            text: RateDists {
                phi_req_ksuts: UniformDist { low: 50.0, high: 70.0 },
                beta: NormalDist { mean: 0.2, std: 0.05 },
            },
            image: RateDists {
                phi_req_ksuts: UniformDist { low: 80.0, high: 100.0 },
                beta: NormalDist { mean: 0.1, std: 0.02 },
            },
        }
    }
}

impl QoeDistributions {
    pub fn sample<R: Rng>(&self, role: TaskRole, g_th: f64, rng: &mut R) -> QoEParams {
        let rate = if role.is_image() { &self.image } else { &self.text };
        let w = self.w.sample(rng).clamp(0.0, 1.0);
        let xi_req = self.xi_req.sample(rng);
        let lambda = self.lambda.sample_positive(rng);
        let phi_req = rate.phi_req_ksuts.sample(rng) * 1e3;
        let beta = rate.beta.sample_positive(rng);
        QoEParams { w, beta, lambda, phi_req, xi_req, g_th }
    }
}

/// Per-cell group counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGroups {
    pub n_single: usize,
    pub n_bimodal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_cells: usize,
    pub cell_radius_m: f64,
    pub inter_site_distance_m: f64,
    /// Explicit BS positions; overrides the default regular layout.
    pub cell_centers_m: Option<Vec<[f64; 2]>>,
    pub min_distance_m: f64,
    /// Total single-modal users.
    pub n_single: usize,
    /// Total bimodal user pairs.
    pub n_bimodal: usize,
    /// Explicit per-cell counts; must sum to the totals.
    pub groups_per_cell: Option<Vec<CellGroups>>,
    pub num_channels: usize,
    pub noise_psd_dbm_hz: f64,
    pub power_levels_dbm: Vec<f64>,
    pub p_max_dbm: f64,
    pub n_rx: usize,
    pub shadowing_std_db: f64,
    pub g_th: f64,
    pub semantic: SemanticConstants,
    pub qoe: QoeDistributions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_cells: 3,
            cell_radius_m: 500.0,
            inter_site_distance_m: 1000.0,
            cell_centers_m: None,
            min_distance_m: 10.0,
            n_single: 6,
            n_bimodal: 6,
            groups_per_cell: None,
            num_channels: 6,
            noise_psd_dbm_hz: -174.0,
            power_levels_dbm: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            p_max_dbm: 20.0,
            n_rx: 2,
            shadowing_std_db: 6.0,
            g_th: 0.5,
            semantic: SemanticConstants::default(),
            qoe: QoeDistributions::default(),
        }
    }
}

impl ScenarioConfig {
    /// BS positions: one cell at the origin, otherwise a regular polygon with
    /// side equal to the inter-site distance (an equilateral triangle for 3).
    pub fn cell_centers(&self) -> Vec<[f64; 2]> {
        if let Some(c) = &self.cell_centers_m {
            return c.clone();
        }
        let b = self.num_cells;
        if b <= 1 {
            return vec![[0.0, 0.0]; b];
        }
        let radius = self.inter_site_distance_m / (2.0 * (PI / b as f64).sin());
        (0..b)
            .map(|i| {
                let a = PI / 2.0 + 2.0 * PI * i as f64 / b as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_cells == 0 {
            return bad("num_cells must be at least 1".into());
        }
        if let Some(c) = &self.cell_centers_m {
            if c.len() != self.num_cells {
                return bad(format!("{} cell centers given for {} cells", c.len(), self.num_cells));
            }
        }
        if !(self.cell_radius_m > 0.0) || !(self.min_distance_m > 0.0) || self.min_distance_m >= self.cell_radius_m {
            return bad("need 0 < min_distance_m < cell_radius_m".into());
        }
        if self.num_channels == 0 {
            return bad("num_channels must be at least 1".into());
        }
        if self.n_rx == 0 {
            return bad("n_rx must be at least 1".into());
        }
        if self.power_levels_dbm.is_empty()
            || self.power_levels_dbm.windows(2).any(|w| w[0] >= w[1])
            || self.power_levels_dbm.iter().any(|p| !p.is_finite() || *p > self.p_max_dbm)
        {
            return bad("power levels must be non-empty, strictly increasing and at most p_max_dbm".into());
        }
        if !(0.0..=1.0).contains(&self.g_th) {
            return bad(format!("g_th = {} outside [0, 1]", self.g_th));
        }
        let sem = self.semantic.validate();
        if !sem.is_empty() {
            return bad(sem.join("; "));
        }
        if let Some(per_cell) = &self.groups_per_cell {
            if per_cell.len() != self.num_cells {
                return bad(format!("groups_per_cell has {} entries for {} cells", per_cell.len(), self.num_cells));
            }
            let s: usize = per_cell.iter().map(|c| c.n_single).sum();
            let p: usize = per_cell.iter().map(|c| c.n_bimodal).sum();
            if s != self.n_single || p != self.n_bimodal {
                return bad(format!(
                    "groups_per_cell sums to ({s}, {p}) but totals are ({}, {})",
                    self.n_single, self.n_bimodal
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSite {
    pub center_m: [f64; 2],
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub cell: usize,
    pub position_m: [f64; 2],
    pub role: TaskRole,
    pub qoe: QoEParams,
}

/// A decision unit: one single-modal user or one bimodal (text, image) pair.
/// Users are global indices into [`Scenario::users`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSpec {
    Single { user: usize },
    Bimodal { text: usize, image: usize },
}

impl GroupSpec {
    pub fn users(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            GroupSpec::Single { user } => (user, None),
            GroupSpec::Bimodal { text, image } => (text, Some(image)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_bimodal(&self) -> bool {
        matches!(self, GroupSpec::Bimodal { .. })
    }

    pub fn size(&self) -> usize {
        if self.is_bimodal() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub seed: u64,
    pub cells: Vec<CellSite>,
    pub users: Vec<User>,
    /// Per cell, bimodal pairs first and single-modal users after.
    pub groups: Vec<Vec<GroupSpec>>,
    pub num_channels: usize,
    pub noise_psd_dbm_hz: f64,
    pub power_levels_dbm: Vec<f64>,
    pub p_max_dbm: f64,
    pub n_rx: usize,
    pub shadowing_std_db: f64,
    pub min_distance_m: f64,
    pub semantic: SemanticConstants,
}

impl Scenario {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users_in_cell(&self, cell: usize) -> usize {
        self.groups[cell].iter().map(GroupSpec::size).sum()
    }

    pub fn bimodal_in_cell(&self, cell: usize) -> usize {
        self.groups[cell].iter().filter(|g| g.is_bimodal()).count()
    }

    /// Total noise power over one channel, in mW.
    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_psd_dbm_hz) * self.semantic.bandwidth_hz
    }

    pub fn power_mw(&self, level: usize) -> f64 {
        dbm_to_mw(self.power_levels_dbm[level])
    }

    pub fn distance_m(&self, user: usize, cell: usize) -> f64 {
        let p = self.users[user].position_m;
        let c = self.cells[cell].center_m;
        ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
    }

    /// Sets every user's score threshold.
    pub fn with_g_th(mut self, g_th: f64) -> Self {
        for u in &mut self.users {
            u.qoe.g_th = g_th;
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        if sc.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                sc.schema_version
            )));
        }
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Samples positions, group placement and QoE parameters.
pub fn sample_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.check()?;
    let b = config.num_cells;
    let centers = config.cell_centers();

    let per_cell: Vec<CellGroups> = match &config.groups_per_cell {
        Some(explicit) => explicit.clone(),
        None => {
            let mut rng = stream(seed, Purpose::GroupShuffle, 0);
            let mut order: Vec<usize> = (0..b).collect();
            order.shuffle(&mut rng);
            let mut counts = vec![CellGroups { n_single: 0, n_bimodal: 0 }; b];
            // pairs and singles continue the same rotation so totals stay balanced
            for i in 0..config.n_bimodal {
                counts[order[i % b]].n_bimodal += 1;
            }
            for i in 0..config.n_single {
                counts[order[(config.n_bimodal + i) % b]].n_single += 1;
            }
            counts
        }
    };

    let mut users = Vec::new();
    let mut groups = Vec::with_capacity(b);
    for (cell, counts) in per_cell.iter().enumerate() {
        let mut cell_groups = Vec::new();
        let mut push_user = |role: TaskRole| {
            users.push(User {
                cell,
                position_m: [0.0, 0.0],
                role,
                qoe: QoEParams { w: 0.0, beta: 1.0, lambda: 1.0, phi_req: 1.0, xi_req: 0.5, g_th: config.g_th },
            });
            users.len() - 1
        };
        for _ in 0..counts.n_bimodal {
            let text = push_user(TaskRole::BimodalText);
            let image = push_user(TaskRole::BimodalImage);
            cell_groups.push(GroupSpec::Bimodal { text, image });
        }
        for _ in 0..counts.n_single {
            let user = push_user(TaskRole::SingleText);
            cell_groups.push(GroupSpec::Single { user });
        }
        groups.push(cell_groups);
    }

    let (r_min, r_max) = (config.min_distance_m, config.cell_radius_m);
    for (idx, user) in users.iter_mut().enumerate() {
        let mut rng = stream(seed, Purpose::Placement, idx as u64);
        let r = rng.gen_range(r_min * r_min..=r_max * r_max).sqrt();
        let a = rng.gen_range(0.0..2.0 * PI);
        let c = centers[user.cell];
        user.position_m = [c[0] + r * a.cos(), c[1] + r * a.sin()];
        let mut rng = stream(seed, Purpose::QoeParams, idx as u64);
        user.qoe = config.qoe.sample(user.role, config.g_th, &mut rng);
    }

    Ok(Scenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        seed,
        cells: centers.into_iter().map(|center_m| CellSite { center_m, radius_m: config.cell_radius_m }).collect(),
        users,
        groups,
        num_channels: config.num_channels,
        noise_psd_dbm_hz: config.noise_psd_dbm_hz,
        power_levels_dbm: config.power_levels_dbm.clone(),
        p_max_dbm: config.p_max_dbm,
        n_rx: config.n_rx,
        shadowing_std_db: config.shadowing_std_db,
        min_distance_m: config.min_distance_m,
        semantic: config.semantic.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
}

fn violation(code: &str, message: String) -> Violation {
    Violation { code: code.into(), message }
}

/// Checks every scenario invariant; an empty list means valid.
pub fn validate(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let n_users = scenario.users.len();
    if scenario.cells.is_empty() {
        out.push(violation("no_cells", "scenario has no cells".into()));
    }
    if scenario.groups.len() != scenario.cells.len() {
        out.push(violation(
            "group_cells",
            format!("{} group lists for {} cells", scenario.groups.len(), scenario.cells.len()),
        ));
    }
    if scenario.num_channels == 0 {
        out.push(violation("channels", "num_channels must be at least 1".into()));
    }
    if scenario.n_rx == 0 {
        out.push(violation("n_rx", "n_rx must be at least 1".into()));
    }
    let p = &scenario.power_levels_dbm;
    if p.is_empty() || p.windows(2).any(|w| w[0] >= w[1]) || p.iter().any(|x| !x.is_finite() || *x > scenario.p_max_dbm)
    {
        out.push(violation("power_levels", "power levels must be non-empty, increasing and at most p_max".into()));
    }
    for msg in scenario.semantic.validate() {
        out.push(violation("semantic", msg));
    }

    let mut seen = vec![0usize; n_users];
    for (cell, groups) in scenario.groups.iter().enumerate() {
        let mut singles_started = false;
        for (q, g) in groups.iter().enumerate() {
            if g.users().any(|u| u >= n_users) {
                out.push(violation("unknown_user", format!("group {q} in cell {cell} names a missing user")));
                continue;
            }
            for u in g.users() {
                seen[u] += 1;
            }
            match *g {
                GroupSpec::Single { user } => {
                    singles_started = true;
                    if scenario.users[user].role != TaskRole::SingleText {
                        out.push(violation("role", format!("single-modal group {q} in cell {cell} holds user {user}")));
                    }
                    if scenario.users[user].cell != cell {
                        out.push(violation(
                            "wrong_cell",
                            format!(
                                "user {user} listed in cell {cell} but located in cell {}",
                                scenario.users[user].cell
                            ),
                        ));
                    }
                }
                GroupSpec::Bimodal { text, image } => {
                    if singles_started {
                        out.push(violation(
                            "group_order",
                            format!("bimodal group {q} in cell {cell} follows a single"),
                        ));
                    }
                    let (rt, ri) = (scenario.users[text].role, scenario.users[image].role);
                    if rt != TaskRole::BimodalText || ri != TaskRole::BimodalImage {
                        out.push(violation("role", format!("bimodal pair ({text}, {image}) has roles {rt:?}/{ri:?}")));
                    }
                    let (ct, ci) = (scenario.users[text].cell, scenario.users[image].cell);
                    if ct != cell || ci != cell {
                        out.push(violation(
                            "cross_cell_pair",
                            format!("bimodal pair ({text}, {image}) in cell {cell} spans cells {ct} and {ci}"),
                        ));
                    }
                }
            }
        }
    }
    for (u, &count) in seen.iter().enumerate() {
        if count != 1 {
            out.push(violation("membership", format!("user {u} belongs to {count} groups")));
        }
    }
    for (u, user) in scenario.users.iter().enumerate() {
        for msg in user.qoe.violations() {
            out.push(violation("qoe_params", format!("user {u}: {msg}")));
        }
        if user.cell < scenario.cells.len() {
            let d = scenario.distance_m(u, user.cell);
            let radius = scenario.cells[user.cell].radius_m;
            if d < scenario.min_distance_m * (1.0 - 1e-9) || d > radius * (1.0 + 1e-9) {
                out.push(violation(
                    "distance",
                    format!("user {u} is {d:.3} m from its BS, outside [{}, {radius}]", scenario.min_distance_m),
                ));
            }
        } else {
            out.push(violation("unknown_cell", format!("user {u} names missing cell {}", user.cell)));
        }
    }
    out
}
