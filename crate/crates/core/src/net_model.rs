//! Transmission model: pathloss, shadowing, Rayleigh fading and MRC SINR.
//!
//! A [`ChannelRealization`] holds the `N_r`-antenna gain vector of every
//! (user, BS, channel) triple. [`sinr`] and [`interference`] evaluate an
//! [`Assignment`] directly on those vectors; [`LinkBudget`] precomputes the
//! same quantities as scalars for the solvers' inner loops.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scenario::{GroupSpec, Scenario};
use crate::semantic_model::TaskRole;

pub const PATHLOSS_INTERCEPT_DB: f64 = 128.1;
pub const PATHLOSS_SLOPE_DB: f64 = 37.6;
pub const REALIZATION_SCHEMA_VERSION: u32 = 1;

/// Urban macro pathloss in dB for a distance in km.
pub fn pathloss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0 && distance_km.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_km} km")));
    }
    Ok(PATHLOSS_INTERCEPT_DB + PATHLOSS_SLOPE_DB * distance_km.log10())
}

/// Draws `n_rx` i.i.d. CN(0, 1) entries.
pub fn rayleigh_vector<R: Rng>(rng: &mut R, n_rx: usize) -> Vec<Complex64> {
    let part = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std");
    (0..n_rx).map(|_| Complex64::new(part.sample(rng), part.sample(rng))).collect()
}

/// Gain vectors for every (user, BS, channel), plus the large-scale terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub schema_version: u32,
    pub seed: u64,
    pub num_users: usize,
    pub num_cells: usize,
    pub num_channels: usize,
    pub n_rx: usize,
    /// Indexed by `user * num_cells + bs`.
    pub pathloss_db: Vec<f64>,
    pub shadowing_db: Vec<f64>,
    /// Indexed by `((user * num_cells + bs) * num_channels + channel) * n_rx + antenna`.
    pub gains: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn gain(&self, user: usize, bs: usize, channel: usize) -> &[Complex64] {
        let start = ((user * self.num_cells + bs) * self.num_channels + channel) * self.n_rx;
        &self.gains[start..start + self.n_rx]
    }

    pub fn gain_mut(&mut self, user: usize, bs: usize, channel: usize) -> &mut [Complex64] {
        let start = ((user * self.num_cells + bs) * self.num_channels + channel) * self.n_rx;
        &mut self.gains[start..start + self.n_rx]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ChannelRealization = serde_json::from_str(s)?;
        if r.schema_version != REALIZATION_SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported realization schema_version {}", r.schema_version)));
        }
        Ok(r)
    }
}

/// Samples shadowing per (user, BS) and fading per (user, BS, channel).
pub fn sample_channels(scenario: &Scenario, seed: u64) -> ChannelRealization {
    let (nu, nb, nm, nr) = (scenario.num_users(), scenario.num_cells(), scenario.num_channels, scenario.n_rx);
    let mut pathloss = Vec::with_capacity(nu * nb);
    let mut shadowing = Vec::with_capacity(nu * nb);
    let mut gains = Vec::with_capacity(nu * nb * nm * nr);
    let shadow = Normal::new(0.0, scenario.shadowing_std_db.max(0.0)).expect("valid std");
    for u in 0..nu {
        for b in 0..nb {
            let link = (u * nb + b) as u64;
            let d_km = scenario.distance_m(u, b).max(scenario.min_distance_m) / 1e3;
            let pl = pathloss_db(d_km).expect("distance floored above zero");
            let sh = shadow.sample(&mut stream(seed, Purpose::Shadowing, link));
            let amplitude = 10f64.powf(-(pl + sh) / 20.0);
            pathloss.push(pl);
            shadowing.push(sh);
            for m in 0..nm {
                let mut rng = stream(seed, Purpose::Fading, (link << 16) | m as u64);
                gains.extend(rayleigh_vector(&mut rng, nr).into_iter().map(|g| g * amplitude));
            }
        }
    }
    ChannelRealization {
        schema_version: REALIZATION_SCHEMA_VERSION,
        seed,
        num_users: nu,
        num_cells: nb,
        num_channels: nm,
        n_rx: nr,
        pathloss_db: pathloss,
        shadowing_db: shadowing,
        gains,
    }
}

/// Decision variables for every user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub channel_of: Vec<Option<usize>>,
    /// Index into the scenario's power levels.
    pub power_of: Vec<usize>,
    pub symbols_of: Vec<Option<u32>>,
}

impl Assignment {
    pub fn empty(num_users: usize) -> Self {
        Assignment {
            channel_of: vec![None; num_users],
            power_of: vec![0; num_users],
            symbols_of: vec![None; num_users],
        }
    }
}

/// Constraint violations of an assignment; empty means feasible.
pub fn check_assignment(scenario: &Scenario, a: &Assignment) -> Vec<String> {
    let mut out = Vec::new();
    let n = scenario.num_users();
    if a.channel_of.len() != n || a.power_of.len() != n || a.symbols_of.len() != n {
        out.push(format!("assignment vectors must have {n} entries"));
        return out;
    }
    for (cell, groups) in scenario.groups.iter().enumerate() {
        let mut used = vec![false; scenario.num_channels];
        for g in groups {
            for u in g.users() {
                if let Some(m) = a.channel_of[u] {
                    if m >= scenario.num_channels {
                        out.push(format!("user {u} on unknown channel {m}"));
                    } else if std::mem::replace(&mut used[m], true) {
                        out.push(format!("channel {m} used twice in cell {cell}"));
                    }
                }
            }
            if let GroupSpec::Bimodal { text, image } = *g {
                if a.channel_of[text].is_some() != a.channel_of[image].is_some() {
                    out.push(format!("bimodal pair ({text}, {image}) holds exactly one channel"));
                }
            }
        }
    }
    for u in 0..n {
        if a.power_of[u] >= scenario.power_levels_dbm.len() {
            out.push(format!("user {u} has power index {} outside the power set", a.power_of[u]));
        } else if scenario.power_levels_dbm[a.power_of[u]] > scenario.p_max_dbm {
            out.push(format!("user {u} exceeds p_max"));
        }
        if let Some(k) = a.symbols_of[u] {
            let role: TaskRole = scenario.users[u].role;
            if !scenario.semantic.k_set.get(role).contains(&k) {
                out.push(format!("user {u} sends {k} symbols, not admissible for {role:?}"));
            }
        }
    }
    out
}

fn inner(w_conj_of: &[Complex64], h: &[Complex64]) -> Complex64 {
    w_conj_of.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

fn norm_sqr(h: &[Complex64]) -> f64 {
    h.iter().map(Complex64::norm_sqr).sum()
}

/// Inter-cell interference at user `u`'s BS over channel `m`, using `u`'s
/// MRC vector `W = H^H`.
pub fn interference(
    scenario: &Scenario,
    assignment: &Assignment,
    realization: &ChannelRealization,
    user: usize,
    channel: usize,
) -> Result<f64> {
    if assignment.channel_of[user] != Some(channel) {
        return Err(Error::Contract(format!("user {user} is not on channel {channel}")));
    }
    let bs = scenario.users[user].cell;
    let w = realization.gain(user, bs, channel);
    let mut total = 0.0;
    for (other, info) in scenario.users.iter().enumerate() {
        if info.cell == bs || assignment.channel_of[other] != Some(channel) {
            continue;
        }
        let h = realization.gain(other, bs, channel);
        total += scenario.power_mw(assignment.power_of[other]) * inner(w, h).norm_sqr();
    }
    Ok(total)
}

/// MRC SINR of `user` at its serving BS; zero when unassigned.
pub fn sinr(scenario: &Scenario, assignment: &Assignment, realization: &ChannelRealization, user: usize) -> f64 {
    let Some(m) = assignment.channel_of[user] else {
        return 0.0;
    };
    let bs = scenario.users[user].cell;
    let h = realization.gain(user, bs, m);
    let signal = scenario.power_mw(assignment.power_of[user]) * inner(h, h).norm_sqr();
    let i = interference(scenario, assignment, realization, user, m).expect("user is on m");
    signal / (norm_sqr(h) * scenario.noise_mw() + i)
}

/// Scalar link coefficients for fast SINR evaluation.
///
/// With `W = H^H`, the SINR `p‖H‖⁴ / (‖H‖² N₀ + Σ p' |Hᴴ H'|²)` equals
/// `p‖H‖² / (N₀ + Σ p' c)` with `c = |Hᴴ H'|² / ‖H‖²`.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    num_users: usize,
    num_channels: usize,
    noise_mw: f64,
    /// `‖H‖²` at the serving BS, indexed `user * M + channel`.
    signal_gain: Vec<f64>,
    /// Indexed `(victim * U + interferer) * M + channel`.
    coupling: Vec<f64>,
}

impl LinkBudget {
    pub fn new(scenario: &Scenario, realization: &ChannelRealization) -> Self {
        let (nu, nm) = (scenario.num_users(), scenario.num_channels);
        let mut signal_gain = vec![0.0; nu * nm];
        let mut coupling = vec![0.0; nu * nu * nm];
        for u in 0..nu {
            let bs = scenario.users[u].cell;
            for m in 0..nm {
                let h = realization.gain(u, bs, m);
                let g = norm_sqr(h);
                signal_gain[u * nm + m] = g;
                for v in 0..nu {
                    if scenario.users[v].cell != bs {
                        let c = inner(h, realization.gain(v, bs, m)).norm_sqr();
                        coupling[(u * nu + v) * nm + m] = if g > 0.0 { c / g } else { 0.0 };
                    }
                }
            }
        }
        LinkBudget { num_users: nu, num_channels: nm, noise_mw: scenario.noise_mw(), signal_gain, coupling }
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    #[inline]
    pub fn signal_gain(&self, user: usize, channel: usize) -> f64 {
        self.signal_gain[user * self.num_channels + channel]
    }

    #[inline]
    pub fn coupling(&self, victim: usize, interferer: usize, channel: usize) -> f64 {
        self.coupling[(victim * self.num_users + interferer) * self.num_channels + channel]
    }

    /// SINR for `user` at power `power_mw` on `channel`, with interferers
    /// given as `(user, power_mw)`.
    #[inline]
    pub fn sinr(
        &self,
        user: usize,
        channel: usize,
        power_mw: f64,
        interferers: impl IntoIterator<Item = (usize, f64)>,
    ) -> f64 {
        let i: f64 = interferers.into_iter().map(|(v, p)| p * self.coupling(user, v, channel)).sum();
        power_mw * self.signal_gain(user, channel) / (self.noise_mw + i)
    }

    /// Fast-path SINR for every user under an assignment.
    pub fn sinrs(&self, scenario: &Scenario, a: &Assignment) -> Vec<f64> {
        (0..scenario.num_users())
            .map(|u| match a.channel_of[u] {
                None => 0.0,
                Some(m) => {
                    let cell = scenario.users[u].cell;
                    let interferers = scenario.users.iter().enumerate().filter_map(|(v, info)| {
                        (info.cell != cell && a.channel_of[v] == Some(m))
                            .then_some((v, scenario.power_mw(a.power_of[v])))
                    });
                    self.sinr(u, m, scenario.power_mw(a.power_of[u]), interferers)
                }
            })
            .collect()
    }
}
