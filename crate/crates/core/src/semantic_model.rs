//! Semantic rate and semantic accuracy.
//!
//! Rates follow directly from the per-task semantic entropy. Accuracy is a
//! lookup table over (symbol count, SINR grid cell); measured tables can be
//! imported from CSV, and [`build_surrogate_tables`] generates smooth
//! synthetic ones for experiments.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskRole {
    SingleText,
    BimodalText,
    BimodalImage,
}

impl TaskRole {
    pub const ALL: [TaskRole; 3] = [TaskRole::SingleText, TaskRole::BimodalText, TaskRole::BimodalImage];

    /// Text users and image users draw their rate requirements from
    /// different distributions.
    pub fn is_image(self) -> bool {
        self == TaskRole::BimodalImage
    }
}

/// One value per [`TaskRole`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerRole<T> {
    pub single_text: T,
    pub bimodal_text: T,
    pub bimodal_image: T,
}

impl<T> PerRole<T> {
    pub fn get(&self, role: TaskRole) -> &T {
        match role {
            TaskRole::SingleText => &self.single_text,
            TaskRole::BimodalText => &self.bimodal_text,
            TaskRole::BimodalImage => &self.bimodal_image,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemanticConstants {
    /// Approximate semantic entropy per source unit, in suts.
    pub entropy_suts: PerRole<f64>,
    /// Admissible symbol counts, strictly increasing.
    pub k_set: PerRole<Vec<u32>>,
    pub bandwidth_hz: f64,
}

impl Default for SemanticConstants {
    fn default() -> Self {
        SemanticConstants {
            entropy_suts: PerRole { single_text: 4.0, bimodal_text: 4.0, bimodal_image: 1600.0 },
            k_set: PerRole {
                single_text: (1..=20).collect(),
                bimodal_text: vec![2, 4, 6, 8, 10],
                bimodal_image: vec![394, 788, 1576, 2364, 3152],
            },
            bandwidth_hz: 180e3,
        }
    }
}

impl SemanticConstants {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for role in TaskRole::ALL {
            let h = *self.entropy_suts.get(role);
            if !(h > 0.0 && h.is_finite()) {
                out.push(format!("entropy for {role:?} must be positive, got {h}"));
            }
            let ks = self.k_set.get(role);
            if ks.is_empty() {
                out.push(format!("k set for {role:?} is empty"));
            } else if ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
                out.push(format!("k set for {role:?} must be positive and strictly increasing"));
            }
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            out.push(format!("bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        out
    }
}

/// Semantic rate in suts/s: entropy divided by the time needed to send `k`
/// symbols over bandwidth `W`.
pub fn semantic_rate(constants: &SemanticConstants, role: TaskRole, k: u32) -> Result<f64> {
    if !constants.k_set.get(role).contains(&k) {
        return Err(Error::Domain(format!("k = {k} is not admissible for {role:?}")));
    }
    Ok(*constants.entropy_suts.get(role) * constants.bandwidth_hz / k as f64)
}

/// Piecewise-constant accuracy map over symbol counts and an SINR grid.
///
/// Single-modal tables have one `(k, sinr)` argument pair; bimodal tables
/// have two (text first, image second). Values are stored row-major over
/// `(k_1, [k_2,] cell_1, [cell_2])`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    roles: Vec<TaskRole>,
    k_sets: Vec<Vec<u32>>,
    sinr_grid_db: Vec<f64>,
    values: Vec<f64>,
}

impl AccuracyTable {
    pub fn new(roles: Vec<TaskRole>, k_sets: Vec<Vec<u32>>, sinr_grid_db: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if roles.is_empty() || roles.len() > 2 || roles.len() != k_sets.len() {
            return Err(Error::Table("a table has one or two arguments, each with a k set".into()));
        }
        for ks in &k_sets {
            if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Table("k sets must be non-empty and strictly increasing".into()));
            }
        }
        if sinr_grid_db.is_empty()
            || sinr_grid_db.iter().any(|g| !g.is_finite())
            || sinr_grid_db.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Table("SINR grid must be finite and strictly increasing".into()));
        }
        let arity = roles.len();
        let expected = k_sets.iter().map(Vec::len).product::<usize>() * sinr_grid_db.len().pow(arity as u32);
        if values.len() != expected {
            return Err(Error::Table(format!("table has {} entries, full grid needs {expected}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Table(format!("accuracy {bad} outside [0, 1]")));
        }
        let table = AccuracyTable { roles, k_sets, sinr_grid_db, values };
        table.check_monotone()?;
        Ok(table)
    }

    fn check_monotone(&self) -> Result<()> {
        let n = self.sinr_grid_db.len();
        let k_combos: usize = self.k_sets.iter().map(Vec::len).product();
        for kc in 0..k_combos {
            let k_idx = self.unflatten_k(kc);
            if self.arity() == 1 {
                for c in 1..n {
                    if self.get(&k_idx, &[c]) < self.get(&k_idx, &[c - 1]) {
                        return Err(self.monotone_error(&k_idx, &[c]));
                    }
                }
            } else {
                for a in 0..n {
                    for b in 0..n {
                        let v = self.get(&k_idx, &[a, b]);
                        if (a > 0 && v < self.get(&k_idx, &[a - 1, b])) || (b > 0 && v < self.get(&k_idx, &[a, b - 1]))
                        {
                            return Err(self.monotone_error(&k_idx, &[a, b]));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn monotone_error(&self, k_idx: &[usize], cells: &[usize]) -> Error {
        let ks: Vec<u32> = k_idx.iter().zip(&self.k_sets).map(|(&i, s)| s[i]).collect();
        let sinrs: Vec<f64> = cells.iter().map(|&c| self.sinr_grid_db[c]).collect();
        Error::Table(format!("accuracy decreases in SINR at k = {ks:?}, sinr_db = {sinrs:?}"))
    }

    fn unflatten_k(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.arity()];
        for (slot, ks) in idx.iter_mut().zip(&self.k_sets).rev() {
            *slot = flat % ks.len();
            flat /= ks.len();
        }
        idx
    }

    pub fn arity(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[TaskRole] {
        &self.roles
    }

    pub fn k_set(&self, arg: usize) -> &[u32] {
        &self.k_sets[arg]
    }

    pub fn sinr_grid_db(&self) -> &[f64] {
        &self.sinr_grid_db
    }

    pub fn num_cells(&self) -> usize {
        self.sinr_grid_db.len()
    }

    /// Grid cell of a linear SINR: the last grid point not above it, clamped
    /// to the grid range.
    pub fn cell_index(&self, sinr_linear: f64) -> usize {
        let db = 10.0 * sinr_linear.log10();
        cell_of_db(&self.sinr_grid_db, db)
    }

    /// Accuracy at the given k indices and SINR cells.
    pub fn get(&self, k_idx: &[usize], cells: &[usize]) -> f64 {
        let n = self.sinr_grid_db.len();
        let mut flat = 0;
        for (&i, ks) in k_idx.iter().zip(&self.k_sets) {
            flat = flat * ks.len() + i;
        }
        for &c in cells {
            flat = flat * n + c;
        }
        self.values[flat]
    }

    /// Accuracy for symbol counts `ks` and linear SINRs `sinrs`.
    pub fn accuracy(&self, ks: &[u32], sinrs: &[f64]) -> Result<f64> {
        if ks.len() != self.arity() || sinrs.len() != self.arity() {
            return Err(Error::Domain(format!("table expects {} arguments", self.arity())));
        }
        let mut k_idx = Vec::with_capacity(ks.len());
        for (arg, &k) in ks.iter().enumerate() {
            let pos = self.k_sets[arg]
                .iter()
                .position(|&x| x == k)
                .ok_or_else(|| Error::Domain(format!("k = {k} not in table k set for {:?}", self.roles[arg])))?;
            k_idx.push(pos);
        }
        let cells: Vec<usize> = sinrs.iter().map(|&s| self.cell_index(s)).collect();
        Ok(self.get(&k_idx, &cells))
    }

    /// Writes `k[,k2],sinr_db[,sinr2_db],xi` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.arity() == 1 {
            w.write_record(["k", "sinr_db", "xi"])?;
        } else {
            w.write_record(["k", "k2", "sinr_db", "sinr2_db", "xi"])?;
        }
        let n = self.num_cells();
        let k_combos: usize = self.k_sets.iter().map(Vec::len).product();
        for kc in 0..k_combos {
            let k_idx = self.unflatten_k(kc);
            let ks: Vec<String> = k_idx.iter().zip(&self.k_sets).map(|(&i, s)| s[i].to_string()).collect();
            let cell_combos = n.pow(self.arity() as u32);
            for cc in 0..cell_combos {
                let cells: Vec<usize> = if self.arity() == 1 { vec![cc] } else { vec![cc / n, cc % n] };
                let mut rec = ks.clone();
                rec.extend(cells.iter().map(|&c| self.sinr_grid_db[c].to_string()));
                rec.push(self.get(&k_idx, &cells).to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`AccuracyTable::write_csv`] or measured
    /// externally. Rows may come in any order but must cover the full grid.
    pub fn read_csv<R: Read>(reader: R, roles: Vec<TaskRole>) -> Result<Self> {
        let arity = roles.len();
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected: &[&str] =
            if arity == 1 { &["k", "sinr_db", "xi"] } else { &["k", "k2", "sinr_db", "sinr2_db", "xi"] };
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Table(format!("expected columns {expected:?}, found {headers:?}")));
        }
        let mut rows: Vec<(Vec<u32>, Vec<f64>, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
            let parse_k = |s: &str| s.parse::<u32>().map_err(|e| Error::Table(format!("bad k {s:?}: {e}")));
            let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Table(format!("bad number {s:?}: {e}")));
            let ks: Vec<u32> = (0..arity).map(|i| parse_k(field(i))).collect::<Result<_>>()?;
            let sinrs: Vec<f64> = (0..arity).map(|i| parse_f(field(arity + i))).collect::<Result<_>>()?;
            let xi = parse_f(field(2 * arity))?;
            rows.push((ks, sinrs, xi));
        }
        let mut k_sets: Vec<Vec<u32>> = vec![Vec::new(); arity];
        let mut grid: Vec<f64> = Vec::new();
        for (ks, sinrs, _) in &rows {
            for (set, k) in k_sets.iter_mut().zip(ks) {
                set.push(*k);
            }
            grid.extend(sinrs);
        }
        for set in &mut k_sets {
            set.sort_unstable();
            set.dedup();
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let n = grid.len();
        let total = k_sets.iter().map(Vec::len).product::<usize>() * n.pow(arity as u32);
        let mut values = vec![f64::NAN; total];
        for (ks, sinrs, xi) in rows {
            let mut flat = 0;
            for (set, k) in k_sets.iter().zip(&ks) {
                flat = flat * set.len() + set.binary_search(k).expect("k collected above");
            }
            for s in &sinrs {
                flat = flat * n + grid.binary_search_by(|g| g.total_cmp(s)).expect("sinr collected above");
            }
            if !values[flat].is_nan() {
                return Err(Error::Table(format!("duplicate entry for k = {ks:?}, sinr_db = {sinrs:?}")));
            }
            values[flat] = xi;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Table("table does not cover the full k x SINR grid".into()));
        }
        AccuracyTable::new(roles, k_sets, grid, values)
    }
}

pub(crate) fn cell_of_db(grid: &[f64], db: f64) -> usize {
    // NaN (from a negative SINR) never occurs for valid inputs; treat as -inf.
    if db.is_nan() {
        return 0;
    }
    grid.partition_point(|&g| g <= db).saturating_sub(1)
}

/// The two tables an experiment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTables {
    pub single: AccuracyTable,
    pub bimodal: AccuracyTable,
}

impl AccuracyTables {
    pub fn new(single: AccuracyTable, bimodal: AccuracyTable) -> Result<Self> {
        if single.roles() != [TaskRole::SingleText] {
            return Err(Error::Table("single-modal table must have the single_text role".into()));
        }
        if bimodal.roles() != [TaskRole::BimodalText, TaskRole::BimodalImage] {
            return Err(Error::Table("bimodal table must have (bimodal_text, bimodal_image) roles".into()));
        }
        if single.sinr_grid_db() != bimodal.sinr_grid_db() {
            return Err(Error::Table("single-modal and bimodal tables must share the SINR grid".into()));
        }
        Ok(AccuracyTables { single, bimodal })
    }

    /// Checks that the tables cover the scenario's k sets.
    pub fn check_covers(&self, constants: &SemanticConstants) -> Result<()> {
        let pairs = [
            (&self.single, 0, TaskRole::SingleText),
            (&self.bimodal, 0, TaskRole::BimodalText),
            (&self.bimodal, 1, TaskRole::BimodalImage),
        ];
        for (table, arg, role) in pairs {
            for k in constants.k_set.get(role) {
                if !table.k_set(arg).contains(k) {
                    return Err(Error::Table(format!("table has no entry for k = {k} ({role:?})")));
                }
            }
        }
        Ok(())
    }

    pub fn sinr_grid_db(&self) -> &[f64] {
        self.single.sinr_grid_db()
    }
}

/// Shape of one role's accuracy factor.
///
/// `factor(k, γ) = sat(k) · min(1, c · logistic(slope · (γ_dB − mid(k))))` with
/// `sat(k) = 1 − exp(−(k / k_max) / saturation_scale)` and `mid(k)` falling
/// linearly from `mid_small_k_db` at the smallest k to `mid_large_k_db` at
/// the largest. The constant `c = 1 + exp(−slope · saturation_margin_db)`
/// makes the curve reach its ceiling exactly `saturation_margin_db` above
/// the midpoint and stay flat beyond, as a trained codec does once the
/// channel stops corrupting its output. A very large margin gives the plain
/// logistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleShape {
    pub slope_per_db: f64,
    pub mid_small_k_db: f64,
    pub mid_large_k_db: f64,
    pub saturation_scale: f64,
    #[serde(default = "default_margin")]
    pub saturation_margin_db: f64,
}

fn default_margin() -> f64 {
    DEFAULT_SATURATION_MARGIN_DB
}

pub const DEFAULT_SATURATION_MARGIN_DB: f64 = 6.0;

impl Default for RoleShape {
    fn default() -> Self {
        RoleShape {
            slope_per_db: 0.5,
            mid_small_k_db: 8.0,
            mid_large_k_db: 0.0,
            saturation_scale: 0.15,
            saturation_margin_db: DEFAULT_SATURATION_MARGIN_DB,
        }
    }
}

/// Parameters of the synthetic accuracy surfaces.
///
/// Single-modal: `ξ = floor + (ceiling − floor) · factor(k, γ)`.
/// Bimodal: `ξ = floor + (ceiling − floor) · factor_t(k_t, γ_t) · factor_i(k_i, γ_i)`.
/// With `resolution > 0` every entry is rounded down to a multiple of it,
/// mimicking accuracies measured on a finite test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub grid_min_db: f64,
    pub grid_max_db: f64,
    pub grid_step_db: f64,
    pub floor: f64,
    pub ceiling: f64,
    pub resolution: f64,
    pub shape: PerRole<RoleShape>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            grid_min_db: -10.0,
            grid_max_db: 30.0,
            grid_step_db: 1.0,
            floor: 0.05,
            ceiling: 0.98,
            resolution: 0.0,
            shape: PerRole {
                single_text: RoleShape::default(),
                bimodal_text: RoleShape::default(),
                bimodal_image: RoleShape::default(),
            },
        }
    }
}

impl SurrogateConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.grid_step_db > 0.0) || !(self.grid_max_db > self.grid_min_db) {
            return bad("surrogate grid needs grid_max_db > grid_min_db and a positive step".into());
        }
        if !(0.0 <= self.floor && self.floor < self.ceiling && self.ceiling <= 1.0) {
            return bad(format!("need 0 <= floor < ceiling <= 1, got {} / {}", self.floor, self.ceiling));
        }
        if !(0.0..1.0).contains(&self.resolution) {
            return bad(format!("resolution must be in [0, 1), got {}", self.resolution));
        }
        for role in TaskRole::ALL {
            let s = self.shape.get(role);
            if !(s.slope_per_db > 0.0) {
                return bad(format!("{role:?}: slope must be positive so accuracy rises with SINR"));
            }
            if !(s.saturation_scale > 0.0) {
                return bad(format!("{role:?}: saturation scale must be positive"));
            }
            if !(s.saturation_margin_db > 0.0) {
                return bad(format!("{role:?}: saturation margin must be positive"));
            }
            if !(s.mid_small_k_db >= s.mid_large_k_db) {
                return bad(format!("{role:?}: logistic midpoint must not increase with k"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.grid_max_db - self.grid_min_db) / self.grid_step_db + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.grid_min_db + i as f64 * self.grid_step_db).collect()
    }

    /// Per-role factor in [0, 1].
    pub fn factor(&self, role: TaskRole, ks: &[u32], k: u32, sinr_db: f64) -> f64 {
        let s = self.shape.get(role);
        let k_min = ks[0] as f64;
        let k_max = *ks.last().expect("non-empty k set") as f64;
        let sat = 1.0 - (-(k as f64 / k_max) / s.saturation_scale).exp();
        let frac = if k_max > k_min { (k as f64 - k_min) / (k_max - k_min) } else { 1.0 };
        let mid = s.mid_small_k_db - (s.mid_small_k_db - s.mid_large_k_db) * frac;
        let scale = 1.0 + (-s.slope_per_db * s.saturation_margin_db).exp();
        sat * (scale / (1.0 + (-s.slope_per_db * (sinr_db - mid)).exp())).min(1.0)
    }

    fn finish(&self, factor: f64) -> f64 {
        let xi = self.floor + (self.ceiling - self.floor) * factor;
        let xi = if self.resolution > 0.0 { (xi / self.resolution).floor() * self.resolution } else { xi };
        xi.clamp(0.0, 1.0)
    }

    pub fn single_accuracy(&self, ks: &[u32], k: u32, sinr_db: f64) -> f64 {
        self.finish(self.factor(TaskRole::SingleText, ks, k, sinr_db))
    }

    pub fn bimodal_accuracy(&self, kt_set: &[u32], ki_set: &[u32], kt: u32, ki: u32, gt_db: f64, gi_db: f64) -> f64 {
        self.finish(
            self.factor(TaskRole::BimodalText, kt_set, kt, gt_db)
                * self.factor(TaskRole::BimodalImage, ki_set, ki, gi_db),
        )
    }
}

/// Builds the single-modal and bimodal surrogate tables over the given k sets.
pub fn build_surrogate_tables(config: &SurrogateConfig, constants: &SemanticConstants) -> Result<AccuracyTables> {
    config.validate()?;
    let grid = config.grid();
    let ks = &constants.k_set.single_text;
    let mut single = Vec::with_capacity(ks.len() * grid.len());
    for &k in ks {
        for &g in &grid {
            single.push(config.single_accuracy(ks, k, g));
        }
    }
    let (kt_set, ki_set) = (&constants.k_set.bimodal_text, &constants.k_set.bimodal_image);
    let mut bimodal = Vec::with_capacity(kt_set.len() * ki_set.len() * grid.len() * grid.len());
    for &kt in kt_set {
        for &ki in ki_set {
            for &gt in &grid {
                for &gi in &grid {
                    bimodal.push(config.bimodal_accuracy(kt_set, ki_set, kt, ki, gt, gi));
                }
            }
        }
    }
    AccuracyTables::new(
        AccuracyTable::new(vec![TaskRole::SingleText], vec![ks.clone()], grid.clone(), single)?,
        AccuracyTable::new(
            vec![TaskRole::BimodalText, TaskRole::BimodalImage],
            vec![kt_set.clone(), ki_set.clone()],
            grid,
            bimodal,
        )?,
    )
}
