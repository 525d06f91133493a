//! Seeded materialization of coupled and decoupled chaoses, Monte Carlo norm
//! estimates and log-log scaling fits.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::SampleError;
use crate::graph::{materialize_graph_matrix_trial, shape_coupled_schema, Shape};
use crate::linalg::{default_max_iters, spectral_norm, Matrix, SparseMatrix, DEFAULT_NORM_TOL, SPARSE_DENSITY};
use crate::schema::{ChaosSchema, DistributionSpec};

/// One variable per `(seed, trial, layer, key)`, independent of evaluation order.
pub fn draw_variable(dist: &DistributionSpec, seed: u64, trial: u64, layer: u64, key: u64) -> f64 {
    let mut bytes = [0u8; 32];
    for (k, w) in [seed, trial, layer, key].iter().enumerate() {
        bytes[8 * k..8 * k + 8].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    match *dist {
        DistributionSpec::Gaussian => rng.sample(StandardNormal),
        DistributionSpec::Rademacher | DistributionSpec::EdgeRademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        DistributionSpec::StandardizedBernoulli { param: p } => {
            if rng.random::<f64>() < p {
                ((1.0 - p) / p).sqrt()
            } else {
                -(p / (1.0 - p)).sqrt()
            }
        }
        DistributionSpec::CenteredChiSq1 => {
            let g: f64 = rng.sample(StandardNormal);
            g * g - 1.0
        }
    }
}

pub fn draw_edge_sign(seed: u64, trial: u64, layer: u64, key: u64) -> f64 {
    draw_variable(&DistributionSpec::EdgeRademacher, seed, trial, layer, key)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Caps {
    /// Largest `rows · cols` of a materialized matrix.
    pub cells: u128,
    /// Largest number of summation terms visited.
    pub lattice: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { cells: 1 << 25, lattice: 1 << 28 }
    }
}

pub fn check_cells(rows: u128, cols: u128, terms: u128, caps: &Caps) -> Result<(), SampleError> {
    let cells = rows.saturating_mul(cols);
    if cells > caps.cells {
        return Err(SampleError::CapExceeded { needed: cells, cap: caps.cells });
    }
    if terms > caps.lattice {
        return Err(SampleError::CapExceeded { needed: terms, cap: caps.lattice });
    }
    Ok(())
}

/// Collects entries densely when enough terms are expected, as triplets
/// otherwise; the final storage follows the actual density.
pub struct Accumulator {
    rows: usize,
    cols: usize,
    dense: Option<DMatrix<f64>>,
    triplets: Vec<(usize, usize, f64)>,
}

impl Accumulator {
    pub fn new(rows: usize, cols: usize, expected_terms: u128) -> Self {
        let dense = (expected_terms as f64 >= SPARSE_DENSITY * rows as f64 * cols as f64)
            .then(|| DMatrix::zeros(rows, cols));
        Accumulator { rows, cols, dense, triplets: Vec::new() }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        match &mut self.dense {
            Some(m) => m[(r, c)] += v,
            None => self.triplets.push((r, c, v)),
        }
    }

    pub fn finish(self) -> Matrix {
        match self.dense {
            Some(m) => {
                let nnz = m.iter().filter(|&&x| x != 0.0).count();
                if (nnz as f64) < SPARSE_DENSITY * (self.rows * self.cols) as f64 {
                    let mut t = Vec::with_capacity(nnz);
                    for j in 0..self.cols {
                        for i in 0..self.rows {
                            if m[(i, j)] != 0.0 {
                                t.push((i, j, m[(i, j)]));
                            }
                        }
                    }
                    Matrix::Sparse(SparseMatrix::from_triplets(self.rows, self.cols, t))
                } else {
                    Matrix::Dense(m)
                }
            }
            None => Matrix::from_triplets(self.rows, self.cols, self.triplets),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum SampleMode {
    /// One variable family shared by every chaos slot; slot values must differ.
    Coupled,
    /// An independent family per slot.
    #[default]
    Decoupled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaterializeOptions {
    pub mode: SampleMode,
    /// Divide each variable by its standard deviation.
    pub standardize: bool,
    /// Average decoupled products over all slot permutations.
    pub symmetrize: bool,
    pub caps: Caps,
}

impl MaterializeOptions {
    pub fn new(mode: SampleMode) -> Self {
        MaterializeOptions { mode, standardize: false, symmetrize: false, caps: Caps::default() }
    }
}

/// Per-slot key function: mixed radix over the coordinate's indices, last
/// index fastest. Edge signs on two equal-sized indices ignore order.
struct SlotKey {
    indices: Vec<usize>,
    strides: Vec<u64>,
    size: u64,
    unordered: Option<(usize, usize, u64)>,
}

impl SlotKey {
    fn new(schema: &ChaosSchema, t: usize, sizes: &[u64]) -> Self {
        let indices: Vec<usize> = schema.coord(t).iter().collect();
        let mut strides = vec![0u64; indices.len()];
        let mut size = 1u64;
        for (k, &u) in indices.iter().enumerate().rev() {
            strides[k] = size;
            size = size.saturating_mul(sizes[u]);
        }
        let unordered = (schema.distribution == DistributionSpec::EdgeRademacher
            && indices.len() == 2
            && sizes[indices[0]] == sizes[indices[1]])
            .then(|| (indices[0], indices[1], sizes[indices[0]]));
        SlotKey { indices, strides, size, unordered }
    }

    fn key(&self, s: &[u64]) -> u64 {
        match self.unordered {
            Some((a, b, n)) => s[a].min(s[b]) * n + s[a].max(s[b]),
            None => self.indices.iter().zip(&self.strides).map(|(&u, &st)| s[u] * st).sum(),
        }
    }
}

/// Whether every chaos coordinate ranges over the same value space, which is
/// what coupling and symmetrization need.
pub fn shares_template(schema: &ChaosSchema, sizes: &[u64]) -> Result<(), String> {
    let shape = |t: usize| schema.coord(t).iter().map(|u| sizes[u]).collect::<Vec<_>>();
    let first = shape(0);
    for t in 1..schema.q {
        if shape(t) != first {
            return Err(format!(
                "coordinate {} has extents {:?}, coordinate {} has {:?}",
                schema.coord_label(0),
                first,
                schema.coord_label(t),
                shape(t)
            ));
        }
    }
    Ok(())
}

fn mixed_radix(indices: &[usize], sizes: &[u64]) -> (Vec<(usize, u64)>, u128) {
    let mut stride = 1u64;
    let mut out = vec![(0, 0); indices.len()];
    for (k, &u) in indices.iter().enumerate().rev() {
        out[k] = (u, stride);
        stride = stride.saturating_mul(sizes[u]);
    }
    let extent = indices.iter().map(|&u| sizes[u] as u128).product();
    (out, extent)
}

pub fn materialize(schema: &ChaosSchema, mode: SampleMode, seed: u64) -> Result<Matrix, SampleError> {
    materialize_trial(schema, &MaterializeOptions::new(mode), seed, 0)
}

pub fn materialize_trial(
    schema: &ChaosSchema,
    opts: &MaterializeOptions,
    seed: u64,
    trial: u64,
) -> Result<Matrix, SampleError> {
    let sizes = schema.sizes()?;
    let q = schema.q;
    let (rspec, rows) = mixed_radix(&schema.row_coord.0, &sizes);
    let (cspec, cols) = mixed_radix(&schema.col_coord.0, &sizes);
    let lattice: u128 = sizes.iter().map(|&n| n as u128).product();
    check_cells(rows, cols, lattice, &opts.caps)?;
    if sizes.contains(&0) {
        return Ok(Matrix::from_triplets(rows as usize, cols as usize, Vec::new()));
    }

    let coupled = opts.mode == SampleMode::Coupled;
    if coupled || opts.symmetrize {
        shares_template(schema, &sizes).map_err(|e| {
            if coupled {
                SampleError::CoupledUnsupported(e)
            } else {
                SampleError::NotSymmetrizable(e)
            }
        })?;
    }
    let keys: Vec<SlotKey> = (0..q).map(|t| SlotKey::new(schema, t, &sizes)).collect();
    let scale = if opts.standardize { 1.0 / schema.distribution.variance().sqrt() } else { 1.0 };
    let layers = if coupled { 1 } else { q };
    let tables: Vec<Vec<f64>> = (0..layers)
        .map(|t| {
            let size = keys[t].size;
            check_cells(size as u128, 1, 0, &opts.caps)?;
            Ok((0..size)
                .map(|k| scale * draw_variable(&schema.distribution, seed, trial, t as u64, k))
                .collect())
        })
        .collect::<Result<_, SampleError>>()?;
    let perms = if opts.symmetrize && !coupled { permutations(q) } else { vec![(0..q).collect()] };
    let perm_weight = 1.0 / perms.len() as f64;

    let mut acc = Accumulator::new(rows as usize, cols as usize, lattice);
    let mut s = vec![0u64; schema.p];
    let mut slot = vec![0u64; q];
    loop {
        if schema.weight.holds(&s) {
            for t in 0..q {
                slot[t] = keys[t].key(&s);
            }
            let distinct = !coupled || (0..q).all(|a| (a + 1..q).all(|b| slot[a] != slot[b]));
            if distinct {
                let value = if coupled {
                    slot.iter().map(|&k| tables[0][k as usize]).product()
                } else {
                    perm_weight
                        * perms
                            .iter()
                            .map(|pi| (0..q).map(|t| tables[pi[t]][slot[t] as usize]).product::<f64>())
                            .sum::<f64>()
                };
                let r: u64 = rspec.iter().map(|&(u, st)| s[u] * st).sum();
                let c: u64 = cspec.iter().map(|&(u, st)| s[u] * st).sum();
                acc.add(r as usize, c as usize, value);
            }
        }
        if !crate::flattening::advance(&mut s, &sizes) {
            break;
        }
    }
    Ok(acc.finish())
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    if q == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(q - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, q - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// A chaos given by explicit matrix coefficients `A_{i₁…i_q}` over `m`
/// variables; terms with repeated indices are ignored in coupled mode.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientChaos {
    pub q: usize,
    pub m: usize,
    pub rows: usize,
    pub cols: usize,
    pub terms: Vec<(Vec<usize>, DMatrix<f64>)>,
    pub distribution: DistributionSpec,
}

impl CoefficientChaos {
    fn merged(&self) -> BTreeMap<Vec<usize>, DMatrix<f64>> {
        let mut out: BTreeMap<Vec<usize>, DMatrix<f64>> = BTreeMap::new();
        for (idx, a) in &self.terms {
            *out.entry(idx.clone()).or_insert_with(|| DMatrix::zeros(self.rows, self.cols)) += a;
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        let merged = self.merged();
        let zero = DMatrix::zeros(self.rows, self.cols);
        merged.iter().all(|(idx, a)| {
            permutations(self.q).iter().all(|pi| {
                let moved: Vec<usize> = pi.iter().map(|&t| idx[t]).collect();
                merged.get(&moved).unwrap_or(&zero) == a
            })
        })
    }

    /// `(1/q!) Σ_π A_{π(i)}`, dropping vanishing terms.
    pub fn symmetrized(&self) -> CoefficientChaos {
        let perms = permutations(self.q);
        let mut out: BTreeMap<Vec<usize>, DMatrix<f64>> = BTreeMap::new();
        for (idx, a) in self.merged() {
            for pi in &perms {
                let moved: Vec<usize> = pi.iter().map(|&t| idx[t]).collect();
                *out.entry(moved).or_insert_with(|| DMatrix::zeros(self.rows, self.cols)) += &a / perms.len() as f64;
            }
        }
        CoefficientChaos {
            terms: out.into_iter().filter(|(_, a)| a.iter().any(|&x| x.abs() > 1e-12)).collect(),
            ..self.clone()
        }
    }

    pub fn materialize(&self, mode: SampleMode, seed: u64, trial: u64) -> Matrix {
        let layers = if mode == SampleMode::Coupled { 1 } else { self.q };
        let tables: Vec<Vec<f64>> = (0..layers)
            .map(|t| (0..self.m).map(|k| draw_variable(&self.distribution, seed, trial, t as u64, k as u64)).collect())
            .collect();
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (idx, a) in &self.terms {
            let distinct = (0..idx.len()).all(|x| (x + 1..idx.len()).all(|y| idx[x] != idx[y]));
            let h: f64 = match mode {
                SampleMode::Coupled if !distinct => continue,
                SampleMode::Coupled => idx.iter().map(|&i| tables[0][i]).product(),
                SampleMode::Decoupled => idx.iter().enumerate().map(|(t, &i)| tables[t][i]).product(),
            };
            m += a * h;
        }
        Matrix::Dense(m)
    }
}

/// `mean‖X‖ / mean‖Y‖` for the coupled chaos against its decoupled version.
/// Coefficients must be symmetric unless `symmetrize` is set, and must not
/// vanish after symmetrization.
pub fn coefficient_decoupling_ratio(
    chaos: &CoefficientChaos,
    symmetrize: bool,
    trials: usize,
    seed: u64,
) -> Result<f64, SampleError> {
    let target = if chaos.is_symmetric() {
        chaos.clone()
    } else if symmetrize {
        chaos.symmetrized()
    } else {
        return Err(SampleError::NotSymmetrizable("coefficients are not symmetric under slot permutations".into()));
    };
    if target.terms.is_empty() {
        return Err(SampleError::NotSymmetrizable("symmetrized coefficients vanish".into()));
    }
    let mean = |mode| {
        let norms: Vec<f64> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let m = target.materialize(mode, seed, t);
                spectral_norm(&m, DEFAULT_NORM_TOL, default_max_iters(m.rows().max(m.cols()))).value
            })
            .collect();
        norms.iter().sum::<f64>() / trials as f64
    };
    Ok(mean(SampleMode::Coupled) / mean(SampleMode::Decoupled))
}

/// `mean‖X‖ / mean‖Y‖` with `Y` decoupled from the slot-symmetrized
/// coefficients; the schema's chaos coordinates must share one value space.
pub fn decoupling_ratio(
    schema: &ChaosSchema,
    dims: &BTreeMap<String, u64>,
    trials: usize,
    seed: u64,
) -> Result<f64, SampleError> {
    let schema = schema.bind(dims)?;
    shares_template(&schema, &schema.sizes()?).map_err(SampleError::NotSymmetrizable)?;
    let run = |mode, symmetrize| {
        let config = SampleConfig {
            target: Target::Schema(schema.clone()),
            mode,
            symmetrize,
            trials,
            seed,
            ..SampleConfig::default()
        };
        monte_carlo(&config).map(|r| r.mean_norm)
    };
    Ok(run(SampleMode::Coupled, false)? / run(SampleMode::Decoupled, true)?)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Schema(ChaosSchema),
    Shape(Shape),
    Coefficients(CoefficientChaos),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConfig {
    pub target: Target,
    pub mode: SampleMode,
    /// Symbol bindings; a shape reads `n`.
    pub dims: BTreeMap<String, u64>,
    pub trials: usize,
    pub seed: u64,
    pub norm_tol: f64,
    /// Defaults to `⌈10·ln(dim)⌉ + 200` for the larger matrix side.
    pub max_iters: Option<usize>,
    pub standardize: bool,
    pub symmetrize: bool,
    pub caps: Caps,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            target: Target::Shape(Shape::wigner()),
            mode: SampleMode::Decoupled,
            dims: BTreeMap::new(),
            trials: 1,
            seed: 0,
            norm_tol: DEFAULT_NORM_TOL,
            max_iters: None,
            standardize: false,
            symmetrize: false,
            caps: Caps::default(),
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.trials == 0 {
            return Err(SampleError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.norm_tol.is_nan() || self.norm_tol <= 0.0 {
            return Err(SampleError::InvalidConfig(format!("norm tolerance must be positive, got {}", self.norm_tol)));
        }
        Ok(())
    }

    pub fn target_name(&self) -> String {
        match &self.target {
            Target::Schema(s) => format!("schema(p={}, q={})", s.p, s.q),
            Target::Shape(s) => format!("shape({} vertices, {} edges)", s.n_vertices(), s.edges.len()),
            Target::Coefficients(c) => format!("coefficients(q={}, m={})", c.q, c.m),
        }
    }

    /// The matrix of one trial.
    pub fn materialize(&self, trial: u64) -> Result<Matrix, SampleError> {
        let opts = MaterializeOptions {
            mode: self.mode,
            standardize: self.standardize,
            symmetrize: self.symmetrize,
            caps: self.caps,
        };
        match &self.target {
            Target::Schema(s) => materialize_trial(&s.bind(&self.dims)?, &opts, self.seed, trial),
            Target::Shape(shape) => {
                let n = *self
                    .dims
                    .get("n")
                    .ok_or_else(|| SampleError::InvalidConfig("a shape needs a binding for n".into()))?;
                match self.mode {
                    SampleMode::Coupled => {
                        materialize_graph_matrix_trial(shape, n, self.seed, trial, &self.caps).map_err(|e| match e {
                            crate::error::GraphError::Sample(e) => e,
                            e => SampleError::InvalidConfig(e.to_string()),
                        })
                    }
                    SampleMode::Decoupled => {
                        materialize_trial(&shape_coupled_schema(shape, Some(n)), &opts, self.seed, trial)
                    }
                }
            }
            Target::Coefficients(c) => Ok(c.materialize(self.mode, self.seed, trial)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub target: String,
    pub mode: SampleMode,
    pub dims: BTreeMap<String, u64>,
    pub seed: u64,
    pub trials: usize,
    pub mean_norm: f64,
    /// Sample standard deviation over `√trials`; zero for a single trial.
    pub stderr: f64,
    pub norms: Vec<f64>,
    /// False if any trial's norm estimate hit the iteration cap.
    pub converged: bool,
}

impl SampleReport {
    pub fn from_norms(config: &SampleConfig, norms: Vec<f64>, converged: bool) -> Self {
        let (mean_norm, stderr) = mean_stderr(&norms);
        SampleReport {
            target: config.target_name(),
            mode: config.mode,
            dims: config.dims.clone(),
            seed: config.seed,
            trials: norms.len(),
            mean_norm,
            stderr,
            norms,
            converged,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,norm\n");
        for (t, v) in self.norms.iter().enumerate() {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trials run in parallel; each depends only on `(seed, trial)`.
pub fn monte_carlo(config: &SampleConfig) -> Result<SampleReport, SampleError> {
    config.validate()?;
    let estimates = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let m = config.materialize(t)?;
            let iters = config.max_iters.unwrap_or_else(|| default_max_iters(m.rows().max(m.cols())));
            Ok(spectral_norm(&m, config.norm_tol, iters))
        })
        .collect::<Result<Vec<_>, SampleError>>()?;
    let converged = estimates.iter().all(|e| e.converged);
    Ok(SampleReport::from_norms(config, estimates.into_iter().map(|e| e.value).collect(), converged))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub dim: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `2 · slope_stderr`.
    pub slope_ci: f64,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,mean,stderr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.dim, p.mean, p.stderr));
        }
        out.push_str(&format!("# slope={} ci={} intercept={}\n", self.slope, self.slope_ci, self.intercept));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Least squares of `ln mean` on `ln dim`.
pub fn scaling_fit(points: &[ScalingPoint]) -> Result<ScalingReport, SampleError> {
    if points.len() < 3 {
        return Err(SampleError::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| p.mean.is_nan() || p.mean <= 0.0 || p.dim.is_nan() || p.dim <= 0.0) {
        return Err(SampleError::Fit(format!("non-positive point ({}, {})", p.dim, p.mean)));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.dim.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SampleError::Fit("all dims are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ScalingReport { points: points.to_vec(), slope, intercept, slope_stderr, slope_ci: 2.0 * slope_stderr })
}

pub fn scaling_fit_reports(series: &[(f64, SampleReport)]) -> Result<ScalingReport, SampleError> {
    let points: Vec<ScalingPoint> =
        series.iter().map(|(d, r)| ScalingPoint { dim: *d, mean: r.mean_norm, stderr: r.stderr }).collect();
    scaling_fit(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{khatri_rao_schema, Constraint, Dim, IndexSet, WeightSpec};

    fn dims(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn khatri_rao_decoupled_entries() {
        let s = khatri_rao_schema(2, 2, 2).unwrap();
        let m = materialize(&s, SampleMode::Decoupled, 17).unwrap();
        assert_eq!((m.rows(), m.cols()), (4, 2));
        // Slot t holds h^{(t)} over (j_t, k), keyed j_t·n + k.
        let h = |t: u64, j: u64, k: u64| draw_variable(&DistributionSpec::Gaussian, 17, 0, t, j * 2 + k);
        for j1 in 0..2 {
            for j2 in 0..2 {
                for k in 0..2 {
                    let want = h(0, j1, k) * h(1, j2, k);
                    assert_eq!(m.get((j1 * 2 + j2) as usize, k as usize), want);
                }
            }
        }
    }

    #[test]
    fn single_coefficient() {
        let s = ChaosSchema {
            p: 1,
            dims: vec![Dim::sized(1)],
            q: 1,
            chaos_coords: vec![IndexSet(vec![0])],
            row_coord: IndexSet(vec![0]),
            col_coord: IndexSet(vec![0]),
            weight: WeightSpec::default(),
            distribution: DistributionSpec::Rademacher,
            labels: None,
        };
        let m = materialize(&s, SampleMode::Decoupled, 3).unwrap();
        assert_eq!(m.get(0, 0).abs(), 1.0);
        assert_eq!(spectral_norm(&m, 1e-9, 10).value, 1.0);
    }

    #[test]
    fn wigner_coupled_matches_graph_matrix() {
        let shape = Shape::wigner();
        for seed in [0, 1, 99] {
            let a = materialize(&shape_coupled_schema(&shape, Some(4)), SampleMode::Coupled, seed).unwrap();
            let b = crate::graph::materialize_graph_matrix(&shape, 4, seed).unwrap();
            assert_eq!(a.to_dense(), b.to_dense());
        }
    }

    #[test]
    fn coupled_requires_template() {
        let s = khatri_rao_schema(2, 3, 4).unwrap();
        assert!(materialize(&s, SampleMode::Coupled, 0).is_ok());
        let (phi, _) = crate::schema::ellipsoid_schemas(3, 2);
        assert!(materialize(&phi, SampleMode::Coupled, 0).is_ok());
        let mut odd = khatri_rao_schema(2, 3, 4).unwrap();
        odd.chaos_coords[1] = IndexSet(vec![1]);
        assert!(matches!(materialize(&odd, SampleMode::Coupled, 0), Err(SampleError::CoupledUnsupported(_))));
    }

    #[test]
    fn caps_are_enforced() {
        let s = khatri_rao_schema(2, 64, 4096).unwrap();
        let opts = MaterializeOptions { caps: Caps { cells: 1000, lattice: 1 << 40 }, ..MaterializeOptions::new(SampleMode::Decoupled) };
        assert!(matches!(materialize_trial(&s, &opts, 0, 0), Err(SampleError::CapExceeded { .. })));
    }

    #[test]
    fn order_one_ratio_is_one() {
        let s = ChaosSchema {
            p: 2,
            dims: vec![Dim::symbol("m"), Dim::symbol("m")],
            q: 1,
            chaos_coords: vec![IndexSet(vec![0])],
            row_coord: IndexSet(vec![0]),
            col_coord: IndexSet(vec![1]),
            weight: WeightSpec::default(),
            distribution: DistributionSpec::Gaussian,
            labels: None,
        };
        assert_eq!(decoupling_ratio(&s, &dims(&[("m", 8)]), 4, 5).unwrap(), 1.0);
    }

    fn rank_one_q2(m: u64) -> ChaosSchema {
        ChaosSchema {
            p: 2,
            dims: vec![Dim::symbol("m"), Dim::symbol("m")],
            q: 2,
            chaos_coords: vec![IndexSet(vec![0]), IndexSet(vec![1])],
            row_coord: IndexSet(vec![0]),
            col_coord: IndexSet(vec![1]),
            weight: WeightSpec::new(vec![Constraint::AllDistinct(vec![0, 1])]),
            distribution: DistributionSpec::Gaussian,
            labels: None,
        }
        .bind(&dims(&[("m", m)]))
        .unwrap()
    }

    #[test]
    fn symmetric_q2_ratio_band() {
        let r = decoupling_ratio(&rank_one_q2(64), &BTreeMap::new(), 8, 2).unwrap();
        assert!((1.0 / 16.0..=16.0).contains(&r), "{r}");
    }

    #[test]
    fn antisymmetric_chaos() {
        let e = |i, j| {
            let mut a = DMatrix::zeros(2, 2);
            a[(i, j)] = 1.0;
            a
        };
        let chaos = CoefficientChaos {
            q: 2,
            m: 2,
            rows: 2,
            cols: 2,
            terms: vec![(vec![0, 1], e(0, 1)), (vec![1, 0], -e(0, 1))],
            distribution: DistributionSpec::Gaussian,
        };
        assert_eq!(chaos.materialize(SampleMode::Coupled, 4, 0).to_dense(), DMatrix::zeros(2, 2));
        assert_ne!(chaos.materialize(SampleMode::Decoupled, 4, 0).to_dense(), DMatrix::zeros(2, 2));
        assert!(!chaos.is_symmetric());
        assert!(chaos.symmetrized().terms.is_empty());
        for symmetrize in [false, true] {
            assert!(matches!(
                coefficient_decoupling_ratio(&chaos, symmetrize, 2, 0),
                Err(SampleError::NotSymmetrizable(_))
            ));
        }
    }

    #[test]
    fn zero_chaos_has_zero_mean() {
        let chaos = CoefficientChaos {
            q: 1,
            m: 3,
            rows: 3,
            cols: 3,
            terms: vec![(vec![0], DMatrix::zeros(3, 3))],
            distribution: DistributionSpec::Gaussian,
        };
        let config = SampleConfig { target: Target::Coefficients(chaos), trials: 5, ..SampleConfig::default() };
        let r = monte_carlo(&config).unwrap();
        assert_eq!((r.mean_norm, r.stderr), (0.0, 0.0));
    }

    #[test]
    fn deterministic_and_trial_keyed() {
        let config = SampleConfig {
            target: Target::Schema(khatri_rao_schema(2, 3, 9).unwrap()),
            trials: 6,
            seed: 42,
            ..SampleConfig::default()
        };
        let a = monte_carlo(&config).unwrap();
        let b = monte_carlo(&config).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        for t in 0..6 {
            let m = config.materialize(t).unwrap();
            assert_eq!(spectral_norm(&m, config.norm_tol, default_max_iters(9)).value, a.norms[t as usize]);
        }
    }

    #[test]
    fn entry_second_moments() {
        // Weighted combinatorial schema: entry (i, j) collects one term per
        // admissible middle index, each a product of two unit-variance draws.
        let s = ChaosSchema {
            p: 3,
            dims: vec![Dim::sized(3), Dim::sized(3), Dim::sized(4)],
            q: 2,
            chaos_coords: vec![IndexSet(vec![0, 2]), IndexSet(vec![1, 2])],
            row_coord: IndexSet(vec![0]),
            col_coord: IndexSet(vec![1]),
            weight: WeightSpec::new(vec![Constraint::Less(0, 2)]),
            distribution: DistributionSpec::Rademacher,
            labels: None,
        };
        let trials = 4000;
        let mut second = DMatrix::<f64>::zeros(3, 3);
        let mut fourth = DMatrix::<f64>::zeros(3, 3);
        for t in 0..trials {
            let m = materialize_trial(&s, &MaterializeOptions::new(SampleMode::Decoupled), 8, t).unwrap().to_dense();
            second += m.map(|x| x * x);
            fourth += m.map(|x| x.powi(4));
        }
        for i in 0..3 {
            for j in 0..3 {
                let count = (0..4u64).filter(|&k| (i as u64) < k).count() as f64;
                let mean = second[(i, j)] / trials as f64;
                let var = fourth[(i, j)] / trials as f64 - mean * mean;
                let se = (var / trials as f64).sqrt();
                assert!((mean - count).abs() <= 3.0 * se + 1e-12, "({i},{j}): {mean} vs {count} ± {se}");
            }
        }
    }

    #[test]
    fn wigner_calibration() {
        let config = SampleConfig { trials: 10, seed: 1, dims: dims(&[("n", 512)]), mode: SampleMode::Coupled, ..SampleConfig::default() };
        let r = monte_carlo(&config).unwrap();
        let ratio = r.mean_norm / 512f64.sqrt();
        assert!((1.5..=2.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn exact_power_fit() {
        let pts: Vec<ScalingPoint> =
            [4.0, 16.0, 64.0, 256.0f64].iter().map(|&n| ScalingPoint { dim: n, mean: n.sqrt(), stderr: 0.0 }).collect();
        let r = scaling_fit(&pts).unwrap();
        assert!((r.slope - 0.5).abs() < 1e-12 && r.slope_ci < 1e-9);
        assert!(scaling_fit(&pts[..2]).is_err());
        let mut bad = pts.clone();
        bad[1].mean = 0.0;
        assert!(scaling_fit(&bad).is_err());
    }

    #[test]
    fn nck_bracket() {
        // Constants set to one; the envelope is a sanity band only.
        use crate::bounds::{all_profiles, Theorem};
        let k = 32.0;
        let cases = [
            (Target::Shape(Shape::wigner()), SampleMode::Coupled, dims(&[("n", 64)]), shape_coupled_schema(&Shape::wigner(), Some(64))),
            (Target::Schema(khatri_rao_schema(2, 4, 16).unwrap()), SampleMode::Decoupled, BTreeMap::new(), khatri_rao_schema(2, 4, 16).unwrap()),
        ];
        for (target, mode, d, schema) in cases {
            let r = monte_carlo(&SampleConfig { target, mode, dims: d, trials: 8, seed: 3, ..SampleConfig::default() }).unwrap();
            let profiles = all_profiles(&schema).unwrap();
            let value = |t: Theorem| profiles.iter().find(|p| p.theorem == t).unwrap().numeric_value.unwrap();
            assert!(value(Theorem::NckLower) / k <= r.mean_norm, "lower {} vs {}", value(Theorem::NckLower), r.mean_norm);
            assert!(r.mean_norm <= k * value(Theorem::NckUpper), "upper {} vs {}", value(Theorem::NckUpper), r.mean_norm);
        }
    }
}
