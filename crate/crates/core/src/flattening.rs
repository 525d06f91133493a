//! Flattenings of the coefficient tensor: enumeration by class, closed-form
//! norms, tables, chaos parameters and an explicit-matrix oracle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::FlatteningError;
use crate::monomial::{Monomial, MonomialMax};
use crate::schema::ChaosSchema;

pub const DEFAULT_ORACLE_CAP: u64 = 4096;
const LATTICE_CAP: u128 = 1 << 24;

/// Where a coordinate (or summation index) lands in a flattening.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Placement {
    Row,
    Col,
    Both,
    Neither,
}

impl Placement {
    pub fn in_row(self) -> bool {
        matches!(self, Placement::Row | Placement::Both)
    }

    pub fn in_col(self) -> bool {
        matches!(self, Placement::Col | Placement::Both)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Placement::Row => "R",
            Placement::Col => "C",
            Placement::Both => "RC",
            Placement::Neither => "-",
        }
    }

    fn of(row: bool, col: bool) -> Placement {
        match (row, col) {
            (true, false) => Placement::Row,
            (false, true) => Placement::Col,
            (true, true) => Placement::Both,
            (false, false) => Placement::Neither,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FlatteningClass {
    Sigma,
    V,
    Rr,
    Other,
}

impl FlatteningClass {
    pub const NAMED: [FlatteningClass; 3] = [FlatteningClass::Sigma, FlatteningClass::V, FlatteningClass::Rr];

    pub fn symbol(self) -> &'static str {
        match self {
            FlatteningClass::Sigma => "σ",
            FlatteningClass::V => "v",
            FlatteningClass::Rr => "r",
            FlatteningClass::Other => "other",
        }
    }

    pub fn ascii(self) -> &'static str {
        match self {
            FlatteningClass::Sigma => "sigma",
            FlatteningClass::V => "v",
            FlatteningClass::Rr => "r",
            FlatteningClass::Other => "other",
        }
    }
}

impl fmt::Display for FlatteningClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A choice of row set R and column set C over the `q + 2` coordinates, with
/// the induced placement of every summation index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FlatteningAssignment {
    pub placements: Vec<Placement>,
    pub class: FlatteningClass,
    pub split: Vec<Placement>,
}

impl FlatteningAssignment {
    pub fn new(schema: &ChaosSchema, placements: Vec<Placement>) -> Self {
        assert_eq!(placements.len(), schema.n_coords(), "one placement per coordinate");
        let class = classify(schema.q, &placements);
        let (rm, cm) = index_masks(schema, &placements);
        let split = (0..schema.p).map(|u| Placement::of(rm >> u & 1 == 1, cm >> u & 1 == 1)).collect();
        FlatteningAssignment { placements, class, split }
    }

    pub fn row_coords(&self) -> Vec<usize> {
        (0..self.placements.len()).filter(|&t| self.placements[t].in_row()).collect()
    }

    pub fn col_coords(&self) -> Vec<usize> {
        (0..self.placements.len()).filter(|&t| self.placements[t].in_col()).collect()
    }

    /// Bitmasks of the index sets 𝓡 and 𝓒.
    pub fn masks(&self) -> (u64, u64) {
        self.split.iter().enumerate().fold((0, 0), |(r, c), (u, pl)| {
            (r | (pl.in_row() as u64) << u, c | (pl.in_col() as u64) << u)
        })
    }

    pub fn placement_string(&self) -> String {
        join_symbols(&self.placements)
    }

    pub fn split_string(&self) -> String {
        join_symbols(&self.split)
    }
}

fn join_symbols(v: &[Placement]) -> String {
    v.iter().map(|p| p.symbol()).collect::<Vec<_>>().join(" ")
}

fn index_masks(schema: &ChaosSchema, placements: &[Placement]) -> (u64, u64) {
    let mut rm = 0;
    let mut cm = 0;
    for (t, pl) in placements.iter().enumerate() {
        let m = schema.coord(t).mask();
        if pl.in_row() {
            rm |= m;
        }
        if pl.in_col() {
            cm |= m;
        }
    }
    (rm, cm)
}

pub fn classify(q: usize, placements: &[Placement]) -> FlatteningClass {
    let chaos = &placements[..q];
    let (row, col) = (placements[q], placements[q + 1]);
    let split = placements.iter().all(|p| matches!(p, Placement::Row | Placement::Col));
    if split && row == Placement::Row && col == Placement::Col {
        return FlatteningClass::Sigma;
    }
    if split && row == Placement::Col && col == Placement::Col && chaos.contains(&Placement::Row) {
        return FlatteningClass::V;
    }
    if row == Placement::Row
        && col == Placement::Col
        && !chaos.contains(&Placement::Neither)
        && chaos.contains(&Placement::Both)
    {
        return FlatteningClass::Rr;
    }
    FlatteningClass::Other
}

/// All placement vectors over `alphabet` of length `len`, lexicographic with
/// the first entry most significant.
fn words(alphabet: &[Placement], len: usize) -> Vec<Vec<Placement>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&a| {
                    let mut w = w.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out
}

/// Assignments of one class in lexicographic order of the chaos placements
/// (Row < Col < Both).
pub fn enumerate_assignments(schema: &ChaosSchema, class: FlatteningClass) -> Vec<FlatteningAssignment> {
    use Placement::*;
    let q = schema.q;
    let (alphabet, tail): (&[Placement], Option<[Placement; 2]>) = match class {
        FlatteningClass::Sigma => (&[Row, Col], Some([Row, Col])),
        FlatteningClass::V => (&[Row, Col], Some([Col, Col])),
        FlatteningClass::Rr => (&[Row, Col, Both], Some([Row, Col])),
        FlatteningClass::Other => (&[Row, Col, Both, Neither], None),
    };
    let len = if tail.is_some() { q } else { q + 2 };
    words(alphabet, len)
        .into_iter()
        .map(|mut w| {
            if let Some(t) = tail {
                w.extend(t);
            }
            w
        })
        .filter(|w| classify(q, w) == class)
        .map(|w| FlatteningAssignment::new(schema, w))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatteningRow {
    pub assignment: FlatteningAssignment,
    /// `e_u = [u ∉ 𝓡] + [u ∉ 𝓒]`.
    pub exponents: Vec<u8>,
    #[serde(skip)]
    pub norm_sq_symbolic: Monomial,
    pub norm_sq_numeric: Option<f64>,
    pub is_upper_bound: bool,
}

/// Exponents `e_u` of the closed-form norm² for index masks 𝓡, 𝓒.
pub fn norm_exponents(p: usize, row_mask: u64, col_mask: u64) -> Vec<u8> {
    (0..p).map(|u| ((row_mask >> u & 1 == 0) as u8) + ((col_mask >> u & 1 == 0) as u8)).collect()
}

pub fn flattening_norm_sq(schema: &ChaosSchema, a: &FlatteningAssignment) -> FlatteningRow {
    let (rm, cm) = a.masks();
    let exponents = norm_exponents(schema.p, rm, cm);
    let mut sym = Monomial::one();
    for (u, &e) in exponents.iter().enumerate() {
        for _ in 0..e {
            sym.mul_dim(&schema.dims[u]);
        }
    }
    let numeric = schema
        .sizes()
        .ok()
        .map(|s| exponents.iter().zip(&s).map(|(&e, &n)| (n as f64).powi(e as i32)).product());
    FlatteningRow {
        assignment: a.clone(),
        exponents,
        norm_sq_symbolic: sym,
        norm_sq_numeric: numeric,
        is_upper_bound: !schema.weight.is_trivial(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatteningTable {
    pub rows: Vec<FlatteningRow>,
    pub highlights: Vec<usize>,
    pub symbol_order: Vec<String>,
    pub coord_labels: Vec<String>,
    pub index_labels: Vec<String>,
}

impl FlatteningTable {
    pub fn class_rows(&self, class: FlatteningClass) -> impl Iterator<Item = &FlatteningRow> {
        self.rows.iter().filter(move |r| r.assignment.class == class)
    }

    pub fn class_max(&self, class: FlatteningClass) -> MonomialMax {
        self.class_rows(class).map(|r| r.norm_sq_symbolic.clone()).collect()
    }

    pub fn class_numeric_max(&self, class: FlatteningClass) -> Option<f64> {
        self.class_rows(class).try_fold(0.0f64, |acc, r| Some(acc.max(r.norm_sq_numeric?)))
    }

    pub fn is_highlighted(&self, row: usize) -> bool {
        self.highlights.contains(&row)
    }

    pub fn is_upper_bound(&self) -> bool {
        self.rows.first().is_some_and(|r| r.is_upper_bound)
    }

    /// Plain-text table: type | coordinate placements | index placements | norm².
    pub fn render_text(&self) -> String {
        let nc = self.coord_labels.len();
        let q = nc - 2;
        let mut header = vec!["type".to_string()];
        header.extend(self.coord_labels[..q].iter().cloned());
        header.push(":".into());
        header.extend(self.coord_labels[q..].iter().cloned());
        header.push("|".into());
        header.extend(self.index_labels.iter().cloned());
        header.push("|".into());
        header.push("norm²".into());

        let mut lines: Vec<Option<Vec<String>>> = vec![Some(header)];
        let mut last = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = &row.assignment;
            if last.is_some() && last != Some(a.class) {
                lines.push(None);
            }
            last = Some(a.class);
            let mut cells = vec![a.class.symbol().to_string()];
            cells.extend(a.placements[..q].iter().map(|p| p.symbol().to_string()));
            cells.push(":".into());
            cells.extend(a.placements[q..].iter().map(|p| p.symbol().to_string()));
            cells.push("|".into());
            cells.extend(a.split.iter().map(|p| p.symbol().to_string()));
            cells.push("|".into());
            let mut norm = row.norm_sq_symbolic.render(&self.symbol_order);
            if self.is_highlighted(i) {
                norm.push_str(" *");
            }
            cells.push(norm);
            lines.push(Some(cells));
        }

        let ncols = lines[0].as_ref().map_or(0, |c| c.len());
        let mut widths = vec![0; ncols];
        for cells in lines.iter().flatten() {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.chars().count());
            }
        }
        let total: usize = widths.iter().sum::<usize>() + ncols - 1;
        let mut out = String::new();
        for line in &lines {
            match line {
                None => out.push_str(&"-".repeat(total)),
                Some(cells) => {
                    let mut s = String::new();
                    for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
                        if k > 0 {
                            s.push(' ');
                        }
                        s.push_str(c);
                        s.extend(std::iter::repeat_n(' ', w - c.chars().count()));
                    }
                    out.push_str(s.trim_end());
                }
            }
            out.push('\n');
        }
        out.push_str("* per-class maximum");
        if self.is_upper_bound() {
            out.push_str("; weighted chaos: norms are upper bounds");
        }
        out.push('\n');
        out
    }

    pub fn render_csv(&self) -> String {
        let numeric = self.rows.iter().all(|r| r.norm_sq_numeric.is_some());
        let mut out = String::from("class,placements,exponents,norm_sq");
        if numeric {
            out.push_str(",norm_sq_value");
        }
        out.push_str(",max\n");
        for (i, r) in self.rows.iter().enumerate() {
            let exps = r.exponents.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ");
            out.push_str(&format!(
                "{},{},{},{}",
                r.assignment.class.ascii(),
                r.assignment.placement_string(),
                exps,
                r.norm_sq_symbolic.render(&self.symbol_order)
            ));
            if let (true, Some(v)) = (numeric, r.norm_sq_numeric) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(if self.is_highlighted(i) { ",1\n" } else { ",0\n" });
        }
        out
    }
}

pub fn build_table(schema: &ChaosSchema) -> FlatteningTable {
    let mut rows = Vec::new();
    let mut highlights = Vec::new();
    for class in FlatteningClass::NAMED {
        let start = rows.len();
        rows.extend(enumerate_assignments(schema, class).iter().map(|a| flattening_norm_sq(schema, a)));
        let max: MonomialMax = rows[start..].iter().map(|r| r.norm_sq_symbolic.clone()).collect();
        highlights.extend((start..rows.len()).filter(|&i| max.terms().contains(&rows[i].norm_sq_symbolic)));
    }
    FlatteningTable {
        rows,
        highlights,
        symbol_order: schema.symbols(),
        coord_labels: (0..schema.n_coords()).map(|t| schema.coord_label(t)).collect(),
        index_labels: (0..schema.p).map(|u| schema.label(u)).collect(),
    }
}

/// One chaos parameter: the symbolic maximum of a class at squared scale and
/// its numeric square root when the schema is bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterValue {
    pub norm_sq: MonomialMax,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosParameters {
    pub q: usize,
    pub sigma: ParameterValue,
    pub v: ParameterValue,
    pub r: ParameterValue,
    pub symbol_order: Vec<String>,
}

impl ChaosParameters {
    pub fn get(&self, class: FlatteningClass) -> &ParameterValue {
        match class {
            FlatteningClass::Sigma => &self.sigma,
            FlatteningClass::V => &self.v,
            FlatteningClass::Rr => &self.r,
            FlatteningClass::Other => panic!("no parameter for unclassified flattenings"),
        }
    }

    /// Symbolic parameter at norm scale, e.g. `d ∨ √n`.
    pub fn render(&self, class: FlatteningClass) -> String {
        self.get(class).norm_sq.render_sqrt(&self.symbol_order)
    }

    /// Numeric `(σ, v, r)`; `None` unless the schema is bound.
    pub fn values(&self) -> Option<(f64, f64, f64)> {
        Some((self.sigma.value?, self.v.value?, self.r.value?))
    }
}

pub fn chaos_parameters(schema: &ChaosSchema) -> ChaosParameters {
    parameters_from_table(schema.q, &build_table(schema))
}

pub fn parameters_from_table(q: usize, table: &FlatteningTable) -> ChaosParameters {
    let value = |class| ParameterValue {
        norm_sq: table.class_max(class),
        value: table.class_numeric_max(class).map(f64::sqrt),
    };
    ChaosParameters {
        q,
        sigma: value(FlatteningClass::Sigma),
        v: value(FlatteningClass::V),
        r: value(FlatteningClass::Rr),
        symbol_order: table.symbol_order.clone(),
    }
}

/// Nonzero entries of an explicit flattening, keyed by linearized row and
/// column. Rows concatenate the row-side coordinates in coordinate order, each
/// in its listed index order, mixed radix with the last index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitFlattening {
    pub rows: u128,
    pub cols: u128,
    pub entries: Vec<(u128, u128, f64)>,
}

impl ExplicitFlattening {
    /// The full matrix.
    pub fn to_dense(&self, cap: u64) -> Result<DMatrix<f64>, FlatteningError> {
        if self.rows > cap as u128 || self.cols > cap as u128 {
            return Err(too_large(self.rows, self.cols, cap));
        }
        let mut m = DMatrix::zeros(self.rows as usize, self.cols as usize);
        for &(i, j, v) in &self.entries {
            m[(i as usize, j as usize)] += v;
        }
        Ok(m)
    }

    /// The matrix with all-zero rows and columns removed, which leaves every
    /// singular value unchanged.
    pub fn compressed(&self, cap: u64) -> Result<DMatrix<f64>, FlatteningError> {
        let rank = |keys: Vec<u128>| -> HashMap<u128, usize> {
            let mut keys = keys;
            keys.sort_unstable();
            keys.dedup();
            keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
        };
        let ri = rank(self.entries.iter().map(|e| e.0).collect());
        let ci = rank(self.entries.iter().map(|e| e.1).collect());
        if ri.len() as u64 > cap || ci.len() as u64 > cap {
            return Err(too_large(ri.len() as u128, ci.len() as u128, cap));
        }
        let mut m = DMatrix::zeros(ri.len(), ci.len());
        for &(i, j, v) in &self.entries {
            m[(ri[&i], ci[&j])] += v;
        }
        Ok(m)
    }

    pub fn spectral_norm(&self, cap: u64) -> Result<f64, FlatteningError> {
        Ok(dense_norm(&self.compressed(cap)?))
    }
}

fn too_large(rows: u128, cols: u128, cap: u64) -> FlatteningError {
    let clamp = |x: u128| x.min(u64::MAX as u128) as u64;
    FlatteningError::OracleTooLarge { rows: clamp(rows), cols: clamp(cols), cap }
}

pub(crate) fn dense_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn explicit_flattening(
    schema: &ChaosSchema,
    a: &FlatteningAssignment,
) -> Result<ExplicitFlattening, FlatteningError> {
    let sizes = schema.sizes()?;
    let lattice: u128 = sizes.iter().map(|&n| n as u128).product();
    if lattice > LATTICE_CAP {
        return Err(too_large(lattice, 1, LATTICE_CAP as u64));
    }
    let side = |coords: &[usize]| -> Vec<(usize, u128)> {
        let idx: Vec<usize> = coords.iter().flat_map(|&t| schema.coord(t).iter()).collect();
        let mut stride = 1u128;
        let mut out = vec![(0, 0); idx.len()];
        for (k, &u) in idx.iter().enumerate().rev() {
            out[k] = (u, stride);
            stride = stride.saturating_mul(sizes[u] as u128);
        }
        out
    };
    let rspec = side(&a.row_coords());
    let cspec = side(&a.col_coords());
    let extent = |spec: &[(usize, u128)]| spec.iter().map(|&(u, _)| sizes[u] as u128).product::<u128>();

    let mut acc: BTreeMap<(u128, u128), f64> = BTreeMap::new();
    let mut s = vec![0u64; schema.p];
    loop {
        if schema.weight.holds(&s) {
            let r: u128 = rspec.iter().map(|&(u, st)| s[u] as u128 * st).sum();
            let c: u128 = cspec.iter().map(|&(u, st)| s[u] as u128 * st).sum();
            *acc.entry((r, c)).or_insert(0.0) += 1.0;
        }
        if !advance(&mut s, &sizes) {
            break;
        }
    }
    Ok(ExplicitFlattening {
        rows: extent(&rspec),
        cols: extent(&cspec),
        entries: acc.into_iter().map(|((r, c), v)| (r, c, v)).collect(),
    })
}

/// Odometer step over the lattice, last index fastest. False after the end.
pub(crate) fn advance(s: &mut [u64], sizes: &[u64]) -> bool {
    for u in (0..s.len()).rev() {
        s[u] += 1;
        if s[u] < sizes[u] {
            return true;
        }
        s[u] = 0;
    }
    false
}

/// Flattening of an explicit order-`(q+2)` coefficient tensor with coordinate
/// extents `extents`, entries read through `coeff`.
pub fn flatten_tensor(
    extents: &[usize],
    coeff: impl Fn(&[usize]) -> f64,
    placements: &[Placement],
) -> DMatrix<f64> {
    assert_eq!(extents.len(), placements.len());
    let radix = |side: fn(Placement) -> bool| -> (usize, Vec<(usize, usize)>) {
        let ts: Vec<usize> = (0..extents.len()).filter(|&t| side(placements[t])).collect();
        let mut stride = 1;
        let mut out = vec![(0, 0); ts.len()];
        for (k, &t) in ts.iter().enumerate().rev() {
            out[k] = (t, stride);
            stride *= extents[t];
        }
        (stride, out)
    };
    let (nr, rs) = radix(Placement::in_row);
    let (nc, cs) = radix(Placement::in_col);
    let mut m = DMatrix::zeros(nr, nc);
    let sizes: Vec<u64> = extents.iter().map(|&e| e as u64).collect();
    let mut i = vec![0u64; extents.len()];
    if sizes.contains(&0) {
        return m;
    }
    loop {
        let iu: Vec<usize> = i.iter().map(|&x| x as usize).collect();
        let v = coeff(&iu);
        if v != 0.0 {
            let r: usize = rs.iter().map(|&(t, st)| iu[t] * st).sum();
            let c: usize = cs.iter().map(|&(t, st)| iu[t] * st).sum();
            m[(r, c)] += v;
        }
        if !advance(&mut i, &sizes) {
            break;
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub class: FlatteningClass,
    pub placements: String,
    pub formula_norm_sq: f64,
    pub explicit_norm_sq: f64,
    /// Equality expected (weightless) rather than an upper bound.
    pub exact: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
}

impl OracleReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

pub const ORACLE_TOL: f64 = 1e-9;

pub fn oracle_check(schema: &ChaosSchema, cap: u64) -> Result<OracleReport, FlatteningError> {
    oracle_check_with(schema, cap, |s, a| {
        flattening_norm_sq(s, a).norm_sq_numeric.expect("bound schema")
    })
}

/// Oracle comparison against an arbitrary formula.
pub fn oracle_check_with(
    schema: &ChaosSchema,
    cap: u64,
    formula: impl Fn(&ChaosSchema, &FlatteningAssignment) -> f64,
) -> Result<OracleReport, FlatteningError> {
    schema.sizes()?;
    let exact = schema.weight.is_trivial();
    let mut rows = Vec::new();
    for class in FlatteningClass::NAMED {
        for a in enumerate_assignments(schema, class) {
            let f = formula(schema, &a);
            let e = explicit_flattening(schema, &a)?.spectral_norm(cap)?.powi(2);
            let slack = ORACLE_TOL * f.abs().max(e.abs()).max(1.0);
            let pass = if exact { (f - e).abs() <= slack } else { f >= e - slack };
            rows.push(OracleRow {
                class,
                placements: a.placement_string(),
                formula_norm_sq: f,
                explicit_norm_sq: e,
                exact,
                pass,
            });
        }
    }
    Ok(OracleReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ellipsoid_schemas, khatri_rao_schema, tensor_pca_schemas, Dim, IndexSet, WeightSpec};
    use crate::schema::{Constraint, DistributionSpec};

    fn norms(t: &FlatteningTable, class: FlatteningClass) -> Vec<String> {
        t.class_rows(class).map(|r| r.norm_sq_symbolic.render(&t.symbol_order)).collect()
    }

    #[test]
    fn khatri_rao_table() {
        let t = build_table(&khatri_rao_schema(2, 5, 7).unwrap().unbind());
        assert_eq!(norms(&t, FlatteningClass::Sigma), ["d^2", "d", "d", "n"]);
        assert_eq!(norms(&t, FlatteningClass::V), ["1", "d", "d"]);
        assert_eq!(norms(&t, FlatteningClass::Rr), ["d", "1", "d", "1", "1"]);
        assert_eq!(t.highlights, vec![0, 3, 5, 6, 7, 9]);
        let sigma: Vec<String> = t.class_rows(FlatteningClass::Sigma).map(|r| r.assignment.placement_string()).collect();
        assert_eq!(sigma, ["R R R C", "R C R C", "C R R C", "C C R C"]);
        let first = &t.rows[0].assignment;
        assert_eq!(first.split_string(), "R R RC");
    }

    #[test]
    fn class_order_and_counts() {
        let s = khatri_rao_schema(2, 2, 2).unwrap();
        let r = enumerate_assignments(&s, FlatteningClass::Rr);
        let w: Vec<String> = r.iter().map(|a| a.placement_string()).collect();
        assert_eq!(w, ["R RC R C", "C RC R C", "RC R R C", "RC C R C", "RC RC R C"]);
        let s1 = khatri_rao_schema(1, 2, 2).unwrap();
        let v = enumerate_assignments(&s1, FlatteningClass::V);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].placements, vec![Placement::Row, Placement::Col, Placement::Col]);
    }

    #[test]
    fn other_class_is_disjoint() {
        let s = khatri_rao_schema(2, 2, 2).unwrap();
        let other = enumerate_assignments(&s, FlatteningClass::Other);
        assert_eq!(other.len(), 4usize.pow(4) - 4 - 3 - 5);
        assert!(other.iter().all(|a| a.class == FlatteningClass::Other));
    }

    #[test]
    fn full_index_sets_give_one() {
        let s = khatri_rao_schema(2, 3, 4).unwrap();
        let a = FlatteningAssignment::new(&s, vec![Placement::Both; 4]);
        assert_eq!(flattening_norm_sq(&s, &a).norm_sq_numeric, Some(1.0));
    }

    #[test]
    fn tensor_pca_tables() {
        let (y1, y2) = tensor_pca_schemas(4, 3);
        let t1 = build_table(&y1.unbind());
        assert_eq!(norms(&t1, FlatteningClass::Sigma), ["n·d", "n·d"]);
        assert_eq!(norms(&t1, FlatteningClass::V), ["n"]);
        assert_eq!(norms(&t1, FlatteningClass::Rr), ["1"]);

        let t2 = build_table(&y2.unbind());
        assert_eq!(norms(&t2, FlatteningClass::Sigma), ["n·d^2", "d^2", "d^2", "n·d^2"]);
        assert_eq!(norms(&t2, FlatteningClass::V), ["n", "d^2", "d^2"]);
        assert_eq!(t2.class_max(FlatteningClass::V), "d^2 ∨ n".parse().unwrap());
        assert!(t2.rows.iter().all(|r| r.is_upper_bound));
    }

    #[test]
    fn ellipsoid_tables() {
        let (phi, psi) = ellipsoid_schemas(5, 3);
        let p = chaos_parameters(&phi.unbind());
        assert_eq!(p.sigma.norm_sq, "m·d^2 ∨ m^2".parse().unwrap());
        assert_eq!(p.v.norm_sq, "d^2 ∨ m·d".parse().unwrap());
        assert_eq!(build_table(&phi).class_rows(FlatteningClass::Rr).count(), 81 - 16);

        let t = build_table(&psi.unbind());
        assert_eq!(norms(&t, FlatteningClass::Sigma), ["m·d", "m^2", "1", "m·d"]);
        assert_eq!(norms(&t, FlatteningClass::V), ["d", "m", "m"]);
        let p = parameters_from_table(2, &t);
        assert_eq!(p.render(FlatteningClass::Sigma), "√(m·d) ∨ m");
        assert_eq!(p.render(FlatteningClass::V), "√d ∨ √m");
    }

    #[test]
    fn khatri_rao_parameters() {
        let p = chaos_parameters(&khatri_rao_schema(2, 1, 1).unwrap().unbind());
        assert_eq!(p.render(FlatteningClass::Sigma), "d ∨ √n");
        assert_eq!(p.render(FlatteningClass::V), "√d");
        assert_eq!(p.render(FlatteningClass::Rr), "√d");
        let p3 = chaos_parameters(&khatri_rao_schema(3, 2, 100).unwrap());
        assert_eq!(p3.sigma.value, Some(10.0));
    }

    #[test]
    fn explicit_khatri_rao_rrrc() {
        let s = khatri_rao_schema(2, 2, 2).unwrap();
        let a = &enumerate_assignments(&s, FlatteningClass::Sigma)[0];
        let e = explicit_flattening(&s, a).unwrap();
        assert_eq!((e.rows, e.cols), (64, 2));
        let m = e.compressed(DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(m.shape(), (8, 2));
        assert!((dense_norm(&m) - 2.0).abs() < 1e-12);
        assert!((dense_norm(&e.to_dense(DEFAULT_ORACLE_CAP).unwrap()) - 2.0).abs() < 1e-12);
        assert!(matches!(e.to_dense(10), Err(FlatteningError::OracleTooLarge { .. })));
    }

    #[test]
    fn stacked_and_block_diagonal() {
        // q = 1 chaos with coefficients A_i (2x3), i in 0..3.
        let a = |i: usize, r: usize, c: usize| (1 + i * 7 + r * 3 + c) as f64;
        let coeff = |x: &[usize]| a(x[0], x[1], x[2]);
        use Placement::*;
        let stacked = flatten_tensor(&[3, 2, 3], coeff, &[Row, Row, Col]);
        assert_eq!(stacked.shape(), (6, 3));
        for i in 0..3 {
            for r in 0..2 {
                for c in 0..3 {
                    assert_eq!(stacked[(i * 2 + r, c)], a(i, r, c));
                }
            }
        }
        let diag = flatten_tensor(&[3, 2, 3], coeff, &[Both, Row, Col]);
        assert_eq!(diag.shape(), (6, 9));
        for i in 0..3 {
            for j in 0..3 {
                for r in 0..2 {
                    for c in 0..3 {
                        let want = if i == j { a(i, r, c) } else { 0.0 };
                        assert_eq!(diag[(i * 2 + r, j * 3 + c)], want);
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_khatri_rao_and_psi() {
        let r = oracle_check(&khatri_rao_schema(2, 3, 4).unwrap(), DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(r.rows.len(), 12);
        assert!(r.all_pass() && r.rows.iter().all(|x| x.exact));

        let (_, psi) = ellipsoid_schemas(3, 2);
        let r = oracle_check(&psi, DEFAULT_ORACLE_CAP).unwrap();
        assert!(r.all_pass() && r.rows.iter().all(|x| !x.exact));
    }

    #[test]
    fn oracle_zero_weight() {
        let s = ChaosSchema {
            p: 2,
            dims: vec![Dim::sized(3), Dim::sized(3)],
            q: 1,
            chaos_coords: vec![IndexSet(vec![0, 1])],
            row_coord: IndexSet(vec![0]),
            col_coord: IndexSet(vec![1]),
            weight: WeightSpec::new(vec![Constraint::Less(0, 1), Constraint::Less(1, 0)]),
            distribution: DistributionSpec::Gaussian,
            labels: None,
        };
        let r = oracle_check(&s, DEFAULT_ORACLE_CAP).unwrap();
        assert!(r.all_pass());
        assert!(r.rows.iter().all(|x| x.explicit_norm_sq == 0.0));
    }

    #[test]
    fn oracle_catches_corrupted_formula() {
        let s = khatri_rao_schema(2, 3, 4).unwrap();
        let r = oracle_check_with(&s, DEFAULT_ORACLE_CAP, |s, a| {
            let row = flattening_norm_sq(s, a);
            row.norm_sq_numeric.unwrap() * if row.exponents[0] > 0 { 3.0 } else { 1.0 }
        })
        .unwrap();
        assert!(!r.all_pass());
    }
}
