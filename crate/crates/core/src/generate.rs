//! Random schemas and shapes for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::Shape;
use crate::schema::{weight_satisfiable, ChaosSchema, Constraint, Dim, DistributionSpec, IndexSet, WeightSpec};

#[derive(Clone, Copy, Debug)]
pub struct SchemaGen {
    pub max_p: usize,
    pub max_q: usize,
    pub min_dim: u64,
    pub max_dim: u64,
    pub weighted: bool,
}

impl Default for SchemaGen {
    fn default() -> Self {
        SchemaGen { max_p: 4, max_q: 3, min_dim: 1, max_dim: 4, weighted: false }
    }
}

fn subset(rng: &mut impl Rng, p: usize, prob: f64) -> IndexSet {
    IndexSet((0..p).filter(|_| rng.random_bool(prob)).collect())
}

fn random_constraint(rng: &mut impl Rng, p: usize) -> Constraint {
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(rng);
    match rng.random_range(0..4) {
        0 => Constraint::AllDistinct(idx[..rng.random_range(2..=p)].to_vec()),
        1 => Constraint::Less(idx[0], idx[1]),
        2 => Constraint::Greater(idx[0], idx[1]),
        _ => {
            let k = rng.random_range(1..=p / 2);
            let mut a = idx[..k].to_vec();
            let mut b = idx[k..2 * k].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            Constraint::NotEqualTuple(a, b)
        }
    }
}

/// A bound schema with a satisfiable weight (nontrivial when `weighted` and
/// `p ≥ 2`). Every summation index is used by some coordinate.
pub fn random_schema(rng: &mut impl Rng, g: &SchemaGen) -> ChaosSchema {
    loop {
        let p = rng.random_range(1..=g.max_p);
        let q = rng.random_range(1..=g.max_q);
        let dims: Vec<Dim> = (0..p).map(|_| Dim::sized(rng.random_range(g.min_dim..=g.max_dim))).collect();
        let mut coords: Vec<IndexSet> = (0..q + 2).map(|_| subset(rng, p, 0.4)).collect();
        for u in 0..p {
            if !coords.iter().any(|c| c.0.contains(&u)) {
                let t = rng.random_range(0..q + 2);
                coords[t].0.push(u);
                coords[t].0.sort_unstable();
            }
        }
        let col = coords.pop().expect("q + 2 coordinates");
        let row = coords.pop().expect("q + 1 coordinates");
        let constraints = if g.weighted && p >= 2 {
            (0..rng.random_range(1..=2)).map(|_| random_constraint(rng, p)).collect()
        } else {
            Vec::new()
        };
        let schema = ChaosSchema {
            p,
            dims,
            q,
            chaos_coords: coords,
            row_coord: row,
            col_coord: col,
            weight: WeightSpec::new(constraints),
            distribution: DistributionSpec::Gaussian,
            labels: None,
        };
        if weight_satisfiable(&schema) == Some(true) {
            return schema;
        }
    }
}

/// Vertex classes and edges drawn independently; edge probability `density`.
pub fn random_shape(rng: &mut impl Rng, max_vertices: usize, density: f64) -> Shape {
    let k = rng.random_range(1..=max_vertices);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for v in 0..k {
        match rng.random_range(0..4) {
            0 => left.push(v),
            1 => right.push(v),
            2 => {
                left.push(v);
                right.push(v);
            }
            _ => {}
        }
    }
    left.shuffle(rng);
    right.shuffle(rng);
    let edges = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).filter(|_| rng.random_bool(density)).collect();
    let names = (0..k).map(|v| format!("v{v}")).collect();
    Shape::from_indices(names, left, right, edges).expect("generated shape is valid")
}
