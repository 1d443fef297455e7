//! Sampled metric measure spaces, set indicators and scalar fields.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::par;

/// Regular cell-centered grid on an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dims: usize,
    pub shape: [usize; 3],
    pub lo: [f64; 3],
    pub spacing: [f64; 3],
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.shape[..self.dims].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major multi-index (last axis fastest). Unused axes are zero.
    pub fn multi_index(&self, mut i: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for axis in (0..self.dims).rev() {
            out[axis] = i % self.shape[axis];
            i /= self.shape[axis];
        }
        out
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let mut flat = 0;
        for axis in 0..self.dims {
            flat = flat * self.shape[axis] + idx[axis];
        }
        flat
    }

    pub fn coord(&self, i: usize) -> [f64; 3] {
        let idx = self.multi_index(i);
        let mut c = [0.0; 3];
        for axis in 0..self.dims {
            c[axis] = self.lo[axis] + (idx[axis] as f64 + 0.5) * self.spacing[axis];
        }
        c
    }

    /// Equal spacing along every used axis.
    pub fn is_isotropic(&self) -> bool {
        let s0 = self.spacing[0];
        self.spacing[..self.dims].iter().all(|&s| (s - s0).abs() <= 1e-12 * s0)
    }
}

/// Distance oracle of a sampled space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    /// Euclidean distance between grid cell centers.
    Grid(GridGeometry),
    /// Arc-length distance between `n` equally spaced points on a circle.
    Circle { n: usize, circumference: f64 },
    /// Euclidean distance between explicit coordinates.
    Points { dims: usize, coords: Vec<[f64; 3]> },
    /// Explicit symmetric matrix, row-major.
    Matrix { n: usize, d: Vec<f64> },
    /// Shortest-path metric of a weighted graph; `d` caches all pairs.
    Graph { n: usize, d: Vec<f64>, adjacency: Vec<Vec<(usize, f64)>> },
}

impl Metric {
    pub fn len(&self) -> usize {
        match self {
            Metric::Grid(g) => g.len(),
            Metric::Circle { n, .. } => *n,
            Metric::Points { coords, .. } => coords.len(),
            Metric::Matrix { n, .. } | Metric::Graph { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match self {
            Metric::Grid(g) => {
                let (a, b) = (g.multi_index(i), g.multi_index(j));
                let mut s = 0.0;
                for axis in 0..g.dims {
                    let t = (a[axis] as f64 - b[axis] as f64) * g.spacing[axis];
                    s += t * t;
                }
                s.sqrt()
            }
            Metric::Circle { n, circumference } => {
                let k = i.abs_diff(j);
                let k = k.min(n - k);
                k as f64 * circumference / *n as f64
            }
            Metric::Points { dims, coords } => euclid(&coords[i], &coords[j], *dims),
            Metric::Matrix { n, d } | Metric::Graph { n, d, .. } => d[i * n + j],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Metric::Grid(_) => "grid",
            Metric::Circle { .. } => "circle",
            Metric::Points { .. } => "points",
            Metric::Matrix { .. } => "matrix",
            Metric::Graph { .. } => "graph",
        }
    }
}

fn euclid(a: &[f64; 3], b: &[f64; 3], dims: usize) -> f64 {
    let mut s = 0.0;
    for axis in 0..dims {
        let t = a[axis] - b[axis];
        s += t * t;
    }
    s.sqrt()
}

/// Weight density used by grid generators. Weights are exact cell integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Density {
    Unit,
    Constant(f64),
    /// `1` on a depth-truncated fat Cantor set in `[0,1]`, `gap_weight` on its gaps.
    FatCantor {
        target_k_mass: f64,
        depth: usize,
        gap_weight: f64,
    },
}

/// Depth-truncated fat Cantor set built by centered gap removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatCantor {
    pub target_k_mass: f64,
    pub depth: usize,
    pub gap_weight: f64,
    /// Removed open gaps, sorted, tagged with their removal stage (1-based).
    pub gaps: Vec<(f64, f64, usize)>,
    /// Sample marks of the set itself.
    pub k_marks: Vec<bool>,
}

impl FatCantor {
    /// Gap lengths `c·4^{-k}` with `c = 2(1 - |K|)` remove exactly `1 - |K|` in the limit.
    pub fn gaps_for(target_k_mass: f64, depth: usize) -> Result<Vec<(f64, f64, usize)>> {
        if !(target_k_mass > 0.0 && target_k_mass < 1.0) {
            return Err(GeoError::param("target_k_mass", "must lie in (0, 1)"));
        }
        if depth == 0 {
            return Err(GeoError::param("depth", "must be at least 1"));
        }
        let c = 2.0 * (1.0 - target_k_mass);
        let mut intervals = vec![(0.0f64, 1.0f64)];
        let mut gaps = Vec::new();
        for stage in 1..=depth {
            let g = c * 0.25f64.powi(stage as i32);
            let mut next = Vec::with_capacity(2 * intervals.len());
            for &(a, b) in &intervals {
                if g >= b - a {
                    return Err(GeoError::param(
                        "target_k_mass",
                        format!("gap {g} at stage {stage} does not fit in interval of length {}", b - a),
                    ));
                }
                let mid = 0.5 * (a + b);
                let (ga, gb) = (mid - 0.5 * g, mid + 0.5 * g);
                gaps.push((ga, gb, stage));
                next.push((a, ga));
                next.push((gb, b));
            }
            intervals = next;
        }
        gaps.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(gaps)
    }

    /// Closed-form Lebesgue mass of the depth-truncated set.
    pub fn analytic_k_mass(target_k_mass: f64, depth: usize) -> f64 {
        let c = 2.0 * (1.0 - target_k_mass);
        let removed: f64 = (1..=depth).map(|k| 2f64.powi(k as i32 - 1) * c * 0.25f64.powi(k as i32)).sum();
        1.0 - removed
    }

    pub fn in_gap(&self, x: f64) -> bool {
        gap_containing(&self.gaps, x).is_some()
    }

    pub fn smallest_gap(&self) -> f64 {
        self.gaps.iter().map(|g| g.1 - g.0).fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue measure of `[a, b] ∩ gaps`.
    pub fn gap_overlap(&self, a: f64, b: f64) -> f64 {
        gap_overlap(&self.gaps, a, b)
    }
}

fn gap_containing(gaps: &[(f64, f64, usize)], x: f64) -> Option<usize> {
    let pos = gaps.partition_point(|g| g.0 < x);
    if pos > 0 && x < gaps[pos - 1].1 {
        Some(pos - 1)
    } else {
        None
    }
}

fn gap_overlap(gaps: &[(f64, f64, usize)], a: f64, b: f64) -> f64 {
    let start = gaps.partition_point(|g| g.1 <= a);
    let mut total = 0.0;
    for g in &gaps[start..] {
        if g.0 >= b {
            break;
        }
        total += (g.1.min(b) - g.0.max(a)).max(0.0);
    }
    total
}

/// Finite atomic sample `m = Σ w_i δ_{x_i}` of a metric measure space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSpace {
    id: u64,
    metric: Metric,
    weights: Vec<f64>,
    resolution_h: f64,
    length_space: bool,
    fat_cantor: Option<FatCantor>,
}

/// Boolean mark per sample point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetIndicator {
    marks: Vec<bool>,
    space_id: u64,
}

/// Finite real value per sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    values: Vec<f64>,
    space_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleAudit {
    pub checked: usize,
    pub violations: usize,
    pub witness: Option<(usize, usize, usize)>,
}

impl SampledSpace {
    fn assemble(
        metric: Metric,
        weights: Vec<f64>,
        resolution_h: f64,
        length_space: bool,
        fat_cantor: Option<FatCantor>,
    ) -> Result<Self> {
        if metric.len() != weights.len() {
            return Err(GeoError::ShapeMismatch(format!("{} points but {} weights", metric.len(), weights.len())));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(GeoError::InvalidWeight { index, value });
            }
        }
        if !(resolution_h.is_finite() && resolution_h > 0.0) {
            return Err(GeoError::param("resolution_h", "must be positive and finite"));
        }
        let id = fingerprint(&metric, &weights, resolution_h);
        Ok(SampledSpace { id, metric, weights, resolution_h, length_space, fat_cantor })
    }

    /// Uniform cell-centered grid on a box; weights integrate the density over each cell.
    pub fn grid_box(dims: usize, n_per_side: usize, bounds: &[(f64, f64)], density: &Density) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(GeoError::UnsupportedDimension(dims));
        }
        if n_per_side < 2 {
            return Err(GeoError::param("n_per_side", "must be at least 2"));
        }
        if bounds.len() != dims {
            return Err(GeoError::ShapeMismatch(format!("{} box extents for dimension {dims}", bounds.len())));
        }
        let mut lo = [0.0; 3];
        let mut spacing = [1.0; 3];
        let mut shape = [1; 3];
        for (axis, &(a, b)) in bounds.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(GeoError::param("box", format!("axis {axis} extent [{a}, {b}] is degenerate")));
            }
            lo[axis] = a;
            spacing[axis] = (b - a) / n_per_side as f64;
            shape[axis] = n_per_side;
        }
        let geom = GridGeometry { dims, shape, lo, spacing };
        let cell_volume: f64 = spacing[..dims].iter().product();
        let diag = spacing[..dims].iter().map(|s| s * s).sum::<f64>().sqrt();
        let resolution_h = 0.5 * diag;
        let n = geom.len();
        let (weights, fat) = match density {
            Density::Unit => (vec![cell_volume; n], None),
            Density::Constant(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(GeoError::NonPositiveDensity(*c));
                }
                (vec![c * cell_volume; n], None)
            }
            Density::FatCantor { target_k_mass, depth, gap_weight } => {
                if dims != 1 || bounds[0] != (0.0, 1.0) {
                    return Err(GeoError::param("density", "fat Cantor density needs the 1D box [0, 1]"));
                }
                if !(gap_weight.is_finite() && *gap_weight > 0.0) {
                    return Err(GeoError::NonPositiveDensity(*gap_weight));
                }
                let gaps = FatCantor::gaps_for(*target_k_mass, *depth)?;
                let mut weights = Vec::with_capacity(n);
                let mut k_marks = Vec::with_capacity(n);
                for i in 0..n {
                    let a = lo[0] + i as f64 * spacing[0];
                    let b = a + spacing[0];
                    let g = gap_overlap(&gaps, a, b);
                    weights.push((b - a) - (1.0 - gap_weight) * g);
                    k_marks.push(gap_containing(&gaps, geom.coord(i)[0]).is_none());
                }
                let fat = FatCantor { target_k_mass: *target_k_mass, depth: *depth, gap_weight: *gap_weight, gaps, k_marks };
                (weights, Some(fat))
            }
        };
        Self::assemble(Metric::Grid(geom), weights, resolution_h, true, fat)
    }

    /// The fat Cantor interval with `ω = 1` on the set and `ω = 1/2` on its gaps.
    pub fn fat_cantor_interval(n: usize, depth: usize, target_k_mass: f64) -> Result<Self> {
        Self::fat_cantor_interval_weighted(n, depth, target_k_mass, 0.5)
    }

    pub fn fat_cantor_interval_weighted(n: usize, depth: usize, target_k_mass: f64, gap_weight: f64) -> Result<Self> {
        let gaps = FatCantor::gaps_for(target_k_mass, depth)?;
        let smallest = gaps.iter().map(|g| g.1 - g.0).fold(f64::INFINITY, f64::min);
        let h = 0.5 / n.max(1) as f64;
        if h >= smallest {
            return Err(GeoError::ResolutionTooCoarse { h, gap: smallest });
        }
        Self::grid_box(1, n, &[(0.0, 1.0)], &Density::FatCantor { target_k_mass, depth, gap_weight })
    }

    /// `n` equally spaced points on a circle with the arc-length metric.
    pub fn circle(n: usize, circumference: f64) -> Result<Self> {
        if n < 3 {
            return Err(GeoError::param("n", "a circle needs at least 3 points"));
        }
        if !(circumference.is_finite() && circumference > 0.0) {
            return Err(GeoError::param("circumference", "must be positive"));
        }
        let step = circumference / n as f64;
        Self::assemble(Metric::Circle { n, circumference }, vec![step; n], 0.5 * step, true, None)
    }

    /// Validated finite metric space from an explicit distance matrix.
    pub fn explicit(matrix: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let n = matrix.len();
        if matrix.iter().any(|row| row.len() != n) {
            return Err(GeoError::ShapeMismatch("distance matrix is not square".into()));
        }
        let d: Vec<f64> = matrix.iter().flatten().copied().collect();
        validate_metric(n, &d)?;
        let h = d.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        let h = if h.is_finite() { h } else { 1.0 };
        Self::assemble(Metric::Matrix { n, d }, weights, h, false, None)
    }

    /// Shortest-path metric of a connected weighted graph.
    pub fn graph(n: usize, edges: &[(usize, usize, f64)], weights: Vec<f64>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, len) in edges {
            if a >= n || b >= n {
                return Err(GeoError::ShapeMismatch(format!("edge ({a}, {b}) out of range")));
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(GeoError::param("edges", format!("edge ({a}, {b}) has length {len}")));
            }
            adjacency[a].push((b, len));
            adjacency[b].push((a, len));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }
        let rows = par::map_range(n, |s| dijkstra(&adjacency, &[s]));
        let mut d = Vec::with_capacity(n * n);
        for (s, row) in rows.iter().enumerate() {
            if let Some(t) = row.iter().position(|x| !x.is_finite()) {
                return Err(GeoError::param("edges", format!("graph is disconnected: no path {s} -> {t}")));
            }
            d.extend_from_slice(row);
        }
        let h = edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
        let h = if h.is_finite() { h } else { 1.0 };
        Self::assemble(Metric::Graph { n, d, adjacency }, weights, h, false, None)
    }

    /// Euclidean point cloud with declared resolution.
    pub fn points(dims: usize, coords: Vec<[f64; 3]>, weights: Vec<f64>, resolution_h: f64, length_space: bool) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(GeoError::UnsupportedDimension(dims));
        }
        for (i, c) in coords.iter().enumerate() {
            if c[..dims].iter().any(|x| !x.is_finite()) {
                return Err(GeoError::NonFiniteValue(i));
            }
        }
        Self::assemble(Metric::Points { dims, coords }, weights, resolution_h, length_space, None)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn resolution_h(&self) -> f64 {
        self.resolution_h
    }

    pub fn is_length_space(&self) -> bool {
        self.length_space
    }

    pub fn fat_cantor(&self) -> Option<&FatCantor> {
        self.fat_cantor.as_ref()
    }

    pub fn grid(&self) -> Option<&GridGeometry> {
        match &self.metric {
            Metric::Grid(g) => Some(g),
            _ => None,
        }
    }

    pub fn dims(&self) -> Option<usize> {
        match &self.metric {
            Metric::Grid(g) => Some(g.dims),
            Metric::Points { dims, .. } => Some(*dims),
            _ => None,
        }
    }

    pub fn coords(&self, i: usize) -> Option<[f64; 3]> {
        match &self.metric {
            Metric::Grid(g) => Some(g.coord(i)),
            Metric::Points { coords, .. } => Some(coords[i]),
            Metric::Circle { n, circumference } => {
                let theta = std::f64::consts::TAU * i as f64 / *n as f64;
                let radius = circumference / std::f64::consts::TAU;
                Some([radius * theta.cos(), radius * theta.sin(), 0.0])
            }
            _ => None,
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.metric.dist(i, j)
    }

    pub fn total_mass(&self) -> f64 {
        par::ordered_sum(self.weights.iter().copied())
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        match &self.metric {
            Metric::Grid(g) => (0..g.dims).map(|a| ((g.shape[a] - 1) as f64 * g.spacing[a]).powi(2)).sum::<f64>().sqrt(),
            Metric::Circle { n, circumference } => (n / 2) as f64 * circumference / *n as f64,
            Metric::Matrix { d, .. } | Metric::Graph { d, .. } => d.iter().copied().fold(0.0, f64::max),
            Metric::Points { .. } => {
                let n = self.len();
                par::map_range(n, |i| (0..n).map(|j| self.dist(i, j)).fold(0.0, f64::max)).into_iter().fold(0.0, f64::max)
            }
        }
    }

    /// Mass of the marked points.
    pub fn measure(&self, set: &SetIndicator) -> Result<f64> {
        self.check(set)?;
        Ok(self.measure_marks(&set.marks))
    }

    pub(crate) fn measure_marks(&self, marks: &[bool]) -> f64 {
        par::ordered_sum(self.weights.iter().zip(marks).filter(|(_, &m)| m).map(|(&w, _)| w))
    }

    /// `∫ f dm`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        par::ordered_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    pub fn check(&self, set: &SetIndicator) -> Result<()> {
        if set.space_id != self.id || set.marks.len() != self.len() {
            return Err(GeoError::BindingMismatch);
        }
        Ok(())
    }

    pub fn check_field(&self, field: &ScalarField) -> Result<()> {
        if field.space_id != self.id || field.values.len() != self.len() {
            return Err(GeoError::BindingMismatch);
        }
        Ok(())
    }

    pub fn indicator(&self, marks: Vec<bool>) -> Result<SetIndicator> {
        if marks.len() != self.len() {
            return Err(GeoError::ShapeMismatch(format!("{} marks for {} points", marks.len(), self.len())));
        }
        Ok(SetIndicator { marks, space_id: self.id })
    }

    pub fn empty_set(&self) -> SetIndicator {
        SetIndicator { marks: vec![false; self.len()], space_id: self.id }
    }

    pub fn full_set(&self) -> SetIndicator {
        SetIndicator { marks: vec![true; self.len()], space_id: self.id }
    }

    pub fn singleton(&self, i: usize) -> SetIndicator {
        let mut s = self.empty_set();
        s.marks[i] = true;
        s
    }

    /// Marks points whose coordinates satisfy `pred`; spaces without coordinates mark nothing.
    pub fn indicator_where<F: Fn(&[f64; 3]) -> bool + Sync>(&self, pred: F) -> SetIndicator {
        let marks = par::map_range(self.len(), |i| self.coords(i).map(|c| pred(&c)).unwrap_or(false));
        SetIndicator { marks, space_id: self.id }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != self.len() {
            return Err(GeoError::ShapeMismatch(format!("{} values for {} points", values.len(), self.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GeoError::NonFiniteValue(i));
        }
        Ok(ScalarField { values, space_id: self.id })
    }

    pub fn field_from<F: Fn(&[f64; 3]) -> f64 + Sync>(&self, f: F) -> Result<ScalarField> {
        let values = par::map_range(self.len(), |i| self.coords(i).map(|c| f(&c)).unwrap_or(0.0));
        self.field(values)
    }

    pub fn indicator_field(&self, set: &SetIndicator) -> ScalarField {
        ScalarField { values: set.marks.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(), space_id: self.id }
    }

    pub(crate) fn bind_field(&self, values: Vec<f64>) -> ScalarField {
        ScalarField { values, space_id: self.id }
    }

    pub(crate) fn bind_set(&self, marks: Vec<bool>) -> SetIndicator {
        SetIndicator { marks, space_id: self.id }
    }

    /// Index of the sample point closest to `target` (coordinate spaces only).
    pub fn nearest_point(&self, target: &[f64; 3]) -> Option<usize> {
        let dims = self.dims()?;
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for i in 0..self.len() {
            let d = euclid(&self.coords(i)?, target, dims);
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best
    }

    /// Exhaustive metric-axiom check; used on explicit and small spaces.
    pub fn validate_exhaustive(&self) -> Result<()> {
        let n = self.len();
        let d: Vec<f64> = (0..n * n).map(|k| self.dist(k / n, k % n)).collect();
        validate_metric(n, &d)
    }

    /// Random-triple triangle-inequality audit with a seeded generator.
    pub fn audit_triangle(&self, triples: usize, seed: u64) -> TriangleAudit {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<(usize, usize, usize)> =
            (0..triples).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let bad = par::map_slice(&picks, |&(a, b, c)| {
            let (ab, bc, ac) = (self.dist(a, b), self.dist(b, c), self.dist(a, c));
            let scale = ab.max(bc).max(ac).max(1.0);
            ac > ab + bc + 1e-12 * scale
        });
        let violations = bad.iter().filter(|&&b| b).count();
        let witness = bad.iter().position(|&b| b).map(|k| picks[k]);
        TriangleAudit { checked: triples, violations, witness }
    }
}

fn validate_metric(n: usize, d: &[f64]) -> Result<()> {
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(GeoError::NonzeroDiagonal(i));
        }
        for j in 0..n {
            let x = d[i * n + j];
            if !x.is_finite() {
                return Err(GeoError::NonFiniteValue(i));
            }
            if x != d[j * n + i] {
                return Err(GeoError::Asymmetric(i, j));
            }
            if i != j && x <= 0.0 {
                return Err(GeoError::NonPositiveDistance(i, j));
            }
        }
    }
    let scale = d.iter().copied().fold(1.0, f64::max);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if d[a * n + c] > d[a * n + b] + d[b * n + c] + 1e-12 * scale {
                    return Err(GeoError::TriangleViolation { a, b, c });
                }
            }
        }
    }
    Ok(())
}

/// Multi-source Dijkstra over an adjacency list.
pub(crate) fn dijkstra(adjacency: &[Vec<(usize, f64)>], sources: &[usize]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Reverse((OrdF64(0.0), s)));
    }
    while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, len) in &adjacency[u] {
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((OrdF64(nd), v)));
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn fingerprint(metric: &Metric, weights: &[f64], h: f64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    feed(metric.len() as u64);
    feed(h.to_bits());
    match metric {
        Metric::Grid(g) => {
            feed(1);
            feed(g.dims as u64);
            for a in 0..3 {
                feed(g.shape[a] as u64);
                feed(g.lo[a].to_bits());
                feed(g.spacing[a].to_bits());
            }
        }
        Metric::Circle { n, circumference } => {
            feed(2);
            feed(*n as u64);
            feed(circumference.to_bits());
        }
        Metric::Points { dims, coords } => {
            feed(3);
            feed(*dims as u64);
            coords.iter().flatten().for_each(|x| feed(x.to_bits()));
        }
        Metric::Matrix { d, .. } => {
            feed(4);
            d.iter().for_each(|x| feed(x.to_bits()));
        }
        Metric::Graph { d, .. } => {
            feed(5);
            d.iter().for_each(|x| feed(x.to_bits()));
        }
    }
    weights.iter().for_each(|w| feed(w.to_bits()));
    hash
}

impl SetIndicator {
    pub fn marks(&self) -> &[bool] {
        &self.marks
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn count(&self) -> usize {
        self.marks.iter().filter(|&&m| m).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.marks[i]
    }

    pub fn has_points(&self) -> bool {
        self.marks.iter().any(|&m| m)
    }

    pub fn complement(&self) -> SetIndicator {
        SetIndicator { marks: self.marks.iter().map(|m| !m).collect(), space_id: self.space_id }
    }

    pub fn union(&self, other: &SetIndicator) -> SetIndicator {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &SetIndicator) -> SetIndicator {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &SetIndicator) -> SetIndicator {
        self.zip(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &SetIndicator) -> SetIndicator {
        self.zip(other, |a, b| a != b)
    }

    pub fn is_subset(&self, other: &SetIndicator) -> bool {
        self.marks.iter().zip(&other.marks).all(|(&a, &b)| !a || b)
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.marks[i] = value;
    }

    fn zip(&self, other: &SetIndicator, op: impl Fn(bool, bool) -> bool) -> SetIndicator {
        debug_assert_eq!(self.space_id, other.space_id);
        SetIndicator { marks: self.marks.iter().zip(&other.marks).map(|(&a, &b)| op(a, b)).collect(), space_id: self.space_id }
    }
}

impl ScalarField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `{f ≥ t}`.
    pub fn superlevel(&self, t: f64) -> SetIndicator {
        SetIndicator { marks: self.values.iter().map(|&v| v >= t).collect(), space_id: self.space_id }
    }

    /// `{f ≤ t}`.
    pub fn sublevel(&self, t: f64) -> SetIndicator {
        SetIndicator { marks: self.values.iter().map(|&v| v <= t).collect(), space_id: self.space_id }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { values: self.values.iter().map(|&v| f(v)).collect(), space_id: self.space_id }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_has_unit_mass() {
        let s = SampledSpace::grid_box(1, 101, &[(0.0, 1.0)], &Density::Unit).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
        assert!(s.is_length_space());
    }

    #[test]
    fn square_4x4_has_equal_cells() {
        let s = SampledSpace::grid_box(2, 4, &[(0.0, 1.0), (0.0, 1.0)], &Density::Unit).unwrap();
        assert_eq!(s.len(), 16);
        assert!(s.weights().iter().all(|&w| (w - 1.0 / 16.0).abs() < 1e-15));
        assert!((s.resolution_h() - 0.5 * (2.0f64).sqrt() * 0.25).abs() < 1e-15);
    }

    #[test]
    fn fat_cantor_density_total_mass() {
        let d = Density::FatCantor { target_k_mass: 0.5, depth: 6, gap_weight: 0.5 };
        let s = SampledSpace::grid_box(1, 2001, &[(0.0, 1.0)], &d).unwrap();
        let removed: f64 = (1..=6).map(|k| 2f64.powi(k - 1) / 4f64.powi(k)).sum();
        let oracle = (1.0 - removed) + 0.5 * removed;
        assert!((s.total_mass() - oracle).abs() < 1e-12);
    }

    #[test]
    fn grid_errors() {
        assert_eq!(
            SampledSpace::grid_box(4, 3, &[(0.0, 1.0); 4], &Density::Unit).unwrap_err(),
            GeoError::UnsupportedDimension(4)
        );
        assert!(matches!(
            SampledSpace::grid_box(1, 10, &[(0.0, 1.0)], &Density::Constant(-1.0)),
            Err(GeoError::NonPositiveDensity(_))
        ));
        assert!(SampledSpace::grid_box(1, 1, &[(0.0, 1.0)], &Density::Unit).is_err());
        assert!(SampledSpace::grid_box(1, 10, &[(1.0, 1.0)], &Density::Unit).is_err());
    }

    #[test]
    fn fat_cantor_depth_one_and_six() {
        let s = SampledSpace::fat_cantor_interval(4001, 1, 0.5).unwrap();
        let fc = s.fat_cantor().unwrap();
        assert_eq!(fc.gaps.len(), 1);
        let first_gap = fc.gaps[0].1 - fc.gaps[0].0;
        assert!((first_gap - 0.25).abs() < 1e-15);
        assert!((FatCantor::analytic_k_mass(0.5, 1) - (1.0 - first_gap)).abs() < 1e-15);

        let s = SampledSpace::fat_cantor_interval(4001, 6, 0.5).unwrap();
        let fc = s.fat_cantor().unwrap();
        let dx = 1.0 / 4001.0;
        let sampled = fc.k_marks.iter().filter(|&&k| k).count() as f64 * dx;
        let analytic = FatCantor::analytic_k_mass(0.5, 6);
        assert!((analytic - (1.0 - 0.5 * (1.0 - 0.5f64.powi(6)))).abs() < 1e-15);
        assert!((sampled - analytic).abs() < 1e-3, "sampled {sampled} vs {analytic}");
    }

    #[test]
    fn fat_cantor_too_coarse() {
        assert!(matches!(SampledSpace::fat_cantor_interval(41, 6, 0.5), Err(GeoError::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn circle_distances() {
        let s = SampledSpace::circle(1000, std::f64::consts::TAU).unwrap();
        assert!((s.total_mass() - std::f64::consts::TAU).abs() < 1e-9);
        assert!((s.dist(0, 500) - std::f64::consts::PI).abs() < 1e-12);
        let t = SampledSpace::circle(3, 3.0).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((t.dist(i, j) - 1.0).abs() < 1e-15);
        }
        assert!(SampledSpace::circle(2, 1.0).is_err());
    }

    #[test]
    fn explicit_validation() {
        let pts = [0.0f64, 2.0, 3.0];
        let m: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| (a - b).abs()).collect()).collect();
        let s = SampledSpace::explicit(&m, vec![1.0; 3]).unwrap();
        assert_eq!(s.resolution_h(), 1.0);
        assert!(!s.is_length_space());

        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert_eq!(SampledSpace::explicit(&bad, vec![1.0; 3]).unwrap_err(), GeoError::TriangleViolation { a: 0, b: 1, c: 2 });
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert_eq!(SampledSpace::explicit(&asym, vec![1.0; 2]).unwrap_err(), GeoError::Asymmetric(0, 1));
    }

    #[test]
    fn graph_metric_is_path_length() {
        let s = SampledSpace::graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 5.0)], vec![1.0; 4]).unwrap();
        assert_eq!(s.dist(0, 3), 3.0);
        s.validate_exhaustive().unwrap();
        assert!(SampledSpace::graph(3, &[(0, 1, 1.0)], vec![1.0; 3]).is_err());
    }

    #[test]
    fn measure_basics() {
        let s = SampledSpace::grid_box(1, 1001, &[(0.0, 1.0)], &Density::Unit).unwrap();
        assert!((s.measure(&s.full_set()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.measure(&s.empty_set()).unwrap(), 0.0);
        let a = s.indicator_where(|c| (0.4..=0.6).contains(&c[0]));
        assert!((s.measure(&a).unwrap() - 0.2).abs() <= s.resolution_h() * 2.0);
        let other = SampledSpace::grid_box(1, 1000, &[(0.0, 1.0)], &Density::Unit).unwrap();
        assert_eq!(other.measure(&a).unwrap_err(), GeoError::BindingMismatch);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = SampledSpace::grid_box(2, 33, &[(0.0, 1.0), (-1.0, 2.0)], &Density::Unit).unwrap();
        let b = SampledSpace::grid_box(2, 33, &[(0.0, 1.0), (-1.0, 2.0)], &Density::Unit).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn triangle_audit_passes_on_generated_spaces() {
        let spaces = [
            SampledSpace::grid_box(2, 40, &[(0.0, 1.0), (0.0, 1.0)], &Density::Unit).unwrap(),
            SampledSpace::circle(500, 3.0).unwrap(),
            SampledSpace::fat_cantor_interval(4001, 6, 0.5).unwrap(),
        ];
        for s in &spaces {
            let audit = s.audit_triangle(10_000, 7);
            assert_eq!(audit.violations, 0);
        }
    }
}
