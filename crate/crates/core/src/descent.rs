//! Minimizing sequences for the relaxed perimeter beyond the recovery family.
//!
//! `J(f) = Σ_x w_x sl(f, x, 3h) + λ Σ_x w_x |f(x) - χ_A(x)|` is convex in `f`, since
//! `sl(f, x, δ) = max_y |f(y) - f(x)|/d(x,y)` is a maximum of linear forms. It is
//! minimized over `[0,1]`-valued fields with the diagonally preconditioned
//! primal-dual method of Chambolle and Pock: the dual of the per-point maximum is an
//! `ℓ¹` ball of radius `w_x`, the data term has a shrinkage prox.

use serde::Serialize;

use crate::ball::BallQuery;
use crate::distance::distance_to_marks;
use crate::error::{GeoError, Result};
use crate::minkowski::{enlarged_marks, recovery_values};
use crate::par;
use crate::perimeter::{l1_to_indicator, level_set_select, perimeter, LevelSelection, PerimeterParams};
use crate::slope::{slope_values, SLOPE_SCALE_MULT};
use crate::space::{SampledSpace, ScalarField, SetIndicator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentParams {
    pub lambda: f64,
    pub iterations: usize,
    /// Threshold margin for the final level-set selection; `None` skips it.
    pub select_eps: Option<f64>,
    /// Abort when an iterate's objective exceeds this multiple of the initial one.
    pub divergence_factor: f64,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams { lambda: 10.0, iterations: 2000, select_eps: Some(0.1), divergence_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentResult {
    #[serde(skip)]
    pub field: ScalarField,
    /// Objective of the retained field after each iteration, starting with the initial one.
    pub trace: Vec<f64>,
    pub slope_part: f64,
    pub l1_part: f64,
    pub initial_params: (f64, f64),
    pub selection: Option<LevelSelection>,
}

/// Objective `(∫ sl dm, ∫ |f - χ_A| dm)`.
pub fn objective_parts(space: &SampledSpace, f: &[f64], marks: &[bool]) -> (f64, f64) {
    let sl = slope_values(space, f, SLOPE_SCALE_MULT * space.resolution_h());
    (space.integrate(&sl), l1_to_indicator(space, f, marks))
}

/// Projection of `v` onto `{Σ|p| ≤ radius}`.
fn project_l1(v: &mut [f64], radius: f64) {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return;
    }
    if radius <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        acc += x;
        let t = (acc - radius) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

/// Descends from the best recovery function of `A`.
pub fn variational_descent(space: &SampledSpace, a: &SetIndicator, params: &DescentParams) -> Result<DescentResult> {
    space.check(a)?;
    if !(params.lambda >= 0.0) {
        return Err(GeoError::param("lambda", "must be nonnegative"));
    }
    let est = perimeter(space, a, &PerimeterParams { cross_check: false, ..Default::default() })?;
    let (s, rp) = est.witness_params;
    let dist_a = distance_to_marks(space, a.marks());
    let init = recovery_values(&distance_to_marks(space, &enlarged_marks(&dist_a, s)), rp);
    let chi: Vec<f64> = a.marks().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let marks = a.marks();
    let lambda = params.lambda;
    let eval = |f: &[f64]| {
        let (sl, l1) = objective_parts(space, f, marks);
        let l1_term = if l1 == 0.0 { 0.0 } else { lambda * l1 };
        (sl + l1_term, sl, l1)
    };

    let n = space.len();
    let ball = BallQuery::new(space, SLOPE_SCALE_MULT * space.resolution_h(), true);
    let nbrs: Vec<Vec<(usize, f64)>> = par::map_range(n, |i| ball.neighbors(i));
    let mean_w = space.total_mass() / n as f64;
    let w: Vec<f64> = space.weights().iter().map(|x| x / mean_w).collect();
    // preconditioners: σ per dual entry (x, y) is d/2, τ_x is 1 / column sum of |K|
    let mut col = vec![0.0; n];
    for (x, list) in nbrs.iter().enumerate() {
        for &(y, d) in list {
            col[x] += 1.0 / d;
            col[y] += 1.0 / d;
        }
    }
    let tau: Vec<f64> = col.iter().map(|&c| if c > 0.0 { 1.0 / c } else { 1.0 }).collect();

    let mut f = init.clone();
    let mut f_bar = f.clone();
    let mut p: Vec<Vec<f64>> = nbrs.iter().map(|l| vec![0.0; l.len()]).collect();
    let (j0, sl0, l10) = eval(&f);
    let mut best = (j0, sl0, l10);
    let mut best_f = f.clone();
    let mut trace = vec![j0];
    for iteration in 1..=params.iterations {
        p = par::map_range(n, |x| {
            let mut q = p[x].clone();
            for (k, &(y, d)) in nbrs[x].iter().enumerate() {
                q[k] += 0.5 * d * (f_bar[y] - f_bar[x]) / d;
            }
            project_l1(&mut q, w[x]);
            q
        });
        // K^T p, accumulated per point in index order
        let mut kt = vec![0.0; n];
        for (x, list) in nbrs.iter().enumerate() {
            for (k, &(y, d)) in list.iter().enumerate() {
                let v = p[x][k] / d;
                kt[y] += v;
                kt[x] -= v;
            }
        }
        let next: Vec<f64> = (0..n)
            .map(|x| {
                let v = f[x] - tau[x] * kt[x];
                let thr = tau[x] * lambda * w[x];
                let c = chi[x];
                let u = if v > c + thr {
                    v - thr
                } else if v < c - thr {
                    v + thr
                } else {
                    c
                };
                u.clamp(0.0, 1.0)
            })
            .collect();
        f_bar = next.iter().zip(&f).map(|(a, b)| 2.0 * a - b).collect();
        f = next;
        let (j, sl, l1) = eval(&f);
        if !j.is_finite() || j > params.divergence_factor * j0.max(f64::MIN_POSITIVE) {
            return Err(GeoError::Divergence { iteration, before: best.0, after: j });
        }
        if j <= best.0 {
            best = (j, sl, l1);
            best_f = f.clone();
        }
        trace.push(best.0);
    }
    let field = space.bind_field(best_f);
    let selection = match params.select_eps {
        Some(eps) => Some(level_set_select(space, &field, eps)?),
        None => None,
    };
    Ok(DescentResult { field, trace, slope_part: best.1, l1_part: best.2, initial_params: (s, rp), selection })
}
