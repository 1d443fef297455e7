//! Distance-to-set fields.
//!
//! Grids use the separable lower-envelope transform of Felzenszwalb and
//! Huttenlocher, which yields the exact Euclidean distance to the nearest marked
//! cell center. Circles use a cyclic two-pass sweep, graphs multi-source Dijkstra
//! and every other space a direct minimum over the marked points.

use crate::par;
use crate::space::{dijkstra, GridGeometry, Metric, SampledSpace};

/// `d_A(x) = min_{y ∈ A} d(x, y)`; `+∞` everywhere when no point is marked.
pub fn distance_to_marks(space: &SampledSpace, marks: &[bool]) -> Vec<f64> {
    let n = space.len();
    if !marks.iter().any(|&m| m) {
        return vec![f64::INFINITY; n];
    }
    match space.metric() {
        Metric::Grid(g) => grid_edt(g, marks),
        Metric::Circle { n, circumference } => circle_distance(*n, *circumference, marks),
        Metric::Graph { adjacency, .. } => {
            let sources: Vec<usize> = (0..n).filter(|&i| marks[i]).collect();
            dijkstra(adjacency, &sources)
        }
        _ => {
            let sources: Vec<usize> = (0..n).filter(|&i| marks[i]).collect();
            par::map_range(n, |i| {
                if marks[i] {
                    0.0
                } else {
                    sources.iter().map(|&j| space.dist(i, j)).fold(f64::INFINITY, f64::min)
                }
            })
        }
    }
}

fn circle_distance(n: usize, circumference: f64, marks: &[bool]) -> Vec<f64> {
    // cyclic index distance to the nearest mark, two sweeps around the ring twice
    let mut steps = vec![usize::MAX; n];
    let mut last: Option<usize> = None;
    for pass in 0..2 {
        for i in 0..n {
            if marks[i] {
                last = Some(pass * n + i);
            }
            if let Some(l) = last {
                steps[i] = steps[i].min(pass * n + i - l);
            }
        }
    }
    last = None;
    for pass in 0..2 {
        for i in (0..n).rev() {
            let pos = (1 - pass) * n + i;
            if marks[i] {
                last = Some(pos);
            }
            if let Some(l) = last {
                steps[i] = steps[i].min(l - pos);
            }
        }
    }
    steps.into_iter().map(|k| k.min(n - k) as f64 * circumference / n as f64).collect()
}

fn grid_edt(g: &GridGeometry, marks: &[bool]) -> Vec<f64> {
    let mut sq: Vec<f64> = marks.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    for axis in 0..g.dims {
        let len = g.shape[axis];
        let stride: usize = g.shape[axis + 1..g.dims].iter().product();
        let lines = sq.len() / len;
        // line l: outer index (before axis) and inner index (after axis)
        let starts: Vec<usize> = (0..lines).map(|l| (l / stride) * stride * len + l % stride).collect();
        let spacing = g.spacing[axis];
        let transformed = par::map_slice(&starts, |&start| {
            let line: Vec<f64> = (0..len).map(|k| sq[start + k * stride]).collect();
            lower_envelope(&line, spacing)
        });
        for (start, line) in starts.iter().zip(transformed) {
            for (k, v) in line.into_iter().enumerate() {
                sq[start + k * stride] = v;
            }
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// `out[q] = min_p ((q - p)·s)² + f[p]` over the finite entries of `f`.
fn lower_envelope(f: &[f64], s: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![f64::INFINITY; n];
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    let pos = |p: usize| p as f64 * s;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let x = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
                    if x <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(x);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        return out;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let xq = pos(q);
        while k + 1 < v.len() && z[k + 1] < xq {
            k += 1;
        }
        // evaluate neighbors of the envelope piece too so ties resolve to the exact minimum
        let mut best = f64::INFINITY;
        for &p in &v[k.saturating_sub(1)..(k + 2).min(v.len())] {
            let t = (q as f64 - p as f64) * s;
            best = best.min(t * t + f[p]);
        }
        *slot = best;
    }
    out
}
