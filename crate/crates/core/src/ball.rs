//! Ball queries: all neighbors of a point within a radius.
//!
//! Grid and circle spaces use a precomputed offset stencil; other spaces fall back
//! to a full scan of the distance oracle.

use crate::space::{Metric, SampledSpace};

#[derive(Debug, Clone)]
enum Stencil {
    Grid(Vec<([isize; 3], f64)>),
    Circle(Vec<(usize, f64)>),
    Scan,
}

/// Neighbors within `radius` of each point, excluding the point itself.
///
/// `closed` selects `d ≤ r` (closed ball) versus `d < r` (open ball).
#[derive(Debug, Clone)]
pub struct BallQuery<'a> {
    space: &'a SampledSpace,
    radius: f64,
    closed: bool,
    stencil: Stencil,
}

impl<'a> BallQuery<'a> {
    pub fn new(space: &'a SampledSpace, radius: f64, closed: bool) -> Self {
        let inside = |d: f64| d > 0.0 && if closed { d <= radius } else { d < radius };
        let stencil = match space.metric() {
            Metric::Grid(g) => {
                let mut reach = [0isize; 3];
                for axis in 0..g.dims {
                    let r = (radius / g.spacing[axis]).floor() as isize + 1;
                    reach[axis] = r.min(g.shape[axis] as isize - 1).max(0);
                }
                let mut offsets = Vec::new();
                for k0 in -reach[0]..=reach[0] {
                    for k1 in -reach[1]..=reach[1] {
                        for k2 in -reach[2]..=reach[2] {
                            let k = [k0, k1, k2];
                            let mut s = 0.0;
                            for axis in 0..g.dims {
                                let t = k[axis] as f64 * g.spacing[axis];
                                s += t * t;
                            }
                            let d = s.sqrt();
                            if inside(d) {
                                offsets.push((k, d));
                            }
                        }
                    }
                }
                offsets.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                Stencil::Grid(offsets)
            }
            Metric::Circle { n, circumference } => {
                let step = circumference / *n as f64;
                let offsets = (1..=n / 2).map(|k| (k, k as f64 * step)).filter(|&(_, d)| inside(d)).collect();
                Stencil::Circle(offsets)
            }
            _ => Stencil::Scan,
        };
        BallQuery { space, radius, closed, stencil }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Calls `f(j, d(i, j))` for every neighbor `j ≠ i` of `i`.
    pub fn for_each<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        match (&self.stencil, self.space.metric()) {
            (Stencil::Grid(offsets), Metric::Grid(g)) => {
                let idx = g.multi_index(i);
                'offsets: for (k, d) in offsets {
                    let mut target = [0usize; 3];
                    for axis in 0..g.dims {
                        let t = idx[axis] as isize + k[axis];
                        if t < 0 || t >= g.shape[axis] as isize {
                            continue 'offsets;
                        }
                        target[axis] = t as usize;
                    }
                    f(g.flat_index(target), *d);
                }
            }
            (Stencil::Circle(offsets), Metric::Circle { n, .. }) => {
                for &(k, d) in offsets {
                    let fwd = (i + k) % n;
                    let back = (i + n - k) % n;
                    f(fwd, d);
                    if back != fwd {
                        f(back, d);
                    }
                }
            }
            _ => {
                for j in 0..self.space.len() {
                    if j == i {
                        continue;
                    }
                    let d = self.space.dist(i, j);
                    let hit = d > 0.0 && if self.closed { d <= self.radius } else { d < self.radius };
                    if hit {
                        f(j, d);
                    }
                }
            }
        }
    }

    /// Neighbor list of `i` as `(index, distance)` pairs.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each(i, |j, d| out.push((j, d)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Density;

    fn brute(space: &SampledSpace, i: usize, r: f64, closed: bool) -> Vec<usize> {
        let mut v: Vec<usize> = (0..space.len())
            .filter(|&j| {
                let d = space.dist(i, j);
                j != i && if closed { d <= r } else { d < r }
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn stencil_matches_scan() {
        let spaces = [
            SampledSpace::grid_box(2, 17, &[(0.0, 1.0), (0.0, 2.0)], &Density::Unit).unwrap(),
            SampledSpace::grid_box(3, 7, &[(0.0, 1.0); 3], &Density::Unit).unwrap(),
            SampledSpace::circle(12, 12.0).unwrap(),
            SampledSpace::circle(13, 1.0).unwrap(),
        ];
        for s in &spaces {
            for &closed in &[true, false] {
                for &r in &[0.1, 0.25, 0.5, 3.0, 6.0] {
                    let q = BallQuery::new(s, r, closed);
                    for i in [0, s.len() / 2, s.len() - 1] {
                        let mut got: Vec<usize> = q.neighbors(i).into_iter().map(|x| x.0).collect();
                        got.sort();
                        assert_eq!(got, brute(s, i, r, closed));
                        for (j, d) in q.neighbors(i) {
                            assert_eq!(d.to_bits(), s.dist(i, j).to_bits());
                        }
                    }
                }
            }
        }
    }
}
