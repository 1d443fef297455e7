//! Sup-semigroup, slopes at a scale and asymptotic Lipschitz constants.

use serde::Serialize;

use crate::ball::BallQuery;
use crate::error::{GeoError, Result};
use crate::par;
use crate::report::{Report, Table, Verdict};
use crate::space::{SampledSpace, ScalarField};

/// Default slope scale in units of `h`.
pub const SLOPE_SCALE_MULT: f64 = 3.0;
/// Scale, in units of `h`, at which unit-slope hypotheses are checked: lattice
/// stencils at `3h` resolve directions only to within 22.5°.
pub const HYPOTHESIS_SCALE_MULT: f64 = 8.0;
/// Allowed defect of `T_s T_t = T_{s+t}` on length spaces, in units of `Lip·h`.
pub const LENGTH_DEFECT_MULT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeVariant {
    LocalSlope,
    AsymptoticLip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeField {
    pub values: Vec<f64>,
    pub scale_delta: f64,
    pub variant: SlopeVariant,
}

impl SlopeField {
    /// `∫ slope dm`.
    pub fn integral(&self, space: &SampledSpace) -> f64 {
        space.integrate(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_table(&self, space: &SampledSpace, name: &str) -> Table {
        let mut t = Table::new(name, &["index", "x", "y", "z", "slope"]);
        for (i, v) in self.values.iter().enumerate() {
            let c = space.coords(i).unwrap_or([f64::NAN; 3]);
            t.push(vec![i.into(), c[0].into(), c[1].into(), c[2].into(), (*v).into()]);
        }
        t
    }
}

/// `T_t f(x) = sup_{d(x,y) < t} f(y)`, with `T_0 f = f`.
pub fn sup_semigroup(space: &SampledSpace, f: &ScalarField, t: f64) -> Result<ScalarField> {
    space.check_field(f)?;
    if !(t >= 0.0) {
        return Err(GeoError::param("t", "must be nonnegative"));
    }
    Ok(space.bind_field(sup_values(space, f.values(), t)))
}

pub(crate) fn sup_values(space: &SampledSpace, f: &[f64], t: f64) -> Vec<f64> {
    if t == 0.0 {
        return f.to_vec();
    }
    let ball = BallQuery::new(space, t, false);
    par::map_range(space.len(), |i| {
        let mut best = f[i];
        ball.for_each(i, |j, _| best = best.max(f[j]));
        best
    })
}

fn check_scale(space: &SampledSpace, delta: f64, mult: f64) -> Result<()> {
    let floor = mult * space.resolution_h();
    if !(delta >= floor * (1.0 - 1e-9)) {
        return Err(GeoError::BelowResolution { scale: delta, floor });
    }
    Ok(())
}

/// `sl(x, δ) = sup_{0 < d(x,y) ≤ δ} |f(y) - f(x)| / d(x,y)`.
pub fn slope_at_scale(space: &SampledSpace, f: &ScalarField, delta: f64) -> Result<SlopeField> {
    space.check_field(f)?;
    check_scale(space, delta, 1.0)?;
    Ok(SlopeField { values: slope_values(space, f.values(), delta), scale_delta: delta, variant: SlopeVariant::LocalSlope })
}

pub(crate) fn slope_values(space: &SampledSpace, f: &[f64], delta: f64) -> Vec<f64> {
    slope_values_where(space, f, delta, |_| true)
}

/// Slopes at the points selected by `active`; the others are known to be 0.
pub(crate) fn slope_values_where<P: Fn(usize) -> bool + Sync>(
    space: &SampledSpace,
    f: &[f64],
    delta: f64,
    active: P,
) -> Vec<f64> {
    let ball = BallQuery::new(space, delta, true);
    par::map_range(space.len(), |i| {
        let mut best = 0.0f64;
        if active(i) {
            ball.for_each(i, |j, d| best = best.max((f[j] - f[i]).abs() / d));
        }
        best
    })
}

/// `∫ sl(·, 3h) dm`.
pub fn slope_integral(space: &SampledSpace, f: &[f64]) -> f64 {
    space.integrate(&slope_values(space, f, SLOPE_SCALE_MULT * space.resolution_h()))
}

/// Lipschitz constant of `f` restricted to the closed ball `B̄_δ(x)`.
pub fn asymptotic_lip(space: &SampledSpace, f: &ScalarField, delta: f64) -> Result<SlopeField> {
    space.check_field(f)?;
    check_scale(space, delta, 2.0)?;
    let ball = BallQuery::new(space, delta, true);
    let v = f.values();
    let values = par::map_range(space.len(), |i| {
        let mut members = ball.neighbors(i);
        members.push((i, 0.0));
        let mut best = 0.0f64;
        for (a, &(p, _)) in members.iter().enumerate() {
            for &(q, _) in &members[a + 1..] {
                best = best.max((v[p] - v[q]).abs() / space.dist(p, q));
            }
        }
        best
    });
    Ok(SlopeField { values, scale_delta: delta, variant: SlopeVariant::AsymptoticLip })
}

/// Checks `T_t f ≥ f`, `T_{s+t} f ≥ T_s(T_t f)`, the finite-scale slope bound
/// `(T_t f - f)/t ≤ sl(·, t + 3h)` and, on length spaces, near-equality of the semigroup.
pub fn check_semigroup_ops(space: &SampledSpace, f: &ScalarField, s: f64, t: f64) -> Result<Report> {
    space.check_field(f)?;
    if !(s > 0.0 && t > 0.0) {
        return Err(GeoError::param("s, t", "must be positive"));
    }
    let v = f.values();
    let tt = sup_values(space, v, t);
    let st = sup_values(space, &tt, s);
    let sum = sup_values(space, v, s + t);
    let h = space.resolution_h();
    let mut report = Report::new("sup-semigroup operations");

    let below = tt.iter().zip(v).filter(|(a, b)| a < b).count();
    report.verdict(Verdict::at_most("monotone_sup", "T_t f ≥ f", below as f64, 0.0));

    let composed = sum.iter().zip(&st).filter(|(a, b)| a < b).count();
    let strict = sum.iter().zip(&st).filter(|(a, b)| a > b).count();
    report.verdict(Verdict::at_most("composition_inequality", "T_{s+t} f ≥ T_s(T_t f)", composed as f64, 0.0));
    report.set("strict_points", strict);

    let sl = slope_values(space, v, t + SLOPE_SCALE_MULT * h);
    let excess = tt.iter().zip(v).zip(&sl).map(|((a, b), c)| (a - b) / t - c).fold(f64::NEG_INFINITY, f64::max);
    report.verdict(Verdict::at_most("difference_quotient_vs_slope", "(T_t f - f)/t ≤ sl(·, t + 3h)", excess, 1e-12));

    if space.is_length_space() && s >= 2.0 * h && t >= 2.0 * h {
        let lip = slope_values(space, v, SLOPE_SCALE_MULT * h).into_iter().fold(0.0, f64::max);
        let bound = lip * LENGTH_DEFECT_MULT * h;
        let gaps: Vec<f64> = sum.iter().zip(&st).map(|(a, b)| a - b).collect();
        let violations = gaps.iter().filter(|&&g| g > bound * (1.0 + 1e-9) + 1e-12).count();
        report.verdict(Verdict::at_most(
            "length_space_equality",
            "T_{s+t} = T_s T_t on length spaces, up to Lip·4h",
            violations as f64,
            0.0,
        ));
        report.set("max_gap", gaps.iter().copied().fold(0.0, f64::max)).set("gap_bound", bound);
    }
    report.set("s", s).set("t", t);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::enlarge;
    use crate::space::Density;

    fn line(n: usize) -> SampledSpace {
        SampledSpace::grid_box(1, n, &[(0.0, 1.0)], &Density::Unit).unwrap()
    }

    fn brute_sup(space: &SampledSpace, f: &[f64], t: f64) -> Vec<f64> {
        (0..space.len())
            .map(|i| (0..space.len()).filter(|&j| space.dist(i, j) < t).map(|j| f[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    #[test]
    fn sup_of_constant_and_identity() {
        let s = line(201);
        let c = s.field(vec![0.3; 201]).unwrap();
        assert_eq!(sup_semigroup(&s, &c, 0.2).unwrap().values(), c.values());
        let f = s.field_from(|x| x[0]).unwrap();
        assert_eq!(sup_semigroup(&s, &f, 0.1).unwrap().values(), brute_sup(&s, f.values(), 0.1).as_slice());
        assert_eq!(sup_semigroup(&s, &f, 0.0).unwrap().values(), f.values());
    }

    #[test]
    fn sup_of_indicator_is_enlargement() {
        let s = SampledSpace::grid_box(2, 40, &[(0.0, 1.0), (0.0, 1.0)], &Density::Unit).unwrap();
        let a = s.indicator_where(|c| (c[0] - 0.4).hypot(c[1] - 0.5) < 0.15);
        let up = sup_semigroup(&s, &s.indicator_field(&a), 0.11).unwrap();
        let enlarged = enlarge(&s, &a, 0.11).unwrap();
        for (v, m) in up.values().iter().zip(enlarged.marks()) {
            assert_eq!(*v == 1.0, *m);
        }
    }

    #[test]
    fn slope_examples() {
        let s = line(1001);
        let h = s.resolution_h();
        let f = s.field_from(|x| x[0]).unwrap();
        let sl = slope_at_scale(&s, &f, 3.0 * h).unwrap();
        assert!(sl.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let c = s.field(vec![2.0; 1001]).unwrap();
        assert_eq!(slope_at_scale(&s, &c, 3.0 * h).unwrap().max(), 0.0);
        assert!(matches!(slope_at_scale(&s, &f, 0.5 * h), Err(GeoError::BelowResolution { .. })));
    }

    #[test]
    fn isolated_points_have_zero_slope() {
        let s = SampledSpace::points(1, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], vec![1.0, 1.0], 0.1, false).unwrap();
        let f = s.field(vec![0.0, 5.0]).unwrap();
        assert_eq!(slope_at_scale(&s, &f, 0.3).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn fat_cantor_identity_slope_integral() {
        let s = SampledSpace::fat_cantor_interval(4001, 4, 0.5).unwrap();
        let f = s.field_from(|x| x[0]).unwrap();
        let sl = slope_at_scale(&s, &f, 3.0 * s.resolution_h()).unwrap();
        let oracle: f64 = s.weights().iter().sum();
        assert!((sl.integral(&s) - oracle).abs() < 1e-9);
        let k = s.fat_cantor().unwrap();
        let expected = (1.0 + crate::space::FatCantor::analytic_k_mass(k.target_k_mass, k.depth)) / 2.0;
        assert!((sl.integral(&s) - expected).abs() < 2e-3);
    }

    #[test]
    fn asymptotic_lip_examples() {
        let s = line(1001);
        let h = s.resolution_h();
        let f = s.field_from(|x| x[0]).unwrap();
        let lip = asymptotic_lip(&s, &f, 4.0 * h).unwrap();
        assert!(lip.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let kink = s.field_from(|x| (x[0] - 0.5).abs()).unwrap();
        let lip = asymptotic_lip(&s, &kink, 4.0 * h).unwrap();
        let sl = slope_at_scale(&s, &kink, 4.0 * h).unwrap();
        assert!((lip.values[500] - 1.0).abs() < 1e-9);
        for (a, b) in lip.values.iter().zip(&sl.values) {
            assert!(a + 1e-12 >= *b);
        }
        let c = s.field(vec![1.0; 1001]).unwrap();
        assert_eq!(asymptotic_lip(&s, &c, 4.0 * h).unwrap().max(), 0.0);
        assert!(asymptotic_lip(&s, &f, 1.5 * h).is_err());
    }

    #[test]
    fn slope_shrinks_with_scale() {
        let s = SampledSpace::grid_box(2, 48, &[(-1.0, 1.0), (-1.0, 1.0)], &Density::Unit).unwrap();
        let f = s.field_from(|c| (c[0] * 3.0).sin() * c[1] + c[0].abs()).unwrap();
        let h = s.resolution_h();
        let mut prev: Option<Vec<f64>> = None;
        for m in [8.0, 6.0, 4.0, 3.0, 2.0, 1.0] {
            let cur = slope_at_scale(&s, &f, m * h).unwrap().values;
            if let Some(p) = &prev {
                assert!(cur.iter().zip(p).all(|(c, p)| c <= p));
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn three_point_strict_composition() {
        let pts = [0.0f64, 2.0, 3.0];
        let m: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| (a - b).abs()).collect()).collect();
        let s = SampledSpace::explicit(&m, vec![1.0; 3]).unwrap();
        let f = s.indicator_field(&s.singleton(0));
        let t4 = sup_semigroup(&s, &f, 4.0).unwrap();
        let t2 = sup_semigroup(&s, &f, 2.0).unwrap();
        let t22 = sup_semigroup(&s, &t2, 2.0).unwrap();
        assert_eq!(t4.values()[2], 1.0);
        assert_eq!(t22.values()[2], 0.0);
        let r = check_semigroup_ops(&s, &f, 2.0, 2.0).unwrap();
        assert!(r.passed());
        assert!(r.summary["strict_points"].as_u64().unwrap() >= 1);
    }

    #[test]
    fn circle_semigroup_is_nearly_exact() {
        let s = SampledSpace::circle(2000, std::f64::consts::TAU).unwrap();
        let f = s.field_from(|c| c[0] * 0.7 + (3.0 * c[1]).sin() * 0.2).unwrap();
        let r = check_semigroup_ops(&s, &f, 0.1, 0.1).unwrap();
        assert!(r.passed(), "{r:?}");
        let brute = brute_sup(&s, f.values(), 0.2);
        assert_eq!(sup_values(&s, f.values(), 0.2), brute);
    }

    #[test]
    fn monotone_in_the_field() {
        let s = line(301);
        let f = s.field_from(|x| (7.0 * x[0]).sin()).unwrap();
        let g = f.map(|v| v + 0.1 * v.abs());
        let (tf, tg) = (sup_semigroup(&s, &f, 0.05).unwrap(), sup_semigroup(&s, &g, 0.05).unwrap());
        assert!(tf.values().iter().zip(tg.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn constant_field_is_tight() {
        let s = line(101);
        let c = s.field(vec![1.0; 101]).unwrap();
        let r = check_semigroup_ops(&s, &c, 0.05, 0.05).unwrap();
        assert!(r.passed());
        assert_eq!(r.summary["strict_points"], 0);
    }
}
