//! Coarea formulas: the variation of a field against the integrated perimeters and
//! lower Minkowski contents of its superlevel sets.

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::fit;
use crate::minkowski::{content_pair, Window};
use crate::par;
use crate::perimeter::{midpoint_grid, perimeter, PerimeterParams};
use crate::report::{Report, Table, Verdict};
use crate::slope::{slope_values, HYPOTHESIS_SCALE_MULT, SLOPE_SCALE_MULT};
use crate::space::{SampledSpace, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoareaParams {
    pub t_points: usize,
    /// Relative tolerance of the coarea identities.
    pub tolerance: f64,
    /// A value class `{f = v}` heavier than this fraction of `m(X)` is an atom.
    pub atom_threshold: f64,
    /// Slopes within this distance of 1 count as unit.
    pub unit_slope_tol: f64,
    /// Fraction of `{0 < f < max}` that must have unit slope, and of levels whose
    /// lower and upper contents must agree.
    pub majority: f64,
    pub window: Option<Window>,
    pub perimeter: PerimeterParams,
}

impl Default for CoareaParams {
    fn default() -> Self {
        CoareaParams {
            t_points: 64,
            tolerance: 0.03,
            atom_threshold: 0.02,
            unit_slope_tol: 0.05,
            majority: 0.9,
            window: None,
            perimeter: PerimeterParams { cross_check: false, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub t: f64,
    pub mass: f64,
    pub lower: f64,
    pub upper: f64,
    pub band: f64,
    pub perimeter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoareaReport {
    pub t_grid: Vec<f64>,
    pub per_level: Vec<LevelRecord>,
    /// `∫ sl(·, 3h) dm`.
    pub lhs: f64,
    pub rhs_per: f64,
    pub rhs_mink: f64,
    pub slack_per: f64,
    pub slack_mink: f64,
    pub unit_slope_fraction: f64,
    pub unit_slope: bool,
    /// Fraction of levels with lower and upper content within tolerance.
    pub agreeing_levels: f64,
    pub median_content_gap: f64,
    /// `(v, m({f = v}))` for heavy value classes in `(0, max f]`.
    pub atoms: Vec<(f64, f64)>,
    pub tolerance: f64,
    pub majority: f64,
}

/// Per-level contents and perimeters of `{f ≥ t}` integrated over `t`.
pub fn coarea_check(
    space: &SampledSpace,
    f: &ScalarField,
    t_grid: Option<Vec<f64>>,
    params: &CoareaParams,
) -> Result<CoareaReport> {
    space.check_field(f)?;
    let v = f.values();
    if v.iter().any(|&x| x < 0.0) {
        return Err(GeoError::param("f", "must be nonnegative"));
    }
    let top = f.max();
    let t_grid = match t_grid {
        Some(t) => {
            if t.iter().any(|&x| !(x > 0.0 && x < top)) {
                return Err(GeoError::param("t_grid", "thresholds must lie in (0, max f)"));
            }
            t
        }
        None if top > 0.0 => midpoint_grid(0.0, top, params.t_points),
        None => vec![],
    };
    let window = params.window.unwrap_or_else(|| Window::default_for(space));
    let total = space.total_mass();
    let per_level = par::map_slice(&t_grid, |&t| -> Result<LevelRecord> {
        let marks: Vec<bool> = v.iter().map(|&x| x >= t).collect();
        let mass = space.measure_marks(&marks);
        let (lo, up) = content_pair(space, &marks, &window)?;
        let set = space.bind_set(marks);
        let per = if !set.has_points() || mass >= total { 0.0 } else { perimeter(space, &set, &params.perimeter)?.upper };
        Ok(LevelRecord { t, mass, lower: lo.value(), upper: up.value(), band: lo.band, perimeter: per })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let sl = slope_values(space, v, SLOPE_SCALE_MULT * space.resolution_h());
    let lhs = space.integrate(&sl);
    let pick = |g: fn(&LevelRecord) -> f64| -> Vec<f64> { per_level.iter().map(g).collect() };
    let (rhs_per, rhs_mink) = if t_grid.is_empty() {
        (0.0, 0.0)
    } else {
        (fit::trapezoid(&t_grid, &pick(|r| r.perimeter), 0.0, top), fit::trapezoid(&t_grid, &pick(|r| r.lower), 0.0, top))
    };

    let wide = slope_values(space, v, HYPOTHESIS_SCALE_MULT * space.resolution_h());
    let inside: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 0.0 && v[i] < top).collect();
    let unit = inside.iter().filter(|&&i| (wide[i] - 1.0).abs() <= params.unit_slope_tol).count();
    let unit_slope_fraction = if inside.is_empty() { 0.0 } else { unit as f64 / inside.len() as f64 };
    let mut gaps: Vec<f64> = per_level
        .iter()
        .map(|r| {
            let scale = r.upper.max(r.lower);
            if scale > 0.0 {
                (r.upper - r.lower) / scale
            } else {
                0.0
            }
        })
        .collect();
    let agreeing = gaps.iter().filter(|&&g| g <= params.tolerance).count();
    let agreeing_levels = if gaps.is_empty() { 1.0 } else { agreeing as f64 / gaps.len() as f64 };
    gaps.sort_by(f64::total_cmp);
    let median_content_gap = if gaps.is_empty() { 0.0 } else { gaps[gaps.len() / 2] };

    Ok(CoareaReport {
        t_grid,
        per_level,
        lhs,
        rhs_per,
        rhs_mink,
        slack_per: (rhs_per - lhs).abs(),
        slack_mink: (rhs_mink - lhs).abs(),
        unit_slope_fraction,
        unit_slope: unit_slope_fraction >= params.majority,
        agreeing_levels,
        median_content_gap,
        atoms: atoms(space, v, top, params.atom_threshold * total),
        tolerance: params.tolerance,
        majority: params.majority,
    })
}

fn atoms(space: &SampledSpace, v: &[f64], top: f64, threshold: f64) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let w = space.weights();
    let mut out = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let value = v[order[k]];
        let mut mass = 0.0;
        while k < order.len() && v[order[k]] == value {
            mass += w[order[k]];
            k += 1;
        }
        if value > 0.0 && value <= top && mass > threshold {
            out.push((value, mass));
        }
    }
    out
}

impl CoareaReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new("coarea_levels", &["t", "mass", "lower", "upper", "band", "perimeter"]);
        for r in &self.per_level {
            t.push(vec![r.t.into(), r.mass.into(), r.lower.into(), r.upper.into(), r.band.into(), r.perimeter.into()]);
        }
        t
    }

    pub fn to_report(&self) -> Report {
        let mut report = Report::new("coarea formulas");
        let scale = self.lhs.abs().max(1e-12);
        report.verdict(Verdict::at_most("coarea_perimeter", "Var(f) = ∫ Per{f ≥ t} dt", self.slack_per / scale, self.tolerance));
        report.verdict(Verdict::at_most("coarea_minkowski", "Var(f) = ∫ M_-{f ≥ t} dt", self.slack_mink / scale, self.tolerance));
        let hyp = Verdict::at_least("unit_slope", "|∇f| = 1 on {0 < f < max}", self.unit_slope_fraction, self.majority);
        report.verdict(hyp.informational());
        if self.unit_slope {
            report.verdict(Verdict::at_least(
                "upper_equals_lower_levels",
                "M_-{f ≥ t} = M_+{f ≥ t} for a.e. t under unit slope",
                self.agreeing_levels,
                self.majority,
            ));
            report.verdict(Verdict::at_most(
                "median_content_gap",
                "M_-{f ≥ t} = M_+{f ≥ t} for a.e. t under unit slope",
                self.median_content_gap,
                self.tolerance,
            ));
        }
        report.verdict(
            Verdict::at_most("atoms", "level sets of positive measure are at most countable", self.atoms.len() as f64, 0.0)
                .informational(),
        );
        report.set("lhs", self.lhs).set("rhs_per", self.rhs_per).set("rhs_mink", self.rhs_mink).set("atoms", &self.atoms);
        report.table(self.to_table());
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Density;

    #[test]
    fn coordinate_on_square() {
        let s = SampledSpace::grid_box(2, 128, &[(0.0, 1.0), (0.0, 1.0)], &Density::Unit).unwrap();
        let f = s.field_from(|c| c[0]).unwrap();
        let params = CoareaParams { t_points: 16, ..Default::default() };
        let c = coarea_check(&s, &f, None, &params).unwrap();
        for v in [c.lhs, c.rhs_per, c.rhs_mink] {
            assert!((v - 1.0).abs() < 0.02 + 0.01, "{c:?}");
        }
        assert!(c.unit_slope);
        assert!(c.atoms.is_empty());
    }

    #[test]
    fn plateau_is_flagged_and_harmless() {
        let s = SampledSpace::grid_box(1, 2001, &[(0.0, 1.0)], &Density::Unit).unwrap();
        let f = s
            .field_from(|c| {
                if c[0] < 0.4 {
                    c[0]
                } else if c[0] <= 0.6 {
                    0.4
                } else {
                    c[0] - 0.2
                }
            })
            .unwrap();
        let c = coarea_check(&s, &f, None, &CoareaParams { t_points: 32, ..Default::default() }).unwrap();
        assert_eq!(c.atoms.len(), 1);
        assert!((c.atoms[0].0 - 0.4).abs() < 1e-12);
        assert!((c.atoms[0].1 - 0.2).abs() < 2e-3);
        assert!((c.lhs - 0.8).abs() < 0.01, "{}", c.lhs);
        assert!((c.rhs_mink - 0.8).abs() < 0.03, "{}", c.rhs_mink);
        assert!((c.rhs_per - 0.8).abs() < 0.03, "{}", c.rhs_per);
    }

    #[test]
    fn rejects_bad_grid() {
        let s = SampledSpace::grid_box(1, 101, &[(0.0, 1.0)], &Density::Unit).unwrap();
        let f = s.field_from(|c| c[0]).unwrap();
        assert!(coarea_check(&s, &f, Some(vec![2.0]), &CoareaParams::default()).is_err());
    }
}
