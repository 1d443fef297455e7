//! Relaxed perimeter, total variation, level-set selection, distance-function
//! levels and the weighted-interval counterexample to lower semicontinuity.

use serde::Serialize;

use crate::distance::distance_to_marks;
use crate::error::{GeoError, Result};
use crate::fit;
use crate::minkowski::{self, content_pair, enlarged_marks, recovery_values, RelaxedParams, Window};
use crate::par;
use crate::report::{Report, Table, Verdict};
use crate::slope::{slope_values, slope_values_where, HYPOTHESIS_SCALE_MULT, SLOPE_SCALE_MULT};
use crate::space::{SampledSpace, ScalarField, SetIndicator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerimeterParams {
    pub s_mults: Vec<f64>,
    pub rp_mults: Vec<f64>,
    /// `s + r′` may not exceed this multiple of `h`.
    pub max_reach_mult: f64,
    pub slope_mult: f64,
    pub l1_budget: Option<f64>,
    /// Also compute the relaxed content of `A`.
    pub cross_check: bool,
}

impl Default for PerimeterParams {
    fn default() -> Self {
        PerimeterParams {
            s_mults: vec![1.0, 2.0, 4.0, 8.0],
            rp_mults: vec![4.0, 8.0, 16.0, 32.0],
            max_reach_mult: 48.0,
            slope_mult: SLOPE_SCALE_MULT,
            l1_budget: None,
            cross_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyMember {
    pub s: f64,
    pub r_prime: f64,
    pub slope_integral: f64,
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerimeterEstimate {
    /// Extrapolated perimeter, clamped to `[0, family_min]`.
    pub upper: f64,
    /// Smallest `∫ sl dm` over the recovery family.
    pub family_min: f64,
    pub witness_params: (f64, f64),
    pub l1_error: f64,
    pub band: f64,
    pub cross_check: Option<f64>,
    pub cross_check_band: f64,
    /// No member's ramp fits inside the complement.
    pub saturated: bool,
    pub members: Vec<FamilyMember>,
}

impl PerimeterEstimate {
    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["s", "r_prime", "slope_integral", "l1_error"]);
        for m in &self.members {
            t.push(vec![m.s.into(), m.r_prime.into(), m.slope_integral.into(), m.l1_error.into()]);
        }
        t
    }
}

/// `Per(A)` from the recovery family `f = 1 - min(1, d_{A^s}/r′)`.
///
/// Each member costs `∫ sl(f, 3h) dm`. The minimum over the family is biased
/// upward by the slope-scale spillover (`∝ 1/r′`) and by the curvature of the
/// level sets (`∝ r′, s`); `upper` removes both by fitting
/// `P₀ + a/r′ + b·r′ + c·s` over the family.
pub fn perimeter(space: &SampledSpace, a: &SetIndicator, params: &PerimeterParams) -> Result<PerimeterEstimate> {
    space.check(a)?;
    if !a.has_points() {
        return Err(GeoError::EmptySet);
    }
    if space.measure(a)? <= 0.0 {
        return Err(GeoError::NullSet);
    }
    let h = space.resolution_h();
    let mut pairs = Vec::new();
    for &sm in &params.s_mults {
        for &rm in &params.rp_mults {
            if sm + rm <= params.max_reach_mult + 1e-9 {
                pairs.push((sm * h, rm * h));
            }
        }
    }
    if pairs.is_empty() {
        return Err(GeoError::EmptyFamily("no (s, r′) pair satisfies s + r′ ≤ r_max".into()));
    }
    let dist_a = distance_to_marks(space, a.marks());
    let delta = params.slope_mult * h;
    let budget = params.l1_budget.unwrap_or(f64::INFINITY);
    let s_values: Vec<f64> = params.s_mults.iter().map(|m| m * h).collect();
    let dist_as: Vec<Vec<f64>> = par::map_slice(&s_values, |&s| distance_to_marks(space, &enlarged_marks(&dist_a, s)));
    let members: Vec<FamilyMember> = par::map_slice(&pairs, |&(s, rp)| {
        let k = s_values.iter().position(|&x| x == s).expect("s on grid");
        let das = &dist_as[k];
        let f = recovery_values(das, rp);
        let l1 = l1_to_indicator(space, &f, a.marks());
        // f is 1 on the δ-interior of A^s and 0 at distance r′ + δ from it
        let sl = slope_values_where(space, &f, delta, |i| dist_a[i] >= s - delta && das[i] <= rp + delta);
        FamilyMember { s, r_prime: rp, slope_integral: space.integrate(&sl), l1_error: l1 }
    });
    // a member whose ramp does not fit before the complement runs out is truncated
    let reach = (0..space.len()).filter(|&i| !a.contains(i)).map(|i| dist_a[i]).fold(0.0, f64::max);
    let within: Vec<&FamilyMember> = members.iter().filter(|m| m.l1_error <= budget).collect();
    if within.is_empty() {
        return Err(GeoError::EmptyFamily(format!("no recovery function within L1 budget {budget}")));
    }
    let feasible: Vec<&FamilyMember> = within.iter().copied().filter(|m| m.s + m.r_prime + delta <= reach).collect();
    let saturated = feasible.is_empty();
    let (family_min, witness, l1_error, upper, band) = if saturated {
        // the complement is thinner than every ramp: it is absorbed within the reach
        let value = if reach > 0.0 { (space.total_mass() - space.measure(a)?) / reach } else { 0.0 };
        let w = within[0];
        (value, (w.s, w.r_prime), w.l1_error, value, 0.0)
    } else {
        let best = feasible
            .iter()
            .copied()
            .min_by(|x, y| x.slope_integral.total_cmp(&y.slope_integral).then(y.s.total_cmp(&x.s)))
            .expect("nonempty");
        let family_min = best.slope_integral;
        let (extrapolated, se) = family_fit(&feasible).unwrap_or((family_min, 0.0));
        let upper = extrapolated.clamp(0.0, family_min);
        let band = 2.0 * se + minkowski::RESOLUTION_BAND * (family_min - upper);
        (family_min, (best.s, best.r_prime), best.l1_error, upper, band)
    };
    let (cross_check, cross_check_band) = if params.cross_check {
        let rc = minkowski::relaxed_content(space, a, &RelaxedParams::default())?;
        (Some(rc.estimate.value()), rc.estimate.band)
    } else {
        (None, 0.0)
    };
    Ok(PerimeterEstimate {
        upper,
        family_min,
        witness_params: witness,
        l1_error,
        band,
        saturated,
        cross_check,
        cross_check_band,
        members,
    })
}

fn family_fit(members: &[&FamilyMember]) -> Option<(f64, f64)> {
    if members.len() < 6 {
        return None;
    }
    let design: Vec<Vec<f64>> = members.iter().map(|m| vec![1.0, 1.0 / m.r_prime, m.r_prime, m.s]).collect();
    let y: Vec<f64> = members.iter().map(|m| m.slope_integral).collect();
    fit::least_squares(&design, &y).map(|f| (f.coef[0], f.std_err[0]))
}

pub(crate) fn l1_to_indicator(space: &SampledSpace, f: &[f64], marks: &[bool]) -> f64 {
    par::ordered_sum(space.weights().iter().zip(f).zip(marks).map(|((w, v), &m)| w * (v - if m { 1.0 } else { 0.0 }).abs()))
}

/// Uniform midpoint grid of `n` thresholds in `(lo, hi)`.
pub fn midpoint_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarParams {
    pub t_points: usize,
    pub window: Option<Window>,
}

impl Default for VarParams {
    fn default() -> Self {
        VarParams { t_points: 64, window: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarEstimate {
    /// `∫ sl(·, 3h) dm`.
    pub upper: f64,
    /// `∫ M_-{f ≥ t} dt` by the trapezoid rule.
    pub lower: f64,
    pub band: f64,
    pub t_grid: Vec<f64>,
    pub level_contents: Vec<f64>,
}

/// Total variation of a nonnegative field, bracketed by the slope integral and
/// the integrated lower contents of its superlevel sets.
pub fn total_variation(space: &SampledSpace, f: &ScalarField, params: &VarParams) -> Result<VarEstimate> {
    space.check_field(f)?;
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(GeoError::param("f", "must be nonnegative"));
    }
    let upper = slope_integral_at(space, f.values(), SLOPE_SCALE_MULT);
    let top = f.max();
    let window = params.window.unwrap_or_else(|| Window::default_for(space));
    if top <= 0.0 || params.t_points == 0 {
        return Ok(VarEstimate { upper, lower: 0.0, band: 0.0, t_grid: vec![], level_contents: vec![] });
    }
    let t_grid = midpoint_grid(0.0, top, params.t_points);
    let levels = par::map_slice(&t_grid, |&t| {
        let marks: Vec<bool> = f.values().iter().map(|&v| v >= t).collect();
        content_pair(space, &marks, &window).map(|(l, _)| (l.value(), l.band))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = levels.iter().map(|x| x.0).collect();
    let bands: Vec<f64> = levels.iter().map(|x| x.1).collect();
    let lower = fit::trapezoid(&t_grid, &values, 0.0, top);
    let band = fit::trapezoid(&t_grid, &bands, 0.0, top);
    Ok(VarEstimate { upper, lower, band, t_grid, level_contents: values })
}

fn slope_integral_at(space: &SampledSpace, f: &[f64], mult: f64) -> f64 {
    space.integrate(&slope_values(space, f, mult * space.resolution_h()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSelection {
    pub t: f64,
    #[serde(skip)]
    pub set: SetIndicator,
    pub content: f64,
    pub content_band: f64,
    /// `(1/(1-2ε)) ∫ sl dm`.
    pub bound: f64,
    pub t_grid: Vec<f64>,
    pub contents: Vec<f64>,
}

/// Number of thresholds in the selection grid (odd, so `1/2` is on it).
pub const SELECT_POINTS: usize = 17;

/// Threshold in `(ε, 1-ε)` minimizing the lower content of `{f ≥ t}`.
///
/// Ties go to the threshold nearest `1/2`, then to the smaller one.
pub fn level_set_select(space: &SampledSpace, f: &ScalarField, eps: f64) -> Result<LevelSelection> {
    level_set_select_with(space, f, eps, SELECT_POINTS, None)
}

pub fn level_set_select_with(
    space: &SampledSpace,
    f: &ScalarField,
    eps: f64,
    points: usize,
    window: Option<Window>,
) -> Result<LevelSelection> {
    space.check_field(f)?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(GeoError::param("eps", "must lie in (0, 1/2)"));
    }
    if f.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(GeoError::param("f", "must be [0,1]-valued"));
    }
    if points == 0 {
        return Err(GeoError::EmptyFamily("empty threshold grid".into()));
    }
    let window = window.unwrap_or_else(|| Window::default_for(space));
    let t_grid = midpoint_grid(eps, 1.0 - eps, points);
    let rows = par::map_slice(&t_grid, |&t| {
        let marks: Vec<bool> = f.values().iter().map(|&v| v >= t).collect();
        content_pair(space, &marks, &window).map(|(l, _)| (l.value(), l.band, marks))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for k in 1..rows.len() {
        let (c, cb) = (rows[k].0, rows[best].0);
        let closer = (t_grid[k] - 0.5).abs() < (t_grid[best] - 0.5).abs();
        let same = (t_grid[k] - 0.5).abs() == (t_grid[best] - 0.5).abs();
        if c < cb || (c == cb && (closer || (same && t_grid[k] < t_grid[best]))) {
            best = k;
        }
    }
    let bound = slope_integral_at(space, f.values(), SLOPE_SCALE_MULT) / (1.0 - 2.0 * eps);
    let contents = rows.iter().map(|r| r.0).collect();
    let (content, content_band, marks) = rows.into_iter().nth(best).expect("nonempty grid");
    Ok(LevelSelection { t: t_grid[best], set: space.bind_set(marks), content, content_band, bound, t_grid, contents })
}

impl LevelSelection {
    pub fn guarantee_holds(&self) -> bool {
        self.content <= self.bound + self.content_band
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelParams {
    pub tolerance: f64,
    pub fail_fraction: f64,
    pub atom_threshold: f64,
    pub window: Option<Window>,
    pub perimeter: PerimeterParams,
}

impl Default for LevelParams {
    fn default() -> Self {
        LevelParams {
            tolerance: 0.04,
            fail_fraction: 0.0,
            atom_threshold: 1e-3,
            window: None,
            perimeter: PerimeterParams { cross_check: false, ..Default::default() },
        }
    }
}

/// Level sets of `d_A`: one-sided contents of `{d_A ≤ t}` and `{d_A ≥ t}`, the
/// perimeter of `{d_A ≤ t}` and the two-sided quotient of the level band.
///
/// The level set `{d_A = t}` is sampled as the band `{|d_A - t| ≤ h}`; its
/// enlargement grows on both sides, so half its content estimates the
/// two-sided limit `m({d_A = t}^r)/(2r)`.
pub fn distance_levels(space: &SampledSpace, a: &SetIndicator, t_grid: &[f64], params: &LevelParams) -> Result<Report> {
    space.check(a)?;
    if !a.has_points() {
        return Err(GeoError::EmptySet);
    }
    let window = params.window.unwrap_or_else(|| Window::default_for(space));
    let d = distance_to_marks(space, a.marks());
    let h = space.resolution_h();
    let total = space.total_mass();
    let diam = space.diameter();
    let rows = par::map_slice(t_grid, |&t| -> Result<LevelRow> {
        let below: Vec<bool> = d.iter().map(|&x| x <= t).collect();
        let above: Vec<bool> = d.iter().map(|&x| x >= t).collect();
        let band: Vec<bool> = d.iter().map(|&x| (x - t).abs() <= h).collect();
        let atom = space.measure_marks(&d.iter().map(|&x| x == t).collect::<Vec<_>>());
        let (bl, bu) = content_pair(space, &below, &window)?;
        let (al, au) = content_pair(space, &above, &window)?;
        let (ql, _) = content_pair(space, &band, &window)?;
        let below_set = space.bind_set(below);
        let per = if t >= diam || !below_set.has_points() || space.measure_marks(below_set.marks()) >= total {
            0.0
        } else {
            perimeter(space, &below_set, &params.perimeter)?.upper
        };
        Ok(LevelRow {
            t,
            below_lower: bl.value(),
            below_upper: bu.value(),
            above_lower: al.value(),
            above_upper: au.value(),
            perimeter: per,
            two_sided: 0.5 * ql.value(),
            atom,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        "distance_levels",
        &["t", "below_lower", "below_upper", "above_lower", "above_upper", "perimeter", "two_sided", "level_mass", "spread"],
    );
    let mut failures = 0usize;
    let mut atoms = 0usize;
    for r in &rows {
        let q = r.quantities();
        let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
        if spread > params.tolerance {
            failures += 1;
        }
        if r.atom > params.atom_threshold * total {
            atoms += 1;
        }
        let mut row: Vec<_> = vec![r.t.into()];
        row.extend(q.iter().map(|&v| v.into()));
        row.push(r.atom.into());
        row.push(spread.into());
        table.push(row);
    }
    let mut report = Report::new("distance function levels");
    let allowed = (params.fail_fraction * rows.len() as f64).floor();
    report.verdict(Verdict::at_most(
        "level_agreement_failures",
        "contents, perimeter and two-sided quotient of {d_A = t} coincide for a.e. t",
        failures as f64,
        allowed,
    ));
    report.verdict(
        Verdict::at_most("level_atoms", "m({d_A = t}) = 0 up to countably many t", atoms as f64, allowed).informational(),
    );
    let sl = slope_values(space, &d, HYPOTHESIS_SCALE_MULT * h);
    let off: Vec<usize> = (0..d.len()).filter(|&i| !a.contains(i)).collect();
    let unit = off.iter().filter(|&&i| (sl[i] - 1.0).abs() <= 0.05).count();
    let frac = if off.is_empty() { 1.0 } else { unit as f64 / off.len() as f64 };
    let v = Verdict::at_least("unit_slope_fraction", "|∇d_A| = 1 off A on length spaces", frac, 0.95);
    report.verdict(if space.is_length_space() { v } else { v.informational() });
    report.set("t_grid", t_grid.to_vec()).set("tolerance", params.tolerance);
    report.table(table);
    Ok(report)
}

struct LevelRow {
    t: f64,
    below_lower: f64,
    below_upper: f64,
    above_lower: f64,
    above_upper: f64,
    perimeter: f64,
    two_sided: f64,
    atom: f64,
}

impl LevelRow {
    fn quantities(&self) -> [f64; 6] {
        [self.below_lower, self.below_upper, self.above_lower, self.above_upper, self.perimeter, self.two_sided]
    }
}

/// Staircase approximation of the identity on a fat Cantor interval: constant on
/// each interval left after `depth` removal stages, linear across the gaps. Inner
/// intervals take the identity's midpoint value, the outer ones `0` and `1`.
pub fn gap_staircase(space: &SampledSpace, depth: usize) -> Result<Vec<f64>> {
    let fc = space.fat_cantor().ok_or_else(|| GeoError::WrongSpaceKind("a fat Cantor interval".into()))?;
    let gaps: Vec<(f64, f64)> = fc.gaps.iter().filter(|g| g.2 <= depth).map(|g| (g.0, g.1)).collect();
    // remaining intervals between consecutive gaps, with their midpoint values
    let mut bounds = vec![0.0];
    for &(a, b) in &gaps {
        bounds.push(a);
        bounds.push(b);
    }
    bounds.push(1.0);
    let mut mids: Vec<f64> = bounds.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    let last = mids.len() - 1;
    mids[0] = 0.0;
    mids[last] = 1.0;
    let values = (0..space.len())
        .map(|i| {
            let x = space.coords(i).expect("grid point")[0];
            let k = gaps.partition_point(|g| g.1 <= x);
            if k < gaps.len() && x > gaps[k].0 {
                let (a, b) = gaps[k];
                mids[k] + (mids[k + 1] - mids[k]) * (x - a) / (b - a)
            } else {
                mids[k]
            }
        })
        .collect();
    Ok(values)
}

/// Compares `∫ sl(id) dm` with the cheapest gap staircase within an L¹ budget.
pub fn eq13_gap_demo(space: &SampledSpace, l1_budget: f64, tol: f64) -> Result<Report> {
    let fc = space.fat_cantor().ok_or_else(|| GeoError::WrongSpaceKind("a fat Cantor interval".into()))?.clone();
    let id: Vec<f64> = (0..space.len()).map(|i| space.coords(i).expect("grid point")[0]).collect();
    let j_id = slope_integral_at(space, &id, SLOPE_SCALE_MULT);
    let k_mass = crate::space::FatCantor::analytic_k_mass(fc.target_k_mass, fc.depth);
    let analytic_id = k_mass + fc.gap_weight * (1.0 - k_mass);
    let depths: Vec<usize> = (1..=fc.depth).collect();
    let rows = par::map_slice(&depths, |&dp| -> Result<(usize, f64, f64)> {
        let f = gap_staircase(space, dp)?;
        let l1 = par::ordered_sum(space.weights().iter().zip(&f).zip(&id).map(|((w, a), b)| w * (a - b).abs()));
        Ok((dp, slope_integral_at(space, &f, SLOPE_SCALE_MULT), l1))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("eq13_staircases", &["depth", "slope_integral", "l1_error"]);
    for &(dp, j, l1) in &rows {
        table.push(vec![dp.into(), j.into(), l1.into()]);
    }
    let best = rows
        .iter()
        .filter(|r| r.2 <= l1_budget)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .copied()
        .ok_or_else(|| GeoError::EmptyFamily(format!("no staircase within L1 budget {l1_budget}")))?;
    let mut report = Report::new("slope integral is not lower semicontinuous");
    report.verdict(Verdict::within(
        "identity_slope_integral",
        "∫ sl(id) dm = |K| + ω_gap (1 - |K|)",
        j_id,
        analytic_id,
        tol / 2.0,
    ));
    report.verdict(Verdict::at_most("staircase_l1_error", "staircase converges to the identity in L¹", best.2, l1_budget));
    if fc.gap_weight < 1.0 {
        let target = fc.gap_weight;
        report.verdict(Verdict::at_most("staircase_value", "all variation placed on the gaps costs ω_gap", best.1, target + tol));
        report.verdict(Verdict::at_least(
            "strict_gap",
            "limsup ∫ sl(f_n) dm < ∫ sl(f) dm",
            (analytic_id - tol / 2.0) - (target + tol),
            0.0,
        ));
    } else {
        report.verdict(Verdict::at_least("no_gap", "unweighted interval: liminf ∫ sl(f_n) dm ≥ ∫ sl(f) dm", best.1, j_id - tol));
    }
    report
        .set("identity_value", j_id)
        .set("staircase_value", best.1)
        .set("staircase_depth", best.0)
        .set("staircase_l1", best.2)
        .set("k_mass", k_mass);
    report.table(table);
    Ok(report)
}
