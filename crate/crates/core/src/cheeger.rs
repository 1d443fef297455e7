//! Cheeger constants `inf ∂A / m(A)` over `0 < m(A) ≤ m(X)/2`, searched over
//! structured candidate families under three boundary notions.

use serde::Serialize;

use crate::ball::BallQuery;
use crate::distance::distance_to_marks;
use crate::error::{GeoError, Result};
use crate::minkowski::{content_pair, Window};
use crate::par;
use crate::perimeter::{perimeter, PerimeterParams};
use crate::report::{Report, Table, Verdict};
use crate::space::{SampledSpace, SetIndicator};

/// Largest number of points for the exhaustive family.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Definition {
    /// Lower Minkowski content.
    Minl,
    /// Upper Minkowski content.
    Minu,
    /// Perimeter.
    Per,
}

impl Definition {
    pub const ALL: [Definition; 3] = [Definition::Per, Definition::Minl, Definition::Minu];

    pub fn name(self) -> &'static str {
        match self {
            Definition::Minl => "minl",
            Definition::Minu => "minu",
            Definition::Per => "per",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FamilySpec {
    /// Closed balls about every `center_stride`-th point, radii on a geometric grid
    /// plus the largest radius meeting the half-mass constraint.
    BallSweep { center_stride: usize, radius_points: usize },
    /// Sublevel sets `{d_{x} ≤ t}` of distance fields from the seeds (evenly spaced
    /// points when empty), thresholds on a uniform grid plus the half-mass threshold.
    SublevelSweep { seeds: Vec<usize>, levels: usize },
    #[serde(skip)]
    Explicit(Vec<SetIndicator>),
    /// Every subset; spaces with at most `EXHAUSTIVE_LIMIT` points.
    Exhaustive,
}

impl FamilySpec {
    pub fn ball_sweep() -> Self {
        FamilySpec::BallSweep { center_stride: 1, radius_points: 16 }
    }

    pub fn sublevel_sweep() -> Self {
        FamilySpec::SublevelSweep { seeds: vec![], levels: 32 }
    }

    pub fn describe(&self) -> String {
        match self {
            FamilySpec::BallSweep { center_stride, radius_points } => {
                format!("ball_sweep(center_stride={center_stride}, radius_points={radius_points})")
            }
            FamilySpec::SublevelSweep { seeds, levels } => format!("sublevel_sweep(seeds={seeds:?}, levels={levels})"),
            FamilySpec::Explicit(sets) => format!("explicit({} sets)", sets.len()),
            FamilySpec::Exhaustive => "exhaustive".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateEval {
    pub label: String,
    pub mass: f64,
    pub lower: f64,
    pub upper: f64,
    pub content_band: f64,
    pub perimeter: f64,
    pub perimeter_band: f64,
    /// Contents not diverging, not truncated, and agreeing within the tolerance.
    pub resolved: bool,
    #[serde(skip)]
    pub set: SetIndicator,
}

impl CandidateEval {
    pub fn boundary(&self, d: Definition) -> f64 {
        match d {
            Definition::Minl => self.lower,
            Definition::Minu => self.upper,
            Definition::Per => self.perimeter,
        }
    }

    pub fn band(&self, d: Definition) -> f64 {
        match d {
            Definition::Per => self.perimeter_band,
            _ => self.content_band,
        }
    }

    pub fn ratio(&self, d: Definition) -> f64 {
        self.boundary(d) / self.mass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheegerResult {
    pub gamma: f64,
    pub definition: Definition,
    #[serde(skip)]
    pub witness: SetIndicator,
    pub witness_label: String,
    pub witness_mass: f64,
    pub family: String,
    pub candidates: usize,
    pub rows: Vec<(String, f64, f64, f64)>,
}

impl CheegerResult {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(format!("cheeger_{}", self.definition.name()), &["candidate", "mass", "boundary", "ratio"]);
        for (label, mass, b, r) in &self.rows {
            t.push(vec![label.as_str().into(), (*mass).into(), (*b).into(), (*r).into()]);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheegerParams {
    pub window: Option<Window>,
    pub perimeter: PerimeterParams,
    /// Relative tolerance for resolved boundaries and the equality verdict.
    pub tolerance: f64,
}

impl Default for CheegerParams {
    fn default() -> Self {
        CheegerParams { window: None, perimeter: PerimeterParams { cross_check: false, ..Default::default() }, tolerance: 0.03 }
    }
}

fn half_mass(space: &SampledSpace) -> f64 {
    0.5 * space.total_mass() + space.max_weight()
}

/// Largest sorted threshold `t` with `m({v ≤ t}) ≤ limit`.
fn half_mass_threshold(space: &SampledSpace, v: &[f64], limit: f64) -> Option<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let w = space.weights();
    let mut mass = 0.0;
    let mut best = None;
    let mut k = 0;
    while k < order.len() {
        let t = v[order[k]];
        while k < order.len() && v[order[k]] == t {
            mass += w[order[k]];
            k += 1;
        }
        if mass <= limit {
            best = Some(t);
        } else {
            break;
        }
    }
    best
}

fn default_seeds(n: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..4).map(|k| k * (n - 1) / 4).collect();
    s.push(n - 1);
    s.dedup();
    s
}

/// Candidate sets with labels, before the half-mass filter.
pub fn family_sets(space: &SampledSpace, spec: &FamilySpec) -> Result<Vec<(String, SetIndicator)>> {
    let n = space.len();
    let limit = half_mass(space);
    let h = space.resolution_h();
    let out = match spec {
        FamilySpec::Explicit(sets) => {
            for s in sets {
                space.check(s)?;
            }
            sets.iter().enumerate().map(|(k, s)| (format!("set{k}"), s.clone())).collect()
        }
        FamilySpec::Exhaustive => {
            if n > EXHAUSTIVE_LIMIT {
                return Err(GeoError::param("family", format!("exhaustive search needs at most {EXHAUSTIVE_LIMIT} points")));
            }
            (1u64..(1u64 << n))
                .map(|bits| {
                    let marks: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                    (format!("bits{bits:b}"), space.bind_set(marks))
                })
                .collect()
        }
        FamilySpec::BallSweep { center_stride, radius_points } => {
            if *center_stride == 0 || *radius_points < 2 {
                return Err(GeoError::param("family", "center_stride ≥ 1 and radius_points ≥ 2 required"));
            }
            let r_max = 0.5 * space.diameter();
            let r_min = (2.0 * h).min(r_max);
            let ratio = (r_max / r_min).powf(1.0 / (*radius_points - 1) as f64);
            let radii: Vec<f64> = (0..*radius_points).map(|k| r_min * ratio.powi(k as i32)).collect();
            let centers: Vec<usize> = (0..n).step_by(*center_stride).collect();
            par::map_slice(&centers, |&c| {
                let mut d = vec![f64::INFINITY; n];
                d[c] = 0.0;
                BallQuery::new(space, r_max * 2.0 + h, true).for_each(c, |j, dj| d[j] = dj);
                let mut rs = radii.clone();
                if let Some(t) = half_mass_threshold(space, &d, limit) {
                    rs.push(t);
                }
                rs.sort_by(f64::total_cmp);
                rs.dedup();
                rs.into_iter()
                    .map(|r| (format!("ball({c},{r:.6})"), space.bind_set(d.iter().map(|&x| x <= r).collect())))
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect()
        }
        FamilySpec::SublevelSweep { seeds, levels } => {
            if *levels < 2 {
                return Err(GeoError::param("family", "levels ≥ 2 required"));
            }
            let seeds = if seeds.is_empty() { default_seeds(n) } else { seeds.clone() };
            if seeds.iter().any(|&s| s >= n) {
                return Err(GeoError::param("seeds", "seed index out of range"));
            }
            par::map_slice(&seeds, |&seed| {
                let mut marks = vec![false; n];
                marks[seed] = true;
                let d = distance_to_marks(space, &marks);
                let top = d.iter().copied().fold(0.0, f64::max);
                let mut ts: Vec<f64> = (1..*levels).map(|k| top * k as f64 / *levels as f64).collect();
                if let Some(t) = half_mass_threshold(space, &d, limit) {
                    ts.push(t);
                }
                ts.sort_by(f64::total_cmp);
                ts.dedup();
                ts.into_iter()
                    .map(|t| (format!("sublevel({seed},{t:.6})"), space.bind_set(d.iter().map(|&x| x <= t).collect())))
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect()
        }
    };
    Ok(out)
}

/// Evaluates every feasible candidate; candidates whose estimators fail are dropped.
pub fn evaluate_family(space: &SampledSpace, spec: &FamilySpec, params: &CheegerParams) -> Result<Vec<CandidateEval>> {
    let limit = half_mass(space);
    let window = params.window.unwrap_or_else(|| Window::default_for(space));
    let mut sets = family_sets(space, spec)?;
    sets.retain(|(_, s)| {
        let m = space.measure_marks(s.marks());
        m > 0.0 && m <= limit
    });
    let mut seen = std::collections::HashSet::new();
    sets.retain(|(_, s)| seen.insert(s.marks().to_vec()));
    let evals = par::map_slice(&sets, |(label, set)| -> Option<CandidateEval> {
        let mass = space.measure_marks(set.marks());
        let (lo, up) = content_pair(space, set.marks(), &window).ok()?;
        let per = perimeter(space, set, &params.perimeter).ok()?;
        let (lower, upper) = (lo.value(), up.value());
        let gap = if upper > 0.0 { (upper - lower) / upper } else { 0.0 };
        let resolved = !lo.diverging && !lo.truncated && gap <= params.tolerance;
        Some(CandidateEval {
            label: label.clone(),
            mass,
            lower,
            upper,
            content_band: lo.band.max(up.band),
            perimeter: per.upper,
            perimeter_band: per.band,
            resolved,
            set: set.clone(),
        })
    });
    let out: Vec<CandidateEval> = evals.into_iter().flatten().collect();
    if out.is_empty() {
        return Err(GeoError::EmptyFamily(spec.describe()));
    }
    Ok(out)
}

fn pick(evals: &[CandidateEval], d: Definition, family: String) -> Result<CheegerResult> {
    let best = evals
        .iter()
        .min_by(|a, b| {
            a.ratio(d).total_cmp(&b.ratio(d)).then(a.mass.total_cmp(&b.mass)).then_with(|| a.set.marks().cmp(b.set.marks()))
        })
        .ok_or_else(|| GeoError::EmptyFamily(family.clone()))?;
    Ok(CheegerResult {
        gamma: best.ratio(d),
        definition: d,
        witness: best.set.clone(),
        witness_label: best.label.clone(),
        witness_mass: best.mass,
        family,
        candidates: evals.len(),
        rows: evals.iter().map(|e| (e.label.clone(), e.mass, e.boundary(d), e.ratio(d))).collect(),
    })
}

pub fn cheeger_constant(
    space: &SampledSpace,
    spec: &FamilySpec,
    definition: Definition,
    params: &CheegerParams,
) -> Result<CheegerResult> {
    let evals = evaluate_family(space, spec, params)?;
    pick(&evals, definition, spec.describe())
}

/// The three constants on one family, their ordering and their agreement.
pub fn compare_definitions(
    space: &SampledSpace,
    spec: &FamilySpec,
    params: &CheegerParams,
) -> Result<(Report, [CheegerResult; 3])> {
    let evals = evaluate_family(space, spec, params)?;
    let family = spec.describe();
    let [per, minl, minu] = Definition::ALL.map(|d| pick(&evals, d, family.clone()));
    let (per, minl, minu) = (per?, minl?, minu?);

    let mut report = Report::new("cheeger constants");
    let per_minl = evals.iter().filter(|e| e.perimeter > e.lower + e.perimeter_band + e.content_band).count();
    let minl_minu = evals.iter().filter(|e| e.lower > e.upper + 2.0 * e.content_band).count();
    report.verdict(Verdict::at_most("candidate_per_le_minl", "Per(A) ≤ M_-(A)", per_minl as f64, 0.0));
    report.verdict(Verdict::at_most("candidate_minl_le_minu", "M_-(A) ≤ M_+(A)", minl_minu as f64, 0.0));
    let ratio_band = |e: &CandidateEval, d: Definition| e.band(d) / e.mass;
    let w_minl = evals.iter().find(|e| e.label == minl.witness_label).unwrap();
    let w_minu = evals.iter().find(|e| e.label == minu.witness_label).unwrap();
    report.verdict(Verdict::at_most(
        "gamma_per_le_minl",
        "γ with Per ≤ γ with M_-",
        per.gamma,
        minl.gamma + ratio_band(w_minl, Definition::Per) + ratio_band(w_minl, Definition::Minl),
    ));
    report.verdict(Verdict::at_most(
        "gamma_minl_le_minu",
        "γ with M_- ≤ γ with M_+",
        minl.gamma,
        minu.gamma + 2.0 * ratio_band(w_minu, Definition::Minu),
    ));
    let resolved: Vec<CandidateEval> = evals.iter().filter(|e| e.resolved).cloned().collect();
    if resolved.is_empty() {
        report.note("no candidate has a resolved boundary; equality verdict skipped");
    } else {
        let r_per = pick(&resolved, Definition::Per, family.clone())?;
        let r_minu = pick(&resolved, Definition::Minu, family.clone())?;
        let gap = (r_minu.gamma - r_per.gamma).abs() / r_per.gamma.abs().max(1e-300);
        report.verdict(Verdict::at_most("gamma_equality", "γ is the same with M_+, M_- or Per", gap, params.tolerance));
        report.set("resolved_candidates", resolved.len());
    }
    let mut t = Table::new("cheeger_candidates", &["candidate", "mass", "perimeter", "lower", "upper", "resolved"]);
    for e in &evals {
        t.push(vec![
            e.label.as_str().into(),
            e.mass.into(),
            e.perimeter.into(),
            e.lower.into(),
            e.upper.into(),
            e.resolved.into(),
        ]);
    }
    report.table(t);
    report
        .set("family", &family)
        .set("gamma_per", per.gamma)
        .set("gamma_minl", minl.gamma)
        .set("gamma_minu", minu.gamma)
        .set("witness_per", &per.witness_label)
        .set("witness_minl", &minl.witness_label)
        .set("witness_minu", &minu.witness_label);
    Ok((report, [per, minl, minu]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Density;
    use std::f64::consts::PI;

    #[test]
    fn interval_half() {
        let s = SampledSpace::grid_box(1, 1000, &[(0.0, 1.0)], &Density::Unit).unwrap();
        let spec = FamilySpec::SublevelSweep { seeds: vec![0], levels: 16 };
        let (report, [per, minl, minu]) = compare_definitions(&s, &spec, &CheegerParams::default()).unwrap();
        for r in [&per, &minl, &minu] {
            assert!((r.gamma - 2.0).abs() < 0.06, "{} {}", r.definition.name(), r.gamma);
            assert!(r.witness_mass <= 0.5 * s.total_mass() + s.max_weight());
        }
        assert!((per.witness_mass - 0.5).abs() <= s.max_weight() + 1e-12);
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn circle_half_arc() {
        let s = SampledSpace::circle(1024, 2.0 * PI).unwrap();
        let spec = FamilySpec::BallSweep { center_stride: 256, radius_points: 8 };
        let (report, [per, _, minu]) = compare_definitions(&s, &spec, &CheegerParams::default()).unwrap();
        assert!((per.gamma / (2.0 / PI) - 1.0).abs() < 0.03, "{}", per.gamma);
        assert!((minu.gamma / (2.0 / PI) - 1.0).abs() < 0.03, "{}", minu.gamma);
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn empty_family_and_exhaustive_guard() {
        let s = SampledSpace::grid_box(1, 100, &[(0.0, 1.0)], &Density::Unit).unwrap();
        let spec = FamilySpec::Explicit(vec![s.full_set()]);
        assert!(matches!(evaluate_family(&s, &spec, &CheegerParams::default()), Err(GeoError::EmptyFamily(_))));
        assert!(family_sets(&s, &FamilySpec::Exhaustive).is_err());
    }
}
