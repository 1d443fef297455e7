//! One function per task: build the inputs, run the estimators, collect verdicts.

use std::time::Instant;

use mmsgeo::cheeger::{compare_definitions, CheegerParams, FamilySpec};
use mmsgeo::coarea::{coarea_check, CoareaParams};
use mmsgeo::descent::{variational_descent, DescentParams};
use mmsgeo::distance::distance_to_marks;
use mmsgeo::gauge::{coarea_inequalities, hausdorff, hausdorff_delta, GaugeCoareaParams, GaugeParams, HausdorffParams};
use mmsgeo::minkowski::{
    check_lower_bound_chain, check_semigroup_inclusion, content_pair, enlarge, relaxed_content, RelaxedParams, Window,
};
use mmsgeo::perimeter::{distance_levels, eq13_gap_demo, perimeter, LevelParams, PerimeterParams};
use mmsgeo::report::{Cell, Report, Table, Verdict};
use mmsgeo::slope::{check_semigroup_ops, sup_semigroup};
use mmsgeo::space::{Metric, SampledSpace, ScalarField, SetIndicator};

use crate::config::{Built, ExperimentConfig, Level, Params, Task};
use crate::CliError;

/// Relative tolerance of value checks when none is configured.
pub const DEFAULT_TOLERANCE: f64 = 0.03;

pub fn execute(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = &cfg.params;
    if cfg.task == Task::Repro {
        return Err(CliError::Config("repro runs through the suite runner".into()));
    }
    let built = cfg.space.as_ref().ok_or_else(|| CliError::Config("missing [space] section".into()))?.build()?;
    let set = cfg.set.as_ref().map(|s| s.build(&built)).transpose()?;
    let field = cfg.field.as_ref().map(|f| f.build(&built, set.as_ref())).transpose()?;
    let need_set = || set.clone().ok_or_else(|| CliError::Config(format!("task {} needs a [set] section", cfg.task.name())));
    let need_field =
        || field.clone().ok_or_else(|| CliError::Config(format!("task {} needs a [field] section", cfg.task.name())));
    let space = &built.space;
    match cfg.task {
        Task::Minkowski => minkowski(space, &need_set()?, p),
        Task::Perimeter => perimeter_task(space, &need_set()?, p),
        Task::Coarea => coarea(space, &need_field()?, p),
        Task::DistanceLevels => levels(space, &need_set()?, p),
        Task::Hausdorff => gauge(space, &need_set()?, field.as_ref(), p),
        Task::Cheeger => cheeger(space, p),
        Task::Eq13Gap => eq13(space, p),
        Task::Verify => verify(&built, p.level.unwrap_or_default(), cfg.seed),
        Task::Repro => unreachable!(),
    }
}

fn tol(p: &Params) -> f64 {
    p.tolerance.unwrap_or(DEFAULT_TOLERANCE)
}

fn expect(report: &mut Report, p: &Params, name: &str, anchor: &str, value: f64) {
    if let Some(e) = p.expected {
        report.verdict(Verdict::within(name, anchor, value, e, tol(p) * e.abs()));
    }
}

fn window(space: &SampledSpace, p: &Params) -> Window {
    p.window().unwrap_or_else(|| Window::default_for(space))
}

fn minkowski(space: &SampledSpace, a: &SetIndicator, p: &Params) -> Result<Report, CliError> {
    let w = window(space, p);
    let (lo, up) = content_pair(space, a.marks(), &w)?;
    let mut report = Report::new("Minkowski contents");
    report.verdict(Verdict::at_most("lower_le_upper", "M_-(A) ≤ M_+(A)", lo.value(), up.value() + lo.band + up.band));
    expect(&mut report, p, "lower_content", "M_-(A) matches the reference value", lo.value());
    expect(&mut report, p, "upper_content", "M_+(A) matches the reference value", up.value());
    let q = &lo.quotients;
    let growth = if q.is_empty() || q[q.len() - 1] <= 0.0 { f64::INFINITY } else { q[0] / q[q.len() - 1] };
    if p.diverging.unwrap_or(false) {
        report.verdict(Verdict::at_least(
            "diverging_flag",
            "m(A^r \\ A)/r → ∞ for infinite content",
            f64::from(u8::from(lo.diverging)),
            1.0,
        ));
        report.verdict(Verdict::at_least("quotient_growth", "m(A^r \\ A)/r grows as r ↓ 0", growth, 4.0));
        let rises = q.windows(2).filter(|w| w[1] > w[0]).count();
        report.verdict(Verdict::at_most("quotient_monotone", "m(A^r \\ A)/r grows as r ↓ 0", rises as f64, 0.0));
    } else {
        report.verdict(
            Verdict::at_most(
                "resolved_boundary",
                "difference quotients converge as r ↓ 0",
                f64::from(u8::from(lo.diverging)),
                0.0,
            )
            .informational(),
        );
    }
    let s = p.s.unwrap_or(w.r_min);
    let t = p.t.unwrap_or(w.r_min);
    report.absorb("inclusion", check_semigroup_inclusion(space, a, s, t)?);
    report.absorb("chain", check_lower_bound_chain(space, a, &w, p.steps.unwrap_or(4))?);
    if p.relaxed.unwrap_or(false) {
        let rel = relaxed_content(space, a, &RelaxedParams { l1_budget: p.l1_budget, window: Some(w), ..Default::default() })?;
        report.verdict(Verdict::at_most(
            "relaxed_le_lower",
            "relaxed M_+(A) ≤ M_-(A)",
            rel.estimate.value(),
            lo.value() + lo.band + rel.estimate.band,
        ));
        report.set("relaxed", rel.estimate.value());
    }
    report.table(lo.to_table("profile"));
    report
        .set("lower", lo.value())
        .set("upper", up.value())
        .set("band", lo.band.max(up.band))
        .set("inf_quotient", lo.inf_quotient)
        .set("sup_quotient", lo.sup_quotient)
        .set("log_slope", lo.log_slope)
        .set("quotient_growth", growth)
        .set("diverging", lo.diverging)
        .set("truncated", lo.truncated)
        .set("window", w);
    Ok(report)
}

fn perimeter_task(space: &SampledSpace, a: &SetIndicator, p: &Params) -> Result<Report, CliError> {
    let w = window(space, p);
    let per = perimeter(space, a, &PerimeterParams { l1_budget: p.l1_budget, ..Default::default() })?;
    let rel = relaxed_content(space, a, &RelaxedParams { l1_budget: p.l1_budget, window: Some(w), ..Default::default() })?;
    let (lo, _) = content_pair(space, a.marks(), &w)?;
    let r = rel.estimate.value();
    let mut report = Report::new("perimeter and relaxed content");
    report.verdict(Verdict::at_most(
        "perimeter_le_relaxed",
        "Per(A) ≤ relaxed M_+(A)",
        per.upper,
        r + per.band + rel.estimate.band,
    ));
    report.verdict(Verdict::at_most("relaxed_le_lower", "relaxed M_+(A) ≤ M_-(A)", r, lo.value() + rel.estimate.band + lo.band));
    report.verdict(Verdict::at_most(
        "relaxed_le_recovery",
        "relaxed M_+(A) ≤ ∫ sl dm of the best recovery function",
        r,
        per.family_min + rel.estimate.band,
    ));
    report.verdict(Verdict::at_most("perimeter_le_lower", "Per(A) ≤ M_-(A)", per.upper, lo.value() + per.band + lo.band));
    let pairs = [
        ("perimeter_vs_relaxed", per.upper, per.band, r, rel.estimate.band),
        ("perimeter_vs_lower", per.upper, per.band, lo.value(), lo.band),
        ("relaxed_vs_lower", r, rel.estimate.band, lo.value(), lo.band),
    ];
    for (name, a1, b1, a2, b2) in pairs {
        report.verdict(Verdict::within(name, "Per(A) = relaxed M_+(A) = M_-(A) for regular A", a1, a2, b1 + b2));
    }
    expect(&mut report, p, "perimeter_value", "Per(A) matches the reference value", per.upper);
    expect(&mut report, p, "relaxed_value", "relaxed M_+(A) matches the reference value", r);
    expect(&mut report, p, "lower_value", "M_-(A) matches the reference value", lo.value());
    if p.descent.unwrap_or(false) {
        let d = variational_descent(
            space,
            a,
            &DescentParams { lambda: p.lambda.unwrap_or(10.0), iterations: p.iterations.unwrap_or(300), ..Default::default() },
        )?;
        let monotone = d.trace.windows(2).filter(|w| w[1] > w[0]).count();
        report.verdict(Verdict::at_most("descent_monotone", "descent objective is nonincreasing", monotone as f64, 0.0));
        report.verdict(Verdict::at_least(
            "descent_vs_family",
            "Per(A) is an infimum: descent cannot beat it beyond the band",
            d.slope_part,
            per.upper - per.band,
        ));
        report.set("descent_slope", d.slope_part).set("descent_l1", d.l1_part).set("descent_trace", &d.trace);
    }
    report.table(per.to_table("perimeter_family"));
    report.table(lo.to_table("profile"));
    report
        .set("perimeter", per.upper)
        .set("perimeter_band", per.band)
        .set("family_min", per.family_min)
        .set("cross_check", per.cross_check)
        .set("relaxed", r)
        .set("relaxed_band", rel.estimate.band)
        .set("relaxed_witness", rel.witness)
        .set("lower", lo.value())
        .set("lower_band", lo.band);
    Ok(report)
}

fn coarea(space: &SampledSpace, f: &ScalarField, p: &Params) -> Result<Report, CliError> {
    let params = CoareaParams {
        t_points: p.t_points.unwrap_or(64),
        tolerance: p.tolerance.unwrap_or(0.03),
        window: p.window(),
        ..Default::default()
    };
    let c = coarea_check(space, f, p.t_grid.clone(), &params)?;
    let mut report = c.to_report();
    expect(&mut report, p, "variation_value", "Var(f) matches the reference value", c.lhs);
    expect(&mut report, p, "perimeter_integral_value", "∫ Per{f ≥ t} dt matches the reference value", c.rhs_per);
    expect(&mut report, p, "content_integral_value", "∫ M_-{f ≥ t} dt matches the reference value", c.rhs_mink);
    report.set("agreeing_levels", c.agreeing_levels).set("unit_slope_fraction", c.unit_slope_fraction);
    Ok(report)
}

pub fn cell_f64(c: &Cell) -> f64 {
    match c {
        Cell::Num(v) => *v,
        Cell::Int(v) => *v as f64,
        Cell::Bool(b) => f64::from(u8::from(*b)),
        Cell::Text(_) => f64::NAN,
    }
}

fn levels(space: &SampledSpace, a: &SetIndicator, p: &Params) -> Result<Report, CliError> {
    let t_grid = p.t_grid.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
    let params = LevelParams { tolerance: p.tolerance.unwrap_or(0.04), window: p.window(), ..Default::default() };
    let mut report = distance_levels(space, a, &t_grid, &params)?;
    if let Some(c) = p.expected_per_t {
        let table = report.tables.iter().find(|t| t.name == "distance_levels").expect("level table").clone();
        let names = &table.columns[1..7];
        for row in &table.rows {
            let t = cell_f64(&row[0]);
            for (k, name) in names.iter().enumerate() {
                let v = cell_f64(&row[k + 1]);
                report.verdict(Verdict::within(
                    format!("{name}@{t}"),
                    "level quantities of d_A equal the level measure",
                    v,
                    c * t,
                    params.tolerance * c * t,
                ));
            }
        }
    }
    Ok(report)
}

fn gauge(space: &SampledSpace, s: &SetIndicator, field: Option<&ScalarField>, p: &Params) -> Result<Report, CliError> {
    let gp = GaugeParams::default();
    let mut report = Report::new("gauge measure");
    let value = if let Some(delta) = p.delta {
        let cover = hausdorff_delta(space, s, delta, &gp)?;
        report.table(cover.to_table(space));
        report.set("delta", delta).set("greedy_cost", cover.greedy_cost).set("exact", cover.exact);
        cover.cost
    } else {
        let est = hausdorff(space, s, &HausdorffParams { deltas: p.deltas.clone(), gauge: gp.clone() })?;
        let drops = est.costs.windows(2).filter(|w| w[1] < w[0]).count();
        report.verdict(Verdict::at_most("costs_monotone", "ℋ^h_δ is nonincreasing in δ", drops as f64, 0.0));
        report.verdict(
            Verdict::at_most("greedy_monotonicity_gap", "raw covers are monotone in δ", est.monotonicity_gap, 0.0)
                .informational(),
        );
        report.table(est.to_table());
        report.set("resolved_delta", est.resolved_delta).set("exact", est.exact_flag);
        est.extrapolated
    };
    expect(&mut report, p, "gauge_value", "ℋ^h(S) matches the reference value", value);
    report.set("hausdorff", value);
    if let Some(f) = field {
        let params = GaugeCoareaParams {
            t_points: p.t_points.unwrap_or(16),
            delta: None,
            tolerance: p.tolerance.unwrap_or(0.05),
            gauge: gp,
        };
        report.absorb("coarea", coarea_inequalities(space, f, &space.full_set(), p.t_grid.clone(), &params)?);
    }
    Ok(report)
}

fn cheeger(space: &SampledSpace, p: &Params) -> Result<Report, CliError> {
    let spec = p.family.as_ref().map(|f| f.to_spec()).unwrap_or_else(FamilySpec::sublevel_sweep);
    let params = CheegerParams { window: p.window(), tolerance: tol(p), ..Default::default() };
    let (mut report, results) = compare_definitions(space, &spec, &params)?;
    for r in &results {
        expect(&mut report, p, &format!("gamma_{}_value", r.definition.name()), "γ matches the reference value", r.gamma);
        report.table(r.to_table());
    }
    Ok(report)
}

fn eq13(space: &SampledSpace, p: &Params) -> Result<Report, CliError> {
    Ok(eq13_gap_demo(space, p.l1_budget.unwrap_or(0.02), p.tolerance.unwrap_or(0.02))?)
}

/// Spaces up to this size get the exhaustive semigroup scan.
const SMALL_SPACE: usize = 12;

/// `T_{s+t}χ ≥ T_s T_t χ` for every singleton and every pair of realized distances.
fn exhaustive_semigroup(space: &SampledSpace, report: &mut Report) -> Result<(), CliError> {
    let n = space.len();
    let mut dists: Vec<f64> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| space.dist(i, j)).filter(|&d| d > 0.0).collect();
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    let mut table = Table::new("semigroup_witnesses", &["point", "s", "t", "x", "sum", "composed"]);
    let (mut violations, mut strict) = (0usize, 0usize);
    for p in 0..n {
        let chi = space.indicator_field(&space.singleton(p));
        for &s in &dists {
            for &t in &dists {
                let sum = sup_semigroup(space, &chi, s + t)?;
                let composed = sup_semigroup(space, &sup_semigroup(space, &chi, t)?, s)?;
                for x in 0..n {
                    let (a, b) = (sum.values()[x], composed.values()[x]);
                    if a < b {
                        violations += 1;
                    }
                    if a > b {
                        strict += 1;
                        table.push(vec![p.into(), s.into(), t.into(), x.into(), a.into(), b.into()]);
                    }
                }
            }
        }
    }
    report.verdict(Verdict::at_most("exhaustive_composition", "T_{s+t} f ≥ T_s(T_t f)", violations as f64, 0.0));
    report.set("strict_witnesses", strict);
    report.table(table);
    Ok(())
}

/// Point about which the default verification set is centered.
fn anchor_point(space: &SampledSpace) -> usize {
    match space.metric() {
        Metric::Grid(_) | Metric::Points { .. } => space.len() / 2,
        _ => 0,
    }
}

/// Exact invariants, plus numeric sandwich checks at `Level::Full`.
pub fn verify(built: &Built, level: Level, seed: u64) -> Result<Report, CliError> {
    let space = &built.space;
    let start = Instant::now();
    let mut report = Report::new(format!("verification ({})", if level == Level::Full { "full" } else { "quick" }));
    let audit = space.audit_triangle(2000, seed);
    report.verdict(Verdict::at_most("triangle_violations", "d is a metric", audit.violations as f64, 0.0));
    if matches!(space.metric(), Metric::Matrix { .. } | Metric::Graph { .. }) && space.len() <= 400 {
        let ok = space.validate_exhaustive().is_ok();
        report.verdict(Verdict::at_least("metric_axioms_exhaustive", "d is a metric", f64::from(u8::from(ok)), 1.0));
    }
    let h = space.resolution_h();
    let diam = space.diameter();
    let c = anchor_point(space);
    let mut seed_marks = vec![false; space.len()];
    seed_marks[c] = true;
    let dc = distance_to_marks(space, &seed_marks);
    let a = space.indicator(dc.iter().map(|&d| d <= 0.25 * diam).collect())?;

    let mut radii = Vec::new();
    let mut r = h;
    while r <= diam && radii.len() < 12 {
        radii.push(r);
        r *= 1.5;
    }
    let masses: Vec<f64> =
        radii.iter().map(|&r| enlarge(space, &a, r).map(|e| space.measure(&e).expect("bound set"))).collect::<Result<_, _>>()?;
    let drops = masses.windows(2).filter(|w| w[1] < w[0]).count();
    report.verdict(Verdict::at_most("profile_monotone", "r ↦ m(A^r) is nondecreasing", drops as f64, 0.0));
    let (s, t) = (2.0 * h, 2.0 * h);
    report.absorb("inclusion", check_semigroup_inclusion(space, &a, s, t)?);
    report.absorb("indicator_ops", check_semigroup_ops(space, &space.indicator_field(&a), s, t)?);
    report.absorb("distance_ops", check_semigroup_ops(space, &space.field(dc.clone())?, s, t)?);
    if matches!(space.metric(), Metric::Matrix { .. } | Metric::Graph { .. }) && space.len() <= SMALL_SPACE {
        exhaustive_semigroup(space, &mut report)?;
    }
    report.set("quick_seconds", start.elapsed().as_secs_f64());

    if level == Level::Full {
        full_checks(space, &mut report)?;
    }
    report.set("space", space.metric().kind_name()).set("points", space.len()).set("resolution_h", h);
    Ok(report)
}

fn full_checks(space: &SampledSpace, report: &mut Report) -> Result<(), CliError> {
    if let Some(fc) = space.fat_cantor() {
        let demo = eq13_gap_demo(space, 0.02, 0.02)?;
        let j_id = demo.summary["identity_value"].as_f64().unwrap_or(f64::NAN);
        let stair = demo.summary["staircase_value"].as_f64().unwrap_or(f64::NAN);
        report.absorb("eq13", demo);
        let lsc = Verdict::at_least(
            "eq13_hypothesis",
            "liminf ∫ sl(f_n) dm ≥ ∫ sl(f) dm (expected to fail on a fat Cantor weight)",
            stair,
            j_id - 0.02,
        );
        report.verdict(lsc.informational());
        report.set("gap_weight", fc.gap_weight);
        return Ok(());
    }
    let kind = space.metric().kind_name();
    let set = match space.grid() {
        Some(g) => {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for axis in 0..g.dims {
                lo[axis] = g.lo[axis];
                hi[axis] = g.lo[axis] + g.spacing[axis] * g.shape[axis] as f64;
            }
            let center: Vec<f64> = (0..3).map(|k| 0.5 * (lo[k] + hi[k])).collect();
            let radius = (0..g.dims).map(|k| hi[k] - lo[k]).fold(f64::INFINITY, f64::min) / 4.0;
            Some(space.indicator_where(|x| (0..3).map(|k| (x[k] - center[k]).powi(2)).sum::<f64>().sqrt() <= radius))
        }
        None if matches!(space.metric(), Metric::Circle { .. }) => {
            let n = space.len();
            Some(space.indicator((0..n).map(|i| i < n / 4).collect())?)
        }
        None => None,
    };
    match set {
        Some(a) => report.absorb("sandwich", perimeter_task(space, &a, &Params::default())?),
        None => {
            report.note(format!("no numeric sandwich check for {kind} spaces"));
        }
    }
    Ok(())
}
