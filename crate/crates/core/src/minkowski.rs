//! Enlargements, measure profiles and Minkowski contents.
//!
//! The liminf/limsup of `(m(A^r) - m(A))/r` are estimated on a geometric radius
//! grid starting at `10h`. Alongside the raw inf/sup of the quotients, the content is
//! extrapolated from the integrated profile
//! `I(r) = Σ_{x ∉ A} w_x (r - d_A(x))⁺ = ∫_0^r (m(A^ρ) - m(A)) dρ`,
//! fitted as `c + αr + βr²/2 + γr³/3`. Integration averages out the lattice noise of
//! the raw counts, `α` absorbs the sub-cell offset of the sampled boundary and `β`
//! is the boundary measure. Fits over sliding sub-windows bracket liminf and limsup.

use serde::Serialize;

use crate::distance::distance_to_marks;
use crate::error::{GeoError, Result};
use crate::fit;
use crate::par;
use crate::report::{Report, Table, Verdict};
use crate::space::{SampledSpace, ScalarField, SetIndicator};

/// Smallest admissible radius in units of the resolution `h`.
pub const FLOOR_MULT: f64 = 5.0;
/// Default window start in units of `h`.
pub const WINDOW_MULT: f64 = 10.0;
/// Ratio of consecutive radii in the default grid.
pub const GRID_RATIO: f64 = 1.189_207_115_002_721; // 2^{1/4}
/// Number of radii in the default window.
pub const GRID_POINTS: usize = 12;
/// Weight of the `h / r_min` resolution term in content bands.
pub const RESOLUTION_BAND: f64 = 0.1;
/// Radii per sub-window fit.
pub const SUB_WINDOW: usize = 9;

/// `d_A` as a scalar field.
pub fn distance_to_set(space: &SampledSpace, a: &SetIndicator) -> Result<ScalarField> {
    space.check(a)?;
    if !a.has_points() {
        return Err(GeoError::EmptySet);
    }
    Ok(space.bind_field(distance_to_marks(space, a.marks())))
}

/// Open enlargement `A^r = {d_A < r}`.
pub fn enlarge(space: &SampledSpace, a: &SetIndicator, r: f64) -> Result<SetIndicator> {
    if !(r > 0.0) {
        return Err(GeoError::NonPositiveRadius(r));
    }
    let d = distance_to_set(space, a)?;
    Ok(space.bind_set(d.values().iter().map(|&x| x < r).collect()))
}

/// Radius window `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub r_min: f64,
    pub r_max: f64,
}

impl Window {
    pub fn new(r_min: f64, r_max: f64) -> Self {
        Window { r_min, r_max }
    }

    /// `[10h, 10h·2^{11/4}]`: twelve radii at ratio `2^{1/4}`.
    pub fn default_for(space: &SampledSpace) -> Self {
        let r_min = WINDOW_MULT * space.resolution_h();
        Window { r_min, r_max: r_min * GRID_RATIO.powi(GRID_POINTS as i32 - 1) * (1.0 + 1e-12) }
    }

    /// Geometric grid from `r_min` with ratio `2^{1/4}`, not exceeding `r_max`.
    pub fn radii(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut r = self.r_min;
        while r <= self.r_max * (1.0 + 1e-12) {
            out.push(r);
            r *= GRID_RATIO;
        }
        out
    }

    fn validate(&self, space: &SampledSpace) -> Result<Vec<f64>> {
        let floor = FLOOR_MULT * space.resolution_h() * (1.0 - 1e-9);
        if self.r_min < floor {
            return Err(GeoError::BelowResolution { scale: self.r_min, floor });
        }
        let radii = self.radii();
        if radii.len() < 3 {
            return Err(GeoError::WindowTooNarrow { r_min: self.r_min, r_max: self.r_max });
        }
        Ok(radii)
    }
}

/// `r ↦ m(A^r)` on a radius grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub r_values: Vec<f64>,
    pub masses: Vec<f64>,
    pub base_mass: f64,
    /// `m(A^r) - m(A)`, summed directly over `A^r \ A`.
    pub increments: Vec<f64>,
    /// `∫_0^r (m(A^ρ) - m(A)) dρ`.
    pub integrated: Vec<f64>,
    /// `max d_A` over the complement: `A^r = X` beyond it.
    pub reach: f64,
}

impl Profile {
    pub fn quotients(&self) -> Vec<f64> {
        self.increments.iter().zip(&self.r_values).map(|(m, r)| m / r).collect()
    }

    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["r", "mass", "quotient"]);
        for ((r, m), q) in self.r_values.iter().zip(&self.masses).zip(self.quotients()) {
            t.push(vec![(*r).into(), (*m).into(), q.into()]);
        }
        t
    }
}

/// Profile from a precomputed distance field; an empty set has the zero profile.
pub fn profile_from_distance(space: &SampledSpace, marks: &[bool], dist: &[f64], radii: &[f64]) -> Profile {
    let w = space.weights();
    let base_mass = space.measure_marks(marks);
    // bucket each outside point by the first radius that captures it
    let mut buckets = vec![(0.0, 0.0); radii.len()];
    let mut reach = 0.0f64;
    for i in 0..w.len() {
        if marks[i] {
            continue;
        }
        let d = dist[i];
        reach = reach.max(d);
        let k = radii.partition_point(|&r| r <= d);
        if k < radii.len() {
            buckets[k].0 += w[i];
            buckets[k].1 += w[i] * d;
        }
    }
    let mut increments = Vec::with_capacity(radii.len());
    let mut integrated = Vec::with_capacity(radii.len());
    let (mut acc, mut acc_d) = (0.0, 0.0);
    for (b, r) in buckets.into_iter().zip(radii) {
        acc += b.0;
        acc_d += b.1;
        increments.push(acc);
        integrated.push((r * acc - acc_d).max(0.0));
    }
    let masses = increments.iter().map(|inc| base_mass + inc).collect();
    Profile { r_values: radii.to_vec(), masses, base_mass, increments, integrated, reach }
}

/// `m(A^r)` for each radius of an increasing grid with radii at least `5h`.
pub fn profile(space: &SampledSpace, a: &SetIndicator, r_grid: &[f64]) -> Result<Profile> {
    space.check(a)?;
    let floor = FLOOR_MULT * space.resolution_h() * (1.0 - 1e-9);
    if let Some(&r) = r_grid.iter().find(|&&r| r < floor) {
        return Err(GeoError::BelowResolution { scale: r, floor });
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GeoError::param("r_grid", "must be strictly increasing"));
    }
    let dist = distance_to_marks(space, a.marks());
    Ok(profile_from_distance(space, a.marks(), &dist, r_grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentKind {
    Lower,
    Upper,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentEstimate {
    pub kind: ContentKind,
    pub window: Window,
    pub profile: Profile,
    pub quotients: Vec<f64>,
    pub inf_quotient: f64,
    pub sup_quotient: f64,
    /// Slope `β` of the quadratic increment fit, clamped at zero: the smallest
    /// over the full window and its sub-windows for lower and relaxed contents,
    /// the largest for upper contents.
    pub extrapolated: f64,
    pub lower_fit: f64,
    pub upper_fit: f64,
    /// Fitted offset `α` of the increments `m(A^r) - m(A)`.
    pub offset: f64,
    pub band: f64,
    /// Least-squares slope of `log q` against `log r`.
    pub log_slope: f64,
    pub diverging: bool,
    /// Part of the window lies beyond the reach of the complement.
    pub truncated: bool,
}

impl ContentEstimate {
    /// The content estimate used downstream.
    pub fn value(&self) -> f64 {
        self.extrapolated
    }

    pub fn to_table(&self, name: &str) -> Table {
        self.profile.to_table(name)
    }
}

/// Least-squares fit of `c + αr + βr²/2 + γr³/3`.
fn integrated_fit(r: &[f64], y: &[f64]) -> Option<fit::LinearFit> {
    let design: Vec<Vec<f64>> = r.iter().map(|&r| vec![1.0, r, r * r / 2.0, r * r * r / 3.0]).collect();
    fit::least_squares(&design, y)
}

/// Builds the estimate from a profile; the kind only labels which raw bound is primary.
pub fn estimate_from_profile(space: &SampledSpace, window: Window, profile: Profile, kind: ContentKind) -> ContentEstimate {
    let quotients = profile.quotients();
    // radii at or beyond the reach see a saturated profile
    let n = profile.r_values.iter().take_while(|&&r| r < profile.reach).count();
    let truncated = n < profile.r_values.len();
    let (r, integrated) = (&profile.r_values[..n], &profile.integrated[..n]);
    let q = &quotients[..n];
    let inf_quotient = q.iter().copied().fold(f64::INFINITY, f64::min);
    let sup_quotient = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (beta, alpha, se) = if n >= 6 {
        integrated_fit(r, integrated).map(|f| (f.coef[2], f.coef[1], f.std_err[2]))
    } else if n >= 3 {
        let design: Vec<Vec<f64>> = r.iter().map(|&r| vec![r, r * r / 2.0]).collect();
        fit::least_squares(&design, integrated).map(|f| (f.coef[1], f.coef[0], f.std_err[1]))
    } else {
        None
    }
    .unwrap_or_else(|| {
        // the complement is thinner than the window: it is absorbed within the reach
        let rest = space.total_mass() - profile.base_mass;
        let beta = if profile.reach > 0.0 && profile.reach.is_finite() { rest / profile.reach } else { 0.0 };
        (beta, 0.0, 0.0)
    });
    // sliding sub-window fits bracket the liminf and limsup
    let (mut lo, mut hi) = (beta, beta);
    if n > SUB_WINDOW {
        for k in 0..=n - SUB_WINDOW {
            let range = k..k + SUB_WINDOW;
            if let Some(f) = integrated_fit(&r[range.clone()], &integrated[range]) {
                lo = lo.min(f.coef[2]);
                hi = hi.max(f.coef[2]);
            }
        }
    }
    let (lower_fit, upper_fit) = (lo.max(0.0), hi.max(0.0));
    let extrapolated = match kind {
        ContentKind::Upper => upper_fit,
        _ => lower_fit,
    };
    let band = 2.0 * se + RESOLUTION_BAND * space.resolution_h() / window.r_min * upper_fit;
    let logs: Vec<(f64, f64)> = r.iter().zip(q).filter(|(_, &q)| q > 0.0).map(|(r, q)| (r.ln(), q.ln())).collect();
    let log_slope = if logs.len() >= 2 {
        let design: Vec<Vec<f64>> = logs.iter().map(|(x, _)| vec![1.0, *x]).collect();
        let y: Vec<f64> = logs.iter().map(|(_, y)| *y).collect();
        fit::least_squares(&design, &y).map(|f| f.coef[1]).unwrap_or(0.0)
    } else {
        0.0
    };
    let q_first = q.first().copied().unwrap_or(0.0);
    let q_last = q.last().copied().unwrap_or(0.0);
    let diverging = log_slope < -0.25 && q_first >= 2.0 * q_last && q_first > 0.0;
    ContentEstimate {
        kind,
        window,
        profile,
        quotients,
        inf_quotient,
        sup_quotient,
        extrapolated,
        lower_fit,
        upper_fit,
        offset: alpha,
        band,
        log_slope,
        diverging,
        truncated,
    }
}

/// Lower or upper Minkowski content over a radius window. An empty set has content 0.
pub fn content(space: &SampledSpace, a: &SetIndicator, window: &Window, kind: ContentKind) -> Result<ContentEstimate> {
    space.check(a)?;
    let radii = window.validate(space)?;
    if window.r_max >= space.diameter() {
        return Err(GeoError::param("window", "r_max must stay below the space diameter"));
    }
    let dist = distance_to_marks(space, a.marks());
    let prof = profile_from_distance(space, a.marks(), &dist, &radii);
    Ok(estimate_from_profile(space, *window, prof, kind))
}

/// Lower and upper contents from a single distance transform.
pub fn content_pair(space: &SampledSpace, marks: &[bool], window: &Window) -> Result<(ContentEstimate, ContentEstimate)> {
    let radii = window.validate(space)?;
    let dist = distance_to_marks(space, marks);
    let prof = profile_from_distance(space, marks, &dist, &radii);
    let lower = estimate_from_profile(space, *window, prof.clone(), ContentKind::Lower);
    let upper = estimate_from_profile(space, *window, prof, ContentKind::Upper);
    Ok((lower, upper))
}

/// Search grid for the relaxed content, in units of `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxedParams {
    pub s_mults: Vec<f64>,
    pub rp_mults: Vec<f64>,
    pub t_levels: Vec<f64>,
    /// `s + r′` may not exceed this multiple of `h`.
    pub max_reach_mult: f64,
    pub l1_budget: Option<f64>,
    /// Whether the constant sequence `A_h = A` belongs to the family.
    pub include_identity: bool,
    pub window: Option<Window>,
}

impl Default for RelaxedParams {
    fn default() -> Self {
        RelaxedParams {
            s_mults: vec![1.0, 2.0, 4.0, 8.0],
            rp_mults: vec![4.0, 8.0, 16.0, 32.0],
            t_levels: vec![1.0, 0.75, 0.5, 0.25],
            max_reach_mult: 48.0,
            l1_budget: None,
            include_identity: true,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxedCandidate {
    /// `None` for `A` itself.
    pub params: Option<(f64, f64, f64)>,
    pub l1_error: f64,
    pub value: f64,
    pub band: f64,
    pub diverging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxedContent {
    pub estimate: ContentEstimate,
    /// `(s, r′, t)` of the minimizing set; `None` when `A` itself wins.
    pub witness: Option<(f64, f64, f64)>,
    #[serde(skip)]
    pub witness_set: SetIndicator,
    pub l1_error: f64,
    pub candidates: Vec<RelaxedCandidate>,
}

/// Recovery function `1 - min(1, d_{A^s}/r′)` from the distance to `A^s`.
pub(crate) fn recovery_values(dist_to_as: &[f64], rp: f64) -> Vec<f64> {
    dist_to_as.iter().map(|&d| 1.0 - (d / rp).min(1.0)).collect()
}

/// `{d_A < s}` for `s > 0`.
pub(crate) fn enlarged_marks(dist_a: &[f64], s: f64) -> Vec<bool> {
    dist_a.iter().map(|&d| d < s).collect()
}

/// Minimum of the lower content over superlevel sets `{f_{s,r′} ≥ t}` of the recovery family.
pub fn relaxed_content(space: &SampledSpace, a: &SetIndicator, params: &RelaxedParams) -> Result<RelaxedContent> {
    space.check(a)?;
    if !a.has_points() {
        return Err(GeoError::EmptySet);
    }
    let m_a = space.measure(a)?;
    if m_a <= 0.0 {
        return Err(GeoError::NullSet);
    }
    let h = space.resolution_h();
    let window = params.window.unwrap_or_else(|| Window::default_for(space));
    window.validate(space)?;
    let dist_a = distance_to_marks(space, a.marks());

    let mut combos = Vec::new();
    for &sm in &params.s_mults {
        for &rm in &params.rp_mults {
            if sm + rm > params.max_reach_mult + 1e-9 {
                continue;
            }
            for &t in &params.t_levels {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(GeoError::param("t_levels", format!("{t} is outside (0, 1]")));
                }
                combos.push((sm * h, rm * h, t));
            }
        }
    }
    let s_values: Vec<f64> = params.s_mults.iter().map(|m| m * h).collect();
    let dist_as: Vec<Vec<f64>> = par::map_slice(&s_values, |&s| distance_to_marks(space, &enlarged_marks(&dist_a, s)));

    let radii = window.radii();
    let evaluate = |marks: &[bool]| {
        let d = distance_to_marks(space, marks);
        let prof = profile_from_distance(space, marks, &d, &radii);
        estimate_from_profile(space, window, prof, ContentKind::Relaxed)
    };
    let rows: Vec<(RelaxedCandidate, Vec<bool>, ContentEstimate)> = par::map_slice(&combos, |&(s, rp, t)| {
        let k = s_values.iter().position(|&x| x == s).expect("s on grid");
        let f = recovery_values(&dist_as[k], rp);
        let marks: Vec<bool> = f.iter().map(|&v| v >= t).collect();
        let l1 = par::ordered_sum(
            space.weights().iter().zip(&marks).zip(a.marks()).filter(|((_, &x), &y)| x != y).map(|((w, _), _)| *w),
        );
        let est = evaluate(&marks);
        let cand = RelaxedCandidate {
            params: Some((s, rp, t)),
            l1_error: l1,
            value: est.value(),
            band: est.band,
            diverging: est.diverging,
        };
        (cand, marks, est)
    });
    let mut all: Vec<(RelaxedCandidate, Vec<bool>, ContentEstimate)> = Vec::new();
    if params.include_identity {
        let est = evaluate(a.marks());
        let cand = RelaxedCandidate { params: None, l1_error: 0.0, value: est.value(), band: est.band, diverging: est.diverging };
        all.push((cand, a.marks().to_vec(), est));
    }
    all.extend(rows);
    let budget = params.l1_budget.unwrap_or(f64::INFINITY);
    let mut best: Option<usize> = None;
    for (k, (c, _, _)) in all.iter().enumerate() {
        if c.l1_error > budget {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let cb = &all[b].0;
                // ties go to the larger s (the identity counts as s = 0)
                let s_of = |c: &RelaxedCandidate| c.params.map(|p| p.0).unwrap_or(0.0);
                if c.value < cb.value || (c.value == cb.value && s_of(c) > s_of(cb)) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.ok_or_else(|| GeoError::EmptyFamily(format!("no recovery set within L1 budget {budget}")))?;
    let candidates: Vec<RelaxedCandidate> = all.iter().map(|x| x.0.clone()).collect();
    let (cand, marks, mut estimate) = all.swap_remove(best);
    estimate.kind = ContentKind::Relaxed;
    Ok(RelaxedContent { estimate, witness: cand.params, witness_set: space.bind_set(marks), l1_error: cand.l1_error, candidates })
}

/// Checks `(A^s)^t ⊆ A^{s+t}` pointwise.
pub fn check_semigroup_inclusion(space: &SampledSpace, a: &SetIndicator, s: f64, t: f64) -> Result<Report> {
    space.check(a)?;
    if !(s > 0.0 && t > 0.0) {
        return Err(GeoError::param("s, t", "radii must be positive"));
    }
    let dist_a = distance_to_marks(space, a.marks());
    let a_s = enlarged_marks(&dist_a, s);
    let a_st: Vec<bool> = distance_to_marks(space, &a_s).iter().map(|&d| d < t).collect();
    let a_sum = enlarged_marks(&dist_a, s + t);
    let violations = a_st.iter().zip(&a_sum).filter(|(&x, &y)| x && !y).count();
    let strict = a_st.iter().zip(&a_sum).filter(|(&x, &y)| !x && y).count();
    let mut report = Report::new("enlargement semigroup inclusion");
    report.verdict(Verdict::at_most(
        "inclusion_violations",
        "(A^s)^t ⊆ A^(s+t) by the triangle inequality",
        violations as f64,
        0.0,
    ));
    report.set("s", s).set("t", t).set("strict_points", strict).set("violations", violations);
    report.set("mass_iterated", space.measure_marks(&a_st)).set("mass_direct", space.measure_marks(&a_sum));
    Ok(report)
}

/// Telescoping lower bound behind the inequality `M_-(A) ≥ relaxed M_+(A)`.
///
/// For each window radius `r` and the uniform subdivision `s_i = i·r/n`,
/// `(m(A^r) - m(A))/r ≥ (1/n) Σ_i (m((A^{s_i})^{r/n}) - m(A^{s_i}))/(r/n)`
/// must hold exactly (up to floating point), since `(A^{s_i})^{r/n} ⊆ A^{s_{i+1}}`.
pub fn check_lower_bound_chain(space: &SampledSpace, a: &SetIndicator, window: &Window, steps: usize) -> Result<Report> {
    space.check(a)?;
    if !a.has_points() {
        return Err(GeoError::EmptySet);
    }
    if steps == 0 {
        return Err(GeoError::param("steps", "must be positive"));
    }
    let radii = window.validate(space)?;
    let dist_a = distance_to_marks(space, a.marks());
    let m_a = space.measure_marks(a.marks());
    let tol = 1e-12 * space.total_mass().max(1.0);
    let rows = par::map_slice(&radii, |&r| {
        let ds = r / steps as f64;
        let lhs = (space.measure_marks(&enlarged_marks(&dist_a, r)) - m_a) / r;
        let mut acc = 0.0;
        for i in 0..steps {
            let base: Vec<bool> = if i == 0 { a.marks().to_vec() } else { enlarged_marks(&dist_a, i as f64 * ds) };
            let grown: Vec<bool> = distance_to_marks(space, &base).iter().map(|&d| d < ds).collect();
            acc += (space.measure_marks(&grown) - space.measure_marks(&base)) / ds;
        }
        (r, lhs, acc / steps as f64)
    });
    let mut table = Table::new("lower_bound_chain", &["r", "quotient", "averaged_quotient", "slack"]);
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for &(r, lhs, rhs) in &rows {
        let slack = lhs - rhs;
        worst = worst.min(slack + tol / r);
        if slack < -tol / r {
            violations += 1;
        }
        table.push(vec![r.into(), lhs.into(), rhs.into(), slack.into()]);
    }
    let mut report = Report::new("lower content bound chain");
    report.verdict(Verdict::at_most(
        "chain_violations",
        "(m(A^r)-m(A))/r ≥ mean over s<r of the quotients of A^s",
        violations as f64,
        0.0,
    ));
    report.set("worst_slack", worst).set("steps", steps);
    report.table(table);
    Ok(report)
}
