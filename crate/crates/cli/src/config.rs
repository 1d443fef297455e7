//! Experiment configuration: TOML with a task, a space, optional set and field
//! sections and task parameters. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mmsgeo::cheeger::FamilySpec;
use mmsgeo::distance::distance_to_marks;
use mmsgeo::minkowski::Window;
use mmsgeo::space::{Density, SampledSpace, ScalarField, SetIndicator};
use mmsgeo::table::{import_space, ImportedSpace};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Minkowski,
    Perimeter,
    Coarea,
    DistanceLevels,
    Hausdorff,
    Cheeger,
    Eq13Gap,
    Verify,
    Repro,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Minkowski => "minkowski",
            Task::Perimeter => "perimeter",
            Task::Coarea => "coarea",
            Task::DistanceLevels => "distance-levels",
            Task::Hausdorff => "hausdorff",
            Task::Cheeger => "cheeger",
            Task::Eq13Gap => "eq13-gap",
            Task::Verify => "verify",
            Task::Repro => "repro",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub space: Option<SpaceSpec>,
    pub set: Option<SetSpec>,
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    /// Uniform grid on a box with constant density.
    Grid {
        dims: usize,
        n: usize,
        bounds: Vec<[f64; 2]>,
        #[serde(default = "one")]
        density: f64,
    },
    FatCantor {
        n: usize,
        depth: usize,
        k_mass: f64,
        #[serde(default = "half")]
        gap_weight: f64,
    },
    Circle {
        n: usize,
        circumference: f64,
    },
    /// Finite subset of the real line with unit weights unless given.
    Line {
        points: Vec<f64>,
        weights: Option<Vec<f64>>,
    },
    Explicit {
        matrix: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Flat text table written by `export_space`.
    Table {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// Closed Euclidean ball in coordinates.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Closed metric ball about the sample nearest to `center`.
    MetricBall {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Samples nearest to the listed coordinates.
    Nearest {
        points: Vec<Vec<f64>>,
    },
    Indices {
        indices: Vec<usize>,
    },
    /// Samples nearest to `1/k`, `k = 1..=terms`, and to `0` on a line.
    Countable {
        terms: usize,
    },
    /// Samples whose coordinate on `axis` equals that of the sample nearest to `at`.
    Slice {
        axis: usize,
        at: f64,
    },
    /// A `set:NAME` column of a table space.
    Column {
        name: String,
    },
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Coordinate {
        axis: usize,
    },
    /// `(1 - |x - center| / radius)⁺`.
    Cone {
        center: Vec<f64>,
        radius: f64,
    },
    /// Distance to the configured set.
    Distance,
    /// A `field:NAME` column of a table space.
    Column {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    BallSweep {
        #[serde(default = "stride")]
        center_stride: usize,
        #[serde(default = "radius_points")]
        radius_points: usize,
    },
    SublevelSweep {
        #[serde(default)]
        seeds: Vec<usize>,
        #[serde(default = "levels")]
        levels: usize,
    },
    Exhaustive,
}

fn stride() -> usize {
    1
}

fn radius_points() -> usize {
    16
}

fn levels() -> usize {
    32
}

impl FamilyConfig {
    pub fn to_spec(&self) -> FamilySpec {
        match self {
            FamilyConfig::BallSweep { center_stride, radius_points } => {
                FamilySpec::BallSweep { center_stride: *center_stride, radius_points: *radius_points }
            }
            FamilyConfig::SublevelSweep { seeds, levels } => FamilySpec::SublevelSweep { seeds: seeds.clone(), levels: *levels },
            FamilyConfig::Exhaustive => FamilySpec::Exhaustive,
        }
    }
}

/// Task parameters; each task reads the keys it understands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub tolerance: Option<f64>,
    /// Target value of the headline quantity.
    pub expected: Option<f64>,
    /// Distance levels: target of each quantity divided by `t`.
    pub expected_per_t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub t_points: Option<usize>,
    pub window: Option<[f64; 2]>,
    pub l1_budget: Option<f64>,
    pub delta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub family: Option<FamilyConfig>,
    pub suite: Option<String>,
    pub level: Option<Level>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub steps: Option<usize>,
    pub relaxed: Option<bool>,
    /// Minkowski: the boundary is expected to have infinite content.
    pub diverging: Option<bool>,
    pub descent: Option<bool>,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
}

impl Params {
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Config(format!("params.{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("tolerance", self.tolerance)?;
        positive("delta", self.delta)?;
        positive("s", self.s)?;
        positive("t", self.t)?;
        positive("lambda", self.lambda)?;
        if let Some(b) = self.l1_budget {
            if !(b >= 0.0) {
                return Err(CliError::Config(format!("params.l1_budget must be nonnegative, got {b}")));
            }
        }
        for (name, grid) in [("t_grid", &self.t_grid), ("deltas", &self.deltas)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(CliError::Config(format!("params.{name} must be nonempty")));
                }
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Config(format!("params.{name} must be finite")));
                }
            }
        }
        for (name, v) in [("t_points", self.t_points), ("steps", self.steps), ("iterations", self.iterations)] {
            if v == Some(0) {
                return Err(CliError::Config(format!("params.{name} must be at least 1")));
            }
        }
        if let Some([a, b]) = self.window {
            if !(a > 0.0 && b > a) {
                return Err(CliError::Config(format!("params.window must satisfy 0 < r_min < r_max, got [{a}, {b}]")));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> Option<Window> {
        self.window.map(|[a, b]| Window::new(a, b))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.params.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// A built space with any table columns it carried.
pub struct Built {
    pub space: SampledSpace,
    pub imported: Option<ImportedSpace>,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<Built, CliError> {
        let space = match self {
            SpaceSpec::Grid { dims, n, bounds, density } => {
                let density = if *density == 1.0 { Density::Unit } else { Density::Constant(*density) };
                SampledSpace::grid_box(*dims, *n, bounds.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>().as_slice(), &density)?
            }
            SpaceSpec::FatCantor { n, depth, k_mass, gap_weight } => {
                SampledSpace::fat_cantor_interval_weighted(*n, *depth, *k_mass, *gap_weight)?
            }
            SpaceSpec::Circle { n, circumference } => SampledSpace::circle(*n, *circumference)?,
            SpaceSpec::Line { points, weights } => {
                let m: Vec<Vec<f64>> = points.iter().map(|a| points.iter().map(|b| (a - b).abs()).collect()).collect();
                SampledSpace::explicit(&m, weights.clone().unwrap_or_else(|| vec![1.0; points.len()]))?
            }
            SpaceSpec::Explicit { matrix, weights } => SampledSpace::explicit(matrix, weights.clone())?,
            SpaceSpec::Table { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let imported = import_space(&text)?;
                return Ok(Built { space: imported.space.clone(), imported: Some(imported) });
            }
        };
        Ok(Built { space, imported: None })
    }

    /// Short names accepted by `verify --space`: `three-point`, `interval[:n]`,
    /// `square[:n]`, `disk-box[:n]`, `circle[:n]`, `fat-cantor[:n]`, or a TOML file
    /// holding a `[space]` section.
    pub fn from_short(spec: &str) -> Result<Self, CliError> {
        let (name, arg) = spec.split_once(':').map_or((spec, None), |(a, b)| (a, Some(b)));
        let n = |default: usize| -> Result<usize, CliError> {
            arg.map_or(Ok(default), |a| a.parse().map_err(|_| CliError::Config(format!("bad size in space spec `{spec}`"))))
        };
        Ok(match name {
            "three-point" => SpaceSpec::Line { points: vec![0.0, 2.0, 3.0], weights: None },
            "interval" => SpaceSpec::Grid { dims: 1, n: n(1001)?, bounds: vec![[0.0, 1.0]], density: 1.0 },
            "square" => SpaceSpec::Grid { dims: 2, n: n(128)?, bounds: vec![[0.0, 1.0], [0.0, 1.0]], density: 1.0 },
            "disk-box" => SpaceSpec::Grid { dims: 2, n: n(256)?, bounds: vec![[-2.0, 2.0], [-2.0, 2.0]], density: 1.0 },
            "circle" => SpaceSpec::Circle { n: n(1000)?, circumference: std::f64::consts::TAU },
            "fat-cantor" => SpaceSpec::FatCantor { n: n(4001)?, depth: 6, k_mass: 0.5, gap_weight: 0.5 },
            _ => {
                #[derive(Deserialize)]
                struct Only {
                    space: SpaceSpec,
                }
                let path = Path::new(spec);
                if !path.exists() {
                    return Err(CliError::Config(format!("unknown space spec `{spec}`")));
                }
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let only: Only = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                only.space
            }
        })
    }
}

fn point3(v: &[f64], what: &str) -> Result<[f64; 3], CliError> {
    if v.is_empty() || v.len() > 3 {
        return Err(CliError::Config(format!("{what} needs 1 to 3 coordinates")));
    }
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(v);
    Ok(p)
}

fn euclid(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn nearest(space: &SampledSpace, p: &[f64; 3]) -> Result<usize, CliError> {
    space.nearest_point(p).ok_or_else(|| CliError::Config("nearest-point sets need a space with coordinates".into()))
}

impl SetSpec {
    pub fn build(&self, built: &Built) -> Result<SetIndicator, CliError> {
        let space = &built.space;
        Ok(match self {
            SetSpec::Ball { center, radius } => {
                let c = point3(center, "set.center")?;
                space.indicator_where(|x| euclid(x, &c) <= *radius)
            }
            SetSpec::MetricBall { center, radius } => {
                let c = nearest(space, &point3(center, "set.center")?)?;
                space.indicator((0..space.len()).map(|j| space.dist(c, j) <= *radius).collect())?
            }
            SetSpec::Box { lo, hi } => {
                let (lo, hi) = (point3(lo, "set.lo")?, point3(hi, "set.hi")?);
                space.indicator_where(|x| (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a]))
            }
            SetSpec::Nearest { points } => {
                let mut s = space.empty_set();
                for p in points {
                    s.set(nearest(space, &point3(p, "set.points")?)?, true);
                }
                s
            }
            SetSpec::Indices { indices } => {
                let mut s = space.empty_set();
                for &i in indices {
                    if i >= space.len() {
                        return Err(CliError::Config(format!("set index {i} out of range")));
                    }
                    s.set(i, true);
                }
                s
            }
            SetSpec::Countable { terms } => {
                let mut s = space.empty_set();
                s.set(nearest(space, &[0.0; 3])?, true);
                for k in 1..=*terms {
                    s.set(nearest(space, &[1.0 / k as f64, 0.0, 0.0])?, true);
                }
                s
            }
            SetSpec::Slice { axis, at } => {
                if *axis > 2 {
                    return Err(CliError::Config("set.axis must be 0, 1 or 2".into()));
                }
                let mut p = [0.0; 3];
                p[*axis] = *at;
                let i = nearest(space, &p)?;
                let v = space.coords(i).expect("nearest point has coordinates")[*axis];
                space.indicator_where(|x| x[*axis] == v)
            }
            SetSpec::Column { name } => column(built, name, true)?.0.expect("set column"),
            SetSpec::All => space.full_set(),
        })
    }
}

fn column(built: &Built, name: &str, set: bool) -> Result<(Option<SetIndicator>, Option<ScalarField>), CliError> {
    let imported = built.imported.as_ref().ok_or_else(|| CliError::Config("column references need a table space".into()))?;
    if set {
        let s =
            imported.sets.iter().find(|(n, _)| n == name).ok_or_else(|| CliError::Config(format!("no set column `{name}`")))?;
        Ok((Some(s.1.clone()), None))
    } else {
        let f = imported
            .fields
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| CliError::Config(format!("no field column `{name}`")))?;
        Ok((None, Some(f.1.clone())))
    }
}

impl FieldSpec {
    pub fn build(&self, built: &Built, set: Option<&SetIndicator>) -> Result<ScalarField, CliError> {
        let space = &built.space;
        Ok(match self {
            FieldSpec::Coordinate { axis } => {
                if *axis > 2 {
                    return Err(CliError::Config("field.axis must be 0, 1 or 2".into()));
                }
                space.field_from(|x| x[*axis])?
            }
            FieldSpec::Cone { center, radius } => {
                let c = point3(center, "field.center")?;
                if !(*radius > 0.0) {
                    return Err(CliError::Config("field.radius must be positive".into()));
                }
                space.field_from(|x| (1.0 - euclid(x, &c) / radius).max(0.0))?
            }
            FieldSpec::Distance => {
                let a = set.ok_or_else(|| CliError::Config("a distance field needs a [set] section".into()))?;
                space.field(distance_to_marks(space, a.marks()))?
            }
            FieldSpec::Column { name } => column(built, name, false)?.1.expect("field column"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let ok = ExperimentConfig::parse(
            "task = \"perimeter\"\n[space]\nkind = \"grid\"\ndims = 1\nn = 101\nbounds = [[0.0, 1.0]]\n[set]\nshape = \"box\"\nlo = [0.2]\nhi = [0.6]\n",
        )
        .unwrap();
        assert_eq!(ok.task, Task::Perimeter);
        let built = ok.space.as_ref().unwrap().build().unwrap();
        assert_eq!(ok.set.unwrap().build(&built).unwrap().count(), 41);

        let neg = ExperimentConfig::parse("task = \"minkowski\"\n[params]\ntolerance = -1.0\n");
        assert!(matches!(neg, Err(CliError::Config(_))));
        let unknown = ExperimentConfig::parse("task = \"minkowski\"\nbogus = 1\n").unwrap_err().to_string();
        assert!(unknown.contains("line 2"), "{unknown}");
        let nested =
            ExperimentConfig::parse("task = \"minkowski\"\n[space]\nkind = \"circle\"\nn = 10\ncircumference = 1.0\nextra = 2\n");
        assert!(nested.is_err());
    }

    #[test]
    fn short_specs() {
        assert!(matches!(SpaceSpec::from_short("three-point").unwrap(), SpaceSpec::Line { .. }));
        assert!(matches!(SpaceSpec::from_short("square:64").unwrap(), SpaceSpec::Grid { n: 64, .. }));
        assert!(SpaceSpec::from_short("nowhere").is_err());
    }
}
