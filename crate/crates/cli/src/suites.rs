//! Named repro suites: fixed experiment lists written to `<out>/<suite>/<entry>/`.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::time::Instant;

use mmsgeo::par;
use serde::Serialize;

use crate::config::{ExperimentConfig, FamilyConfig, FieldSpec, Level, Params, SetSpec, SpaceSpec, Task};
use crate::{tasks, write_record, CliError, RunRecord};

/// Suite names with a one-line description; `all` runs the others in order.
pub const SUITES: [(&str, &str); 7] = [
    ("semigroup", "exact invariants and the sub-semigroup witness on generated spaces"),
    ("disk", "perimeter sandwich, lower-bound chain, coarea and distance levels around the unit disk"),
    ("fat-cantor", "failure of lower semicontinuity of the slope integral on a weighted interval"),
    ("countable", "infinite Minkowski content of {1/k} ∪ {0}"),
    ("gauge", "gauge measure of a segment and a point, and the gauge coarea inequalities"),
    ("cheeger", "Cheeger constants of the interval and the circle under three definitions"),
    ("all", "every suite above"),
];

fn cfg(task: Task, space: SpaceSpec, set: Option<SetSpec>, field: Option<FieldSpec>, params: Params) -> ExperimentConfig {
    ExperimentConfig { task, seed: 0, output: None, space: Some(space), set, field, params }
}

fn grid(dims: usize, n: usize, lo: f64, hi: f64) -> SpaceSpec {
    SpaceSpec::Grid { dims, n, bounds: vec![[lo, hi]; dims], density: 1.0 }
}

fn short(spec: &str) -> SpaceSpec {
    SpaceSpec::from_short(spec).expect("built-in space spec")
}

fn verify(space: &str) -> ExperimentConfig {
    cfg(Task::Verify, short(space), None, None, Params { level: Some(Level::Quick), ..Default::default() })
}

fn unit_disk() -> Option<SetSpec> {
    Some(SetSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 })
}

/// Entries of one suite, in run order.
pub fn entries(suite: &str) -> Result<Vec<(String, ExperimentConfig)>, CliError> {
    let named = |v: Vec<(&str, ExperimentConfig)>| v.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
    Ok(match suite {
        "semigroup" => named(vec![
            ("three_point", verify("three-point")),
            ("interval", verify("interval:1001")),
            ("square", verify("square:128")),
            ("disk_box", verify("disk-box:256")),
            ("circle", verify("circle:1000")),
            ("fat_cantor", verify("fat-cantor:4001")),
        ]),
        "disk" => {
            let disk = grid(2, 512, -2.0, 2.0);
            let chain = |space: SpaceSpec, set: SetSpec| cfg(Task::Minkowski, space, Some(set), None, Params::default());
            named(vec![
                (
                    "perimeter",
                    cfg(
                        Task::Perimeter,
                        disk.clone(),
                        unit_disk(),
                        None,
                        Params { expected: Some(TAU), tolerance: Some(0.03), ..Default::default() },
                    ),
                ),
                ("chain_disk", chain(disk.clone(), unit_disk().expect("disk"))),
                ("chain_interval", chain(short("interval:2001"), SetSpec::Box { lo: vec![0.3], hi: vec![0.7] })),
                ("chain_arc", chain(short("circle:2000"), SetSpec::Indices { indices: (0..637).collect() })),
                (
                    "coarea",
                    cfg(
                        Task::Coarea,
                        disk.clone(),
                        None,
                        Some(FieldSpec::Cone { center: vec![0.0, 0.0], radius: 1.0 }),
                        Params { expected: Some(PI), tolerance: Some(0.03), ..Default::default() },
                    ),
                ),
                (
                    "distance_levels",
                    cfg(
                        Task::DistanceLevels,
                        disk,
                        Some(SetSpec::Nearest { points: vec![vec![0.0, 0.0]] }),
                        None,
                        Params {
                            t_grid: Some(vec![0.5, 1.0, 1.5]),
                            expected_per_t: Some(TAU),
                            tolerance: Some(0.04),
                            ..Default::default()
                        },
                    ),
                ),
                (
                    "descent_interval",
                    cfg(
                        Task::Perimeter,
                        short("interval:1001"),
                        Some(SetSpec::Box { lo: vec![0.4], hi: vec![0.6] }),
                        None,
                        Params { expected: Some(2.0), descent: Some(true), ..Default::default() },
                    ),
                ),
            ])
        }
        "fat-cantor" => named(vec![
            ("eq13", cfg(Task::Eq13Gap, short("fat-cantor:4001"), None, None, Params::default())),
            (
                "verify_full",
                cfg(
                    Task::Verify,
                    short("fat-cantor:4001"),
                    None,
                    None,
                    Params { level: Some(Level::Full), ..Default::default() },
                ),
            ),
        ]),
        "countable" => named(vec![(
            "inverse_integers",
            cfg(
                Task::Minkowski,
                grid(1, 200001, 0.0, 1.0),
                Some(SetSpec::Countable { terms: 2000 }),
                None,
                Params { window: Some([1e-4, 1e-2]), diverging: Some(true), steps: Some(4), ..Default::default() },
            ),
        )]),
        "gauge" => named(vec![
            (
                "segment",
                cfg(
                    Task::Hausdorff,
                    grid(2, 256, 0.0, 1.0),
                    Some(SetSpec::Slice { axis: 1, at: 0.5 }),
                    None,
                    Params { delta: Some(0.05), expected: Some(PI / 4.0), tolerance: Some(0.05), ..Default::default() },
                ),
            ),
            (
                "point",
                cfg(
                    Task::Hausdorff,
                    short("interval:1001"),
                    Some(SetSpec::Nearest { points: vec![vec![0.5]] }),
                    None,
                    Params { expected: Some(1.0), tolerance: Some(0.05), ..Default::default() },
                ),
            ),
            (
                "coarea_coordinate",
                cfg(
                    Task::Hausdorff,
                    grid(2, 96, 0.0, 1.0),
                    Some(SetSpec::Slice { axis: 0, at: 0.5 }),
                    Some(FieldSpec::Coordinate { axis: 0 }),
                    Params { t_points: Some(8), tolerance: Some(0.05), ..Default::default() },
                ),
            ),
        ]),
        "cheeger" => named(vec![
            (
                "interval",
                cfg(
                    Task::Cheeger,
                    grid(1, 1000, 0.0, 1.0),
                    None,
                    None,
                    Params {
                        family: Some(FamilyConfig::SublevelSweep { seeds: vec![0], levels: 16 }),
                        expected: Some(2.0),
                        tolerance: Some(0.03),
                        ..Default::default()
                    },
                ),
            ),
            (
                "circle",
                cfg(
                    Task::Cheeger,
                    SpaceSpec::Circle { n: 1024, circumference: TAU },
                    None,
                    None,
                    Params {
                        family: Some(FamilyConfig::BallSweep { center_stride: 256, radius_points: 8 }),
                        expected: Some(2.0 / PI),
                        tolerance: Some(0.03),
                        ..Default::default()
                    },
                ),
            ),
        ]),
        "all" => {
            let mut out = Vec::new();
            for (name, _) in SUITES.iter().filter(|(n, _)| *n != "all") {
                out.extend(entries(name)?.into_iter().map(|(e, c)| (format!("{name}/{e}"), c)));
            }
            out
        }
        other => {
            let known: Vec<&str> = SUITES.iter().map(|s| s.0).collect();
            return Err(CliError::Config(format!("unknown suite `{other}`; known: {}", known.join(", "))));
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub entries: Vec<(String, bool, f64)>,
    pub passed: bool,
}

/// Runs every entry of `suite` with `seed`, one subdirectory per entry.
pub fn run_suite(suite: &str, out: &Path, workers: Option<usize>, seed: u64) -> Result<(SuiteOutcome, Vec<RunRecord>), CliError> {
    let list = entries(suite)?;
    for (_, c) in &list {
        c.params.validate()?;
    }
    let root = if suite == "all" { out.to_path_buf() } else { out.join(suite) };
    let mut outcome = SuiteOutcome { suite: suite.to_string(), entries: Vec::new(), passed: true };
    let mut records = Vec::new();
    for (name, mut c) in list {
        c.seed = seed;
        let start = Instant::now();
        let report = par::with_workers(workers, || tasks::execute(&c))?;
        let record = write_record(&c, &report, &root.join(&name), workers, start.elapsed().as_secs_f64())?;
        outcome.passed &= record.passed;
        outcome.entries.push((name, record.passed, record.wall_time_s));
        records.push(record);
    }
    std::fs::write(root.join("suite.json"), serde_json::to_string_pretty(&outcome).expect("outcome serializes") + "\n")?;
    Ok((outcome, records))
}
