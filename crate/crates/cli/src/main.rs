//! `polytrack` command-line driver.

mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use polytrack_core::engine::{self, Config};
use polytrack_core::eval::{self, Constraint, OperatingPoint, Selection, SweepGrid};
use polytrack_core::gaps::{self, GapMatrix, GapSet, MissRateTensor};
use polytrack_core::sim::{Preset, Scenario};
use polytrack_core::tracker::{self, TrackerConfig, TrackerKind};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "polytrack", version, about = "Tile-level track extraction on synthetic stationary video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario JSON from a preset.
    Simulate(SimulateArgs),
    /// Run the full-frame, every-frame pipeline and write its tracks.
    Reference(ReferenceArgs),
    /// Measure per-tile mistrack rates and derive gap matrices.
    LearnGaps(LearnGapsArgs),
    /// Run every knob combination and record throughput and accuracy.
    Sweep(SweepArgs),
    /// Extract the Pareto frontier of a sweep and pick an operating point.
    Pareto(ParetoArgs),
    /// Run the pipeline with one configuration.
    Extract(ExtractArgs),
    /// Score tracks with HOTA.
    Evaluate(EvaluateArgs),
    /// Print per-tile relevance and polyomino shape statistics.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// highway, intersection or sparse.
    #[arg(long)]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    frames: u32,
    #[arg(long, default_value_t = polytrack_core::sim::DEFAULT_FRAME_W)]
    width: u32,
    #[arg(long, default_value_t = polytrack_core::sim::DEFAULT_FRAME_H)]
    height: u32,
    #[arg(long, default_value_t = polytrack_core::sim::DEFAULT_TILE_SIZE)]
    tile_size: u32,
    /// Output scenario JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// sort or user.
    #[arg(long, default_value = "sort")]
    tracker: TrackerKind,
    /// Output directory; receives tracks.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnGapsArgs {
    /// Training scenario JSON; repeat to pool several videos.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<PathBuf>,
    #[arg(long, default_value = "sort")]
    tracker: TrackerKind,
    /// Candidate gaps, comma-separated; must start with 1.
    #[arg(long, default_value = "1,2,4,8,16")]
    gamma: GapSet,
    /// Output directory; receives tensor-<tracker>.json and gaps-<tracker>-<tolerance>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Validation scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Mistrack tensor JSON; repeat for each tracker. Trackers without one
    /// are measured on the validation scenario.
    #[arg(long = "tensor")]
    tensors: Vec<PathBuf>,
    /// oracle or motion.
    #[arg(long, default_value = "oracle")]
    scorer: engine::ScorerKind,
    /// Output directory; receives sweep.json and frontier.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParetoArgs {
    /// sweep.json written by `sweep`.
    #[arg(long)]
    sweep: PathBuf,
    /// Keep the most accurate point with at least this throughput.
    #[arg(long, conflicts_with = "max_hota_loss")]
    min_fps: Option<f64>,
    /// Keep the fastest point losing at most this fraction of HOTA.
    #[arg(long)]
    max_hota_loss: Option<f64>,
    /// Write the frontier CSV here.
    #[arg(long)]
    frontier: Option<PathBuf>,
    /// Write the selected configuration here, ready for `extract --config`.
    #[arg(long)]
    config_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Gap matrix JSON; one of --gaps or --tensor is required when the config sets M_bar.
    #[arg(long, conflicts_with = "tensor")]
    gaps: Option<PathBuf>,
    /// Mistrack tensor JSON; the gap matrix is derived at the config's M_bar.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Output directory; receives tracks.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Tracks CSV to score.
    #[arg(long)]
    tracks: PathBuf,
    /// Reference tracks CSV.
    #[arg(long, conflicts_with = "ground_truth", required_unless_present = "ground_truth")]
    reference: Option<PathBuf>,
    /// Scenario JSON whose object boxes serve as the reference.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    scenario: PathBuf,
}

/// Sweep output; records its inputs so the file describes itself.
#[derive(Serialize, Deserialize)]
struct SweepFile {
    scenario: PathBuf,
    scenario_seed: u64,
    frames: u32,
    grid: SweepGrid,
    points: Vec<OperatingPoint>,
}

enum Outcome {
    Done,
    Infeasible(String),
}

fn main() -> ExitCode {
    // usage errors exit 1; exit 2 is reserved for infeasible selections
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Reference(a) => reference(a),
        Command::LearnGaps(a) => learn_gaps(a),
        Command::Sweep(a) => sweep(a),
        Command::Pareto(a) => pareto(a),
        Command::Extract(a) => extract(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let s = io::read(path)?;
    Scenario::from_json(&s).with_context(|| format!("invalid scenario {}", path.display()))
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    if a.frames == 0 {
        bail!("--frames must be positive");
    }
    let sc = a.preset.generate_with(a.seed, a.frames, a.width, a.height, a.tile_size)?;
    io::write_json(&a.out, &sc)?;
    Ok(Outcome::Done)
}

fn write_run(dir: &Path, tracks: &[tracker::Track], report: Option<&engine::RunReport>) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    io::write_atomic(&dir.join("tracks.csv"), tracker::tracks_to_csv_string(tracks).as_bytes())?;
    if let Some(r) = report {
        io::write_json(&dir.join("report.json"), r)?;
    }
    Ok(())
}

fn reference(a: ReferenceArgs) -> Result<Outcome> {
    let sc = load_scenario(&a.scenario)?;
    let cfg = Config { tracker: a.tracker, ..Config::default() };
    // the degenerate configuration is the reference pipeline
    let report = engine::run(&sc, &cfg, None)?;
    write_run(&a.out, &report.tracks, Some(&report))?;
    Ok(Outcome::Done)
}

fn learn_gaps(a: LearnGapsArgs) -> Result<Outcome> {
    let mut pooled: Option<MissRateTensor> = None;
    for path in &a.scenarios {
        let sc = load_scenario(path)?;
        let mut t = gaps::learn_from_scenario(&sc, &a.gamma, a.tracker, TrackerConfig::default())?;
        t.sources = vec![format!("{} (seed {}, {} frames)", path.display(), sc.seed, sc.n_frames)];
        match pooled.as_mut() {
            Some(p) => p.merge(&t)?,
            None => pooled = Some(t),
        }
    }
    let tensor = pooled.context("no scenarios given")?;
    std::fs::create_dir_all(&a.out)?;
    io::write_json(&a.out.join(format!("tensor-{}.json", a.tracker)), &tensor)?;
    for m in gaps::sweep_tolerances(&tensor, &gaps::DEFAULT_TOLERANCES) {
        io::write_json(&a.out.join(format!("gaps-{}-{}.json", a.tracker, m.tolerance)), &m)?;
    }
    Ok(Outcome::Done)
}

fn sweep(a: SweepArgs) -> Result<Outcome> {
    let sc = load_scenario(&a.scenario)?;
    let tcfg = TrackerConfig::default();
    let grid = SweepGrid::default();
    let mut tensors: BTreeMap<TrackerKind, MissRateTensor> = BTreeMap::new();
    for p in &a.tensors {
        let t = MissRateTensor::from_json(&io::read(p)?).with_context(|| format!("invalid tensor {}", p.display()))?;
        tensors.insert(t.tracker, t);
    }
    let mut references = BTreeMap::new();
    for &kind in &grid.tracker {
        if !tensors.contains_key(&kind) {
            let gammas = tensors.values().next().map_or_else(GapSet::default, |t| t.gammas.clone());
            tensors.insert(kind, gaps::learn_from_scenario(&sc, &gammas, kind, tcfg)?);
        }
        references.insert(kind, engine::reference_run(&sc, kind, tcfg)?);
    }
    let base = Config { scorer: a.scorer, ..Config::default() };
    let points = eval::sweep(&sc, &grid, &base, &tensors, &references)?;
    std::fs::create_dir_all(&a.out)?;
    let mut csv = Vec::new();
    eval::write_frontier_csv(&eval::pareto(&points), &mut csv)?;
    io::write_atomic(&a.out.join("frontier.csv"), &csv)?;
    let file = SweepFile { scenario: a.scenario, scenario_seed: sc.seed, frames: sc.n_frames, grid, points };
    io::write_json(&a.out.join("sweep.json"), &file)?;
    Ok(Outcome::Done)
}

fn pareto(a: ParetoArgs) -> Result<Outcome> {
    let file: SweepFile = serde_json::from_str(&io::read(&a.sweep)?).context("invalid sweep file")?;
    let front = eval::pareto(&file.points);
    if let Some(p) = &a.frontier {
        let mut csv = Vec::new();
        eval::write_frontier_csv(&front, &mut csv)?;
        io::write_atomic(p, &csv)?;
    }
    let constraint = match (a.min_fps, a.max_hota_loss) {
        (Some(c), None) => Constraint::MinThroughput(c),
        (None, Some(d)) => Constraint::MaxAccuracyLoss(d),
        (None, None) => {
            let mut out = Vec::new();
            eval::write_frontier_csv(&front, &mut out)?;
            print!("{}", String::from_utf8(out)?);
            return Ok(Outcome::Done);
        }
        (Some(_), Some(_)) => unreachable!("clap rejects both constraints"),
    };
    match eval::select(&front, constraint) {
        Selection::Point(p) => {
            if let Some(path) = &a.config_out {
                io::write_json(path, &p.config)?;
            }
            println!("{}", serde_json::to_string_pretty(&p)?);
            Ok(Outcome::Done)
        }
        Selection::Infeasible => Ok(Outcome::Infeasible(format!("no frontier point satisfies {constraint:?}"))),
    }
}

fn extract(a: ExtractArgs) -> Result<Outcome> {
    let sc = load_scenario(&a.scenario)?;
    let cfg = Config::from_json(&io::read(&a.config)?).context("invalid config")?;
    let gaps = match (&a.gaps, &a.tensor, cfg.tolerance) {
        (Some(p), _, _) => Some(GapMatrix::from_json(&io::read(p)?).with_context(|| format!("invalid gaps {}", p.display()))?),
        (None, Some(p), Some(m)) => {
            let t = MissRateTensor::from_json(&io::read(p)?).with_context(|| format!("invalid tensor {}", p.display()))?;
            Some(gaps::derive_gap_matrix(&t, m))
        }
        _ => None,
    };
    let report = engine::run(&sc, &cfg, gaps.as_ref())?;
    write_run(&a.out, &report.tracks, Some(&report))?;
    Ok(Outcome::Done)
}

fn read_tracks(path: &Path) -> Result<Vec<tracker::Track>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    tracker::read_tracks_csv(f).with_context(|| format!("invalid tracks {}", path.display()))
}

fn evaluate(a: EvaluateArgs) -> Result<Outcome> {
    let predicted = read_tracks(&a.tracks)?;
    let reference = match (&a.reference, &a.ground_truth) {
        (Some(r), _) => read_tracks(r)?,
        (None, Some(g)) => eval::ground_truth_tracks(&load_scenario(g)?),
        (None, None) => bail!("need --reference or --ground-truth"),
    };
    let score = eval::hota_interpolated(&predicted, &reference)?;
    println!("{}", serde_json::to_string_pretty(&score)?);
    Ok(Outcome::Done)
}

fn analyze(a: AnalyzeArgs) -> Result<Outcome> {
    let stats = eval::observation_stats(&load_scenario(&a.scenario)?)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(Outcome::Done)
}
