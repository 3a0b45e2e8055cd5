use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use electrosense::acquisition::{build_array, build_forward_operator, AcquisitionSpec};
use electrosense::descriptors::{
    compute_descriptor, match_descriptor, DescriptorSettings, Dictionary, DictionaryConfig, MatchResult,
};
use electrosense::exec::{self, Parallelism};
use electrosense::experiments::{
    run_identification_with, simulate_target, trial_seed, ExperimentPlan, ExperimentRun, Manifest, TargetSpec,
};
use electrosense::forward::{add_noise, MSRDataset};
use electrosense::inversion::reconstruct_pt;
use electrosense::io::{load_json, save_json, write_msr_csv, write_reconstruction_csv, write_report_csv};
use electrosense::{RigidMotion, ShapeId};

#[derive(Parser)]
#[command(
    name = "electrosense",
    version,
    about = "Shape identification from pulse-type electro-sensing data"
)]
struct Cli {
    /// Worker threads (overrides ELECTROSENSE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect a dictionary archive.
    #[command(subcommand)]
    Dict(DictCommand),
    /// Simulate MSR data of a moved dictionary shape at several scales.
    Simulate(SimulateArgs),
    /// Reconstruct the filtered polarization tensor from simulated data.
    Reconstruct(ReconstructArgs),
    /// Rank the dictionary against a target.
    Identify(IdentifyArgs),
    /// Run an experiment plan.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum DictCommand {
    Build(DictBuildArgs),
    Inspect { archive: PathBuf },
}

#[derive(Args)]
struct DictBuildArgs {
    /// Dictionary configuration JSON (a bundled name or a path).
    #[arg(long, default_value = "dictionary.json")]
    config: String,
    #[arg(long)]
    panels: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated scales, e.g. -1,0,1,2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scales: Option<Vec<i32>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TargetArgs {
    /// Dictionary shape to simulate.
    #[arg(long)]
    shape: ShapeId,
    /// Rigid motion `x,y,scale,angle`; defaults to the reference motion.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    motion: Option<Vec<f64>>,
    /// Aperture of the array in radians.
    #[arg(long, default_value_t = std::f64::consts::PI / 16.0)]
    aperture: f64,
    #[arg(long, default_value_t = 50)]
    sources: usize,
    #[arg(long, default_value_t = 512)]
    panels: usize,
    #[arg(long, default_value_t = 5.0)]
    duration: f64,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Noise level as a fraction of the signal RMS (1.0 = 100%).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1,2")]
    scales: Vec<i32>,
    /// Output JSON with one dataset per scale.
    #[arg(long)]
    out: PathBuf,
    /// Also export each scale as CSV into this directory.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory receiving one CSV per scale.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Simulated data bundle; when absent, a target is simulated on the fly.
    #[arg(long, conflicts_with = "shape")]
    data: Option<PathBuf>,
    #[command(flatten)]
    target: Option<TargetArgs>,
    /// Ranking CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Plan JSON (a bundled name or a path).
    #[arg(long, conflicts_with = "replay")]
    plan: Option<String>,
    /// Replays a run from its manifest.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Prebuilt dictionary archive matching the plan.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    aperture: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

/// Reads a bundled file by name, or a file from disk.
fn read_source(name: &str) -> Result<String> {
    let path = Path::new(name);
    if path.exists() {
        return std::fs::read_to_string(path).with_context(|| format!("reading {name}"));
    }
    match electrosense::experiments::bundled(name) {
        Some(text) => Ok(text.to_string()),
        None => Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{name}: no such file or bundled plan"),
        )
        .into()),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(name: &str) -> Result<T> {
    let text = read_source(name)?;
    serde_json::from_str(&text)
        .map_err(electrosense::Error::from)
        .with_context(|| format!("parsing {name}"))
}

fn load_dictionary(path: &Path) -> Result<Dictionary> {
    Dictionary::load(path).with_context(|| format!("loading dictionary {}", path.display()))
}

fn dict_build(args: &DictBuildArgs) -> Result<()> {
    let mut config: DictionaryConfig = parse_json(&args.config)?;
    if let Some(p) = args.panels {
        config.panels = p;
    }
    if let Some(n) = args.samples {
        config.settings.samples = n;
    }
    if let Some(s) = &args.scales {
        config.settings.scales = s.clone();
    }
    config.settings.validate()?;
    let dict = Dictionary::build(&config)?;
    dict.save(&args.out)?;
    println!(
        "wrote {} entries, scales {:?}, fingerprint {}",
        dict.entries.len(),
        dict.settings.scales,
        dict.fingerprint
    );
    Ok(())
}

fn dict_inspect(path: &Path) -> Result<()> {
    let dict = load_dictionary(path)?;
    println!("version      {}", dict.version);
    println!("fingerprint  {}", dict.fingerprint);
    println!("settings     {}", dict.settings_fingerprint);
    println!(
        "pulse        T = {}, N = {}, scales {:?}, {} panels",
        dict.settings.duration, dict.settings.samples, dict.settings.scales, dict.panels
    );
    println!("separation   {:.4e}", dict.separation()?);
    for e in &dict.entries {
        println!(
            "  {:10} sigma = {:<5} eps = {:<5} |I| = {:.4}",
            e.name,
            e.material.sigma,
            e.material.epsilon,
            e.descriptor.norm()
        );
    }
    Ok(())
}

fn target_spec(args: &TargetArgs) -> Result<TargetSpec> {
    let motion = match &args.motion {
        None => RigidMotion::reference_target(),
        Some(v) if v.len() == 4 => RigidMotion::new([v[0], v[1]], v[2], v[3])?,
        Some(v) => bail!("--motion expects x,y,scale,angle, got {} values", v.len()),
    };
    Ok(TargetSpec {
        motion,
        ..TargetSpec::new(args.shape)
    })
}

/// Simulated, noise-contaminated datasets for every scale.
fn simulate_bundle(args: &TargetArgs, scales: &[i32]) -> Result<Vec<MSRDataset>> {
    let target = target_spec(args)?;
    let acquisition = AcquisitionSpec {
        aperture: args.aperture,
        ns: args.sources,
        ..Default::default()
    };
    let data = simulate_target(&target, &acquisition, args.panels, args.duration, args.samples, scales)?;
    data.datasets
        .iter()
        .map(|(&j, clean)| {
            Ok(add_noise(
                clean,
                args.noise,
                trial_seed(args.seed, &target.name, args.noise, 0, j),
            )?)
        })
        .collect()
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let bundle = simulate_bundle(&args.target, &args.scales)?;
    save_json(&bundle, &args.out)?;
    if let Some(dir) = &args.csv_dir {
        std::fs::create_dir_all(dir)?;
        for d in &bundle {
            write_msr_csv(d, &dir.join(format!("msr_j{}.csv", d.scale)))?;
        }
    }
    println!("wrote {} datasets to {}", bundle.len(), args.out.display());
    Ok(())
}

fn reconstruct_bundle(bundle: &[MSRDataset]) -> Result<Vec<electrosense::inversion::ReconstructionResult>> {
    bundle
        .iter()
        .map(|d| {
            let config = build_array(&d.acquisition)?;
            let operator = build_forward_operator(&config, 1)?;
            Ok(reconstruct_pt(d, &operator)?)
        })
        .collect()
}

fn reconstruct(args: &ReconstructArgs) -> Result<()> {
    let bundle: Vec<MSRDataset> = load_json(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    std::fs::create_dir_all(&args.out)?;
    for (d, rec) in bundle.iter().zip(reconstruct_bundle(&bundle)?) {
        let path = args.out.join(format!("reconstruction_j{}.csv", d.scale));
        write_reconstruction_csv(&rec, &path)?;
        println!(
            "scale {:>2}: cond(L) = {:.3e}, max residual {:.3e} -> {}",
            d.scale,
            rec.condition_number,
            rec.residuals.iter().fold(0.0f64, |a, &b| a.max(b)),
            path.display()
        );
    }
    Ok(())
}

fn rank_bundle(bundle: &[MSRDataset], dict: &Dictionary) -> Result<Vec<MatchResult>> {
    let first = bundle.first().context("the data bundle is empty")?;
    let settings = DescriptorSettings {
        duration: first.duration,
        samples: first.samples(),
        scales: dict.settings.scales.clone(),
    };
    let series = bundle
        .iter()
        .zip(reconstruct_bundle(bundle)?)
        .map(|(d, rec)| (d.scale, rec.series))
        .collect();
    let mut descriptor = compute_descriptor(&series, &settings.scales)?;
    descriptor.fingerprint = settings.fingerprint()?;
    Ok(match_descriptor(&descriptor, dict)?)
}

fn identify(args: &IdentifyArgs) -> Result<()> {
    let dict = load_dictionary(&args.dict)?;
    let bundle: Vec<MSRDataset> = match (&args.data, &args.target) {
        (Some(path), _) => load_json(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(t)) => simulate_bundle(t, &dict.settings.computed_scales())?,
        (None, None) => bail!("either --data or --shape is required"),
    };
    let ranking = rank_bundle(&bundle, &dict)?;
    for (i, m) in ranking.iter().enumerate() {
        println!("{:>2}. {:10} {:.6e}", i + 1, m.name, m.distance);
    }
    if let Some(out) = &args.out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["rank", "name", "distance"])?;
        for (i, m) in ranking.iter().enumerate() {
            w.write_record([(i + 1).to_string(), m.name.clone(), format!("{:e}", m.distance)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs) -> Result<()> {
    let mut plan: ExperimentPlan = match (&args.plan, &args.replay) {
        (_, Some(path)) => {
            load_json::<Manifest>(path)
                .with_context(|| format!("reading manifest {}", path.display()))?
                .plan
        }
        (Some(name), None) => parse_json(name)?,
        (None, None) => bail!("either --plan or --replay is required"),
    };
    if let Some(t) = args.trials {
        plan.trials = t;
    }
    if let Some(s) = args.seed {
        plan.seed_base = s;
    }
    if let Some(n) = &args.noise {
        plan.noise_levels = n.clone();
    }
    if let Some(a) = &args.aperture {
        plan.apertures = a.clone();
    }
    plan.validate()?;
    let dict = match &args.dict {
        Some(path) => load_dictionary(path)?,
        None => {
            println!("building dictionary ({} entries)", plan.dictionary.entries.len());
            Dictionary::build(&plan.dictionary)?
        }
    };
    let run: ExperimentRun = run_identification_with(&plan, &dict)?;
    std::fs::create_dir_all(&args.out)?;
    write_report_csv(&run.report, &args.out.join("report.csv"))?;
    save_json(&run, &args.out.join("report.json"))?;
    save_json(&Manifest::new(&plan, &run.report), &args.out.join("manifest.json"))?;
    println!("{} ({:.1} s)", plan.name, run.runtime_seconds);
    for r in &run.report.rows {
        println!(
            "  {:10} rho = {:<6} alpha = {:.4} scales {:?}: {:>3}/{:<3} identified",
            r.target, r.noise_level, r.aperture, r.scales, r.successes, r.trials
        );
    }
    println!("reports written to {}", args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match std::env::var("ELECTROSENSE_THREADS") {
            Ok(v) => Some(
                v.parse()
                    .with_context(|| format!("ELECTROSENSE_THREADS={v} is not a count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            bail!("thread count must be positive");
        }
        exec::init_threads(t);
    }
    if cli.sequential {
        exec::set_parallelism(Parallelism::Sequential);
    }
    match &cli.command {
        Command::Dict(DictCommand::Build(a)) => dict_build(a),
        Command::Dict(DictCommand::Inspect { archive }) => dict_inspect(archive),
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Identify(a) => identify(a),
        Command::Experiment(a) => experiment(a),
    }
}

/// 3 for fingerprint mismatches, 2 for unreadable or malformed input, 1
/// otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<electrosense::Error>() {
            match e {
                electrosense::Error::FingerprintMismatch { .. } => return 3,
                electrosense::Error::Io(_) | electrosense::Error::Json(_) | electrosense::Error::Format(_) => return 2,
                _ => {}
            }
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
