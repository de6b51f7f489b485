use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gait_entropy::config::RunConfig;
use gait_entropy::entropy::{EntropyConfig, ToleranceRule, Variant};
use gait_entropy::error::{Error, Result};
use gait_entropy::ingest::load_trial;
use gait_entropy::pipeline::{self, LoadedTrial, OutputFile, ProfileFilter};
use gait_entropy::synth::{self, SessionSpec};
use gait_entropy::{Axis, CameraView, Condition, JointGroup};

const OUT_DIR_ENV: &str = "GAIT_ENTROPY_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "gait-entropy",
    version,
    about = "Per-joint sample entropy gait profiles"
)]
struct Cli {
    /// Worker threads; 1 runs sequentially. Output bytes do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every trial in a session directory against the quality gate.
    Validate {
        dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Trial-level entropy profile for one manifest, or every trial in a directory.
    Analyze {
        path: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Condition profiles per subject × condition × camera.
    Profile {
        dir: PathBuf,
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        condition: Option<Condition>,
        #[arg(long)]
        camera: Option<CameraView>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Per-joint change from profile A to profile B.
    Compare {
        profile_a: PathBuf,
        profile_b: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Star-glyph SVG overlaying condition profiles of one subject and camera.
    Glyph {
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
        /// Output file; defaults to glyph_<subject>_<camera>.svg in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out_dir: OutDir,
    },
    /// Write a seeded synthetic session.
    Synth {
        #[arg(long, default_value_t = 3)]
        subjects: usize,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "sagittal")]
        camera: CameraView,
        #[arg(long, default_value_t = synth::DEFAULT_DURATION_S)]
        duration_s: f64,
        #[arg(long, default_value_t = gait_entropy::domain::DEFAULT_FPS)]
        fps: f64,
        /// Fraction of samples per joint marked not_tracked.
        #[arg(long, default_value_t = 0.0)]
        dropout_rate: f64,
        #[arg(long, default_value_t = 3)]
        dropout_max_run: usize,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct OutDir {
    /// Directory for output files; without it results go to stdout.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Start from the configuration embedded in a previous output file.
    #[arg(long)]
    config_from: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    /// Relative tolerance factor (times the series SD).
    #[arg(long, conflicts_with = "r_abs")]
    r: Option<f64>,
    /// Absolute tolerance in metres.
    #[arg(long)]
    r_abs: Option<f64>,
    /// sampen or sampen_detrended:<odd window>
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    min_length: Option<usize>,
    /// main5, left5, right5 or all15
    #[arg(long)]
    joints: Option<JointGroup>,
    #[arg(long)]
    axis: Option<Axis>,
    #[arg(long)]
    max_gap: Option<usize>,
    #[arg(long)]
    buffer_s: Option<f64>,
    #[arg(long)]
    min_segment_s: Option<f64>,
    /// Largest untracked fraction accepted per joint.
    #[arg(long)]
    gate: Option<f64>,
    #[arg(long)]
    k_sd: Option<f64>,
    #[arg(long)]
    scale_max: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config_from {
            Some(path) => RunConfig::from_output_file(path)?,
            None => RunConfig::default(),
        };
        let entropy: &mut EntropyConfig<f64> = &mut cfg.entropy;
        if let Some(m) = self.m {
            entropy.m = m;
        }
        if let Some(r) = self.r {
            entropy.tolerance = ToleranceRule::Relative(r);
        }
        if let Some(r) = self.r_abs {
            entropy.tolerance = ToleranceRule::Absolute(r);
        }
        if let Some(v) = self.variant {
            entropy.variant = v;
        }
        if let Some(n) = self.min_length {
            entropy.min_length = n;
        }
        if let Some(j) = self.joints {
            cfg.joints = j;
        }
        if let Some(a) = self.axis {
            cfg.axis = a;
        }
        if let Some(g) = self.max_gap {
            cfg.segment.max_gap = g;
        }
        if let Some(b) = self.buffer_s {
            cfg.segment.buffer_s = b;
        }
        if let Some(s) = self.min_segment_s {
            cfg.segment.min_segment_s = s;
        }
        if let Some(g) = self.gate {
            cfg.gate = g;
        }
        if let Some(k) = self.k_sd {
            cfg.k_sd = k;
        }
        if self.scale_max.is_some() {
            cfg.scale_max = self.scale_max;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Write to `dir` when given, otherwise print to stdout separated by blank lines.
fn emit(files: &[OutputFile], dir: Option<&Path>) -> Result<()> {
    match dir {
        Some(dir) => {
            for path in pipeline::write_outputs(dir, files)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for (i, f) in files.iter().enumerate() {
                if i > 0 {
                    writeln!(stdout).ok();
                }
                stdout.write_all(f.contents.as_bytes()).ok();
            }
        }
    }
    Ok(())
}

fn cmd_validate(dir: &Path, cfg: &RunConfig, parallel: bool) -> Result<ExitCode> {
    let loaded = pipeline::load_session_lenient(dir, parallel)?;
    if loaded.is_empty() {
        return Err(Error::Invalid(format!(
            "no *.manifest.json files in {}",
            dir.display()
        )));
    }
    let total = loaded.len();
    let (mut accepted, mut parse_failures) = (0, 0);
    for (path, result) in &loaded {
        match result {
            Err(e) => {
                parse_failures += 1;
                println!("error    {}: {e}", path.display());
            }
            Ok(trial) => {
                let report = pipeline::validate(trial, cfg);
                if report.accepted() {
                    accepted += 1;
                    println!("ok       {} ({:.1} fps)", report.trial, report.observed_fps);
                } else {
                    for f in &report.errors {
                        println!("rejected {}: {f}", report.trial);
                    }
                }
                for f in &report.warnings {
                    println!("warning  {}: {f}", report.trial);
                }
            }
        }
    }
    println!("{accepted}/{total} trials accepted");
    Ok(if parse_failures > 0 {
        ExitCode::from(2)
    } else if accepted < total {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_analyze(path: &Path, cfg: &RunConfig, out: Option<&Path>, parallel: bool) -> Result<()> {
    if path.is_dir() {
        let analysis = pipeline::analyze_session(path, cfg, &ProfileFilter::default(), parallel)?;
        for msg in &analysis.skipped {
            eprintln!("skipped {msg}");
        }
        return emit(&analysis.trial_files, out);
    }
    let (manifest, trial) = load_trial(path)?;
    let loaded = LoadedTrial {
        manifest_path: path.to_path_buf(),
        manifest,
        trial,
    };
    let report = pipeline::validate(&loaded, cfg);
    if !report.accepted() {
        let reasons: Vec<String> = report.errors.iter().map(|f| f.to_string()).collect();
        return Err(Error::Domain(format!(
            "{} rejected: {}",
            report.trial,
            reasons.join("; ")
        )));
    }
    let profile = pipeline::analyze_trial(&loaded.trial, cfg)?;
    let file = OutputFile {
        name: pipeline::trial_file_name(&profile.trial),
        contents: pipeline::trial_csv(&profile, cfg),
    };
    emit(&[file], out)
}

fn cmd_profile(
    dir: &Path,
    filter: &ProfileFilter,
    cfg: &RunConfig,
    out: Option<&Path>,
    parallel: bool,
) -> Result<()> {
    let analysis = pipeline::analyze_session(dir, cfg, filter, parallel)?;
    for msg in &analysis.skipped {
        eprintln!("skipped {msg}");
    }
    emit(&analysis.profile_files, out)
}

fn cmd_compare(a: &Path, b: &Path, cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let pa = pipeline::read_condition_profile(a)?;
    let pb = pipeline::read_condition_profile(b)?;
    let table = pipeline::compare(&pa, &pb, cfg)?;
    let file = OutputFile {
        name: pipeline::delta_file_name(&pa, &pb),
        contents: pipeline::delta_csv(&table, &pa, cfg),
    };
    emit(&[file], out)
}

fn cmd_glyph(paths: &[PathBuf], cfg: &RunConfig, out: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let profiles = paths
        .iter()
        .map(|p| pipeline::read_condition_profile(p))
        .collect::<Result<Vec<_>>>()?;
    let svg = pipeline::glyph_svg(&profiles, cfg)?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::Io {
                    path: parent.into(),
                    source: e,
                })?;
            }
            fs::write(path, svg).map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let file = OutputFile {
                name: pipeline::glyph_file_name(&profiles[0]),
                contents: svg,
            };
            emit(&[file], out_dir)
        }
    }
}

struct SynthArgs {
    spec: SessionSpec,
    dropout_rate: f64,
    dropout_max_run: usize,
}

fn cmd_synth(args: &SynthArgs, out: &Path) -> Result<()> {
    let mut trials = synth::session_trials(&args.spec)?;
    if args.dropout_rate > 0.0 {
        for (i, st) in trials.iter_mut().enumerate() {
            let seed = synth::derive_seed(args.spec.base_seed, u64::MAX >> 24, 0, i as u64);
            st.trial = synth::dropout_model(&st.trial, args.dropout_rate, args.dropout_max_run, seed)?;
        }
    }
    let written = synth::write_session(&trials, out)?;
    println!("wrote {} trials to {}", written.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let parallel = cli.threads != Some(1);
    if let Some(n) = cli.threads.filter(|&n| n > 1) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Validate { dir, config } => return cmd_validate(&dir, &config.resolve()?, parallel),
        Command::Analyze { path, config, out } => {
            cmd_analyze(&path, &config.resolve()?, out.out_dir.as_deref(), parallel)?
        }
        Command::Profile {
            dir,
            subject,
            condition,
            camera,
            config,
            out,
        } => {
            let filter = ProfileFilter {
                subject_id: subject,
                condition,
                camera,
            };
            cmd_profile(
                &dir,
                &filter,
                &config.resolve()?,
                out.out_dir.as_deref(),
                parallel,
            )?
        }
        Command::Compare {
            profile_a,
            profile_b,
            config,
            out,
        } => cmd_compare(&profile_a, &profile_b, &config.resolve()?, out.out_dir.as_deref())?,
        Command::Glyph {
            profiles,
            out,
            config,
            out_dir,
        } => cmd_glyph(
            &profiles,
            &config.resolve()?,
            out.as_deref(),
            out_dir.out_dir.as_deref(),
        )?,
        Command::Synth {
            subjects,
            trials,
            seed,
            camera,
            duration_s,
            fps,
            dropout_rate,
            dropout_max_run,
            out,
        } => {
            let args = SynthArgs {
                spec: SessionSpec {
                    subjects,
                    trials_per_condition: trials,
                    base_seed: seed,
                    camera,
                    duration_s,
                    fps,
                    ..SessionSpec::default()
                },
                dropout_rate,
                dropout_max_run,
            };
            cmd_synth(&args, &out)?
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse_or_usage() { 2 } else { 1 })
        }
    }
}
