//! The `cwta` command-line front end.
//!
//! Each pipeline stage is a subcommand. All settings come from flags or the
//! JSON config; the environment is never read.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    analyze_subjects, default_tte_sample_sizes, power_table, run_grid, sample_size_table, tte_table, Executor,
    Method,
};
use crate::io::config::{parse_config, ExperimentConfig};
use crate::io::svg::{emit_svg_stepplot, Interpolation, PlotCurve, PlotSpec, Stroke};
use crate::io::tables;
use crate::sim::{calibrate_with, high_target, moderate_target, simulate_trial, Profile};

#[derive(Debug, Parser)]
#[command(name = "cwta", version, about = "Simulate trials and compare CWTA with KM-PFS and KM-OS")]
struct Cli {
    /// Worker threads for grid runs (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in profile name or profile JSON path; overrides the config.
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit response probabilities to target best-response rates and write a profile.
    Calibrate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Use a shipped target (`moderate` or `high`) instead of the config's.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one trial and write its long-format trajectories.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        hazard_ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run KM-PFS, KM-OS and CWTA on a trajectory file.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Power of each method over the hazard-ratio by sample-size grid.
    Power(GridArgs),
    /// Interpolated sample size reaching the target power.
    Samplesize(GridArgs),
    /// Time to first significance under monthly interim analyses.
    Tte(GridArgs),
    /// Render curve or table CSVs as an SVG plot.
    Plot {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Legend labels, one per input curve file.
        #[arg(long)]
        label: Vec<String>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Output directory; falls back to the config's `output_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Runs the CLI on a full argument vector (program name first) and returns
/// the process exit code.
pub fn run_cli(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let exec = Executor::with_workers(cli.workers)?;
    match cli.command {
        Command::Calibrate { cfg, preset, out } => calibrate(&cfg, preset.as_deref(), &out),
        Command::Simulate {
            cfg,
            sample_size,
            hazard_ratio,
            seed,
            out,
        } => {
            let (mut config, base) = load_config(&cfg)?;
            if let Some(v) = sample_size {
                config.sample_size = v;
            }
            if let Some(v) = hazard_ratio {
                config.hazard_ratio = v;
            }
            if let Some(v) = seed {
                config.seed = v;
            }
            config.validate()?;
            let profile = config.load_profile(base.as_deref())?;
            let trial = simulate_trial(&config.trial_config(&profile))?;
            tables::write_trajectories(create(&out)?, &trial.subjects)?;
            println!("wrote {} subjects to {}", trial.subjects.len(), out.display());
            Ok(())
        }
        Command::Analyze { input, out_dir } => analyze(&input, &out_dir),
        Command::Power(args) => grid_command(&args, GridKind::Power, &exec),
        Command::Samplesize(args) => grid_command(&args, GridKind::SampleSize, &exec),
        Command::Tte(args) => grid_command(&args, GridKind::Tte, &exec),
        Command::Plot {
            input,
            label,
            title,
            out,
        } => plot(&input, &label, title.as_deref(), &out),
    }
}

fn load_config(arg: &ConfigArg) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let (mut cfg, base) = match &arg.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read config `{}`: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf);
            (parse_config(&text)?, base)
        }
        None => (ExperimentConfig::default(), None),
    };
    if let Some(p) = &arg.profile {
        cfg.profile = p.clone();
    }
    Ok((cfg, base))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidInput(format!("cannot create `{}`: {e}", dir.display())))?;
    }
    let f = File::create(path)
        .map_err(|e| Error::InvalidInput(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn calibrate(arg: &ConfigArg, preset: Option<&str>, out: &Path) -> Result<()> {
    let (mut cfg, _) = load_config(arg)?;
    if let Some(p) = preset {
        cfg.calibration.target = match p {
            "moderate" => moderate_target(),
            "high" => high_target(),
            other => return Err(Error::config("preset", format!("unknown preset `{other}`"))),
        };
        cfg.calibration.name = p.to_string();
    }
    cfg.validate()?;
    let c = &cfg.calibration;
    let settings = c.settings();
    let (model, achieved) = calibrate_with(&c.target, &c.template(), c.rounds, &settings)?;
    let profile = Profile {
        name: c.name.clone(),
        version: 1,
        target: c.target,
        model,
        calibration_seed: settings.seed,
        calibration_subjects: settings.subjects,
        achieved: Some(achieved),
    };
    let mut w = create(out)?;
    writeln!(w, "{}", profile.to_json()?)?;
    w.flush()?;
    println!(
        "profile `{}`: CR {:.4} PR {:.4} -> {}",
        profile.name,
        achieved.cr_rate,
        achieved.pr_rate,
        out.display()
    );
    Ok(())
}

fn analyze(input: &Path, out_dir: &Path) -> Result<()> {
    let f = File::open(input)
        .map_err(|e| Error::InvalidInput(format!("cannot read `{}`: {e}", input.display())))?;
    let subjects = tables::read_trajectories(BufReader::new(f))?;
    let a = analyze_subjects(&subjects)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create `{}`: {e}", out_dir.display())))?;
    tables::write_test_summary(create(&out_dir.join("tests.csv"))?, &a)?;
    for (i, arm) in ["control", "experimental"].into_iter().enumerate() {
        tables::write_km_curve(create(&out_dir.join(format!("km_pfs_{arm}.csv")))?, &a.pfs[i])?;
        tables::write_km_curve(create(&out_dir.join(format!("km_os_{arm}.csv")))?, &a.os[i])?;
        tables::write_cwta_curve(create(&out_dir.join(format!("cwta_{arm}.csv")))?, &a.cwta[i])?;
    }
    for m in Method::ALL {
        match a.tests[m.index()] {
            Some(t) => println!("{:<5} z = {:+.4}  p = {:.4e}", m.as_str(), t.z, t.p_value),
            None => println!("{:<5} degenerate (no informative events)", m.as_str()),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GridKind {
    Power,
    SampleSize,
    Tte,
}

fn grid_command(args: &GridArgs, kind: GridKind, exec: &Executor) -> Result<()> {
    let (mut cfg, base) = load_config(&args.cfg)?;
    if let Some(r) = args.replicates {
        cfg.replicates = r;
        // An explicit replicate count applies to every HR.
        cfg.replicate_overrides.clear();
    }
    if let Some(s) = args.master_seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::config("output_dir", "no output directory given (use --out-dir)"))?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create `{}`: {e}", out_dir.display())))?;
    let profile = cfg.load_profile(base.as_deref())?;
    let model = cfg.control_model(&profile);
    let grid = match kind {
        GridKind::Tte => cfg.grid(default_tte_sample_sizes),
        _ => cfg.power_grid(),
    };
    let points = run_grid(&grid, &model, exec)?;
    match kind {
        GridKind::Power | GridKind::SampleSize => {
            let powers = power_table(&points, cfg.alpha)?;
            tables::write_power_table(create(&out_dir.join("power.csv"))?, &powers)?;
            if kind == GridKind::SampleSize {
                let rows = sample_size_table(&powers, cfg.target_power);
                tables::write_sample_size_table(create(&out_dir.join("sample_size.csv"))?, &rows)?;
                for r in &rows {
                    match r.sample_size {
                        Some(ss) => println!("HR {:<4} {:<5} {ss:.1}", r.hazard_ratio, r.method.as_str()),
                        None => println!(
                            "HR {:<4} {:<5} not reached (max power {:.3})",
                            r.hazard_ratio,
                            r.method.as_str(),
                            r.max_power
                        ),
                    }
                }
            }
        }
        GridKind::Tte => {
            let rows = tte_table(&points)?;
            tables::write_tte_table(create(&out_dir.join("tte.csv"))?, &rows)?;
        }
    }
    println!("wrote {} grid points to {}", points.len(), out_dir.display());
    Ok(())
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let f = File::open(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read `{}`: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(f));
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("`{}` has no data rows", path.display())));
    }
    Ok((header, rows))
}

fn num(s: &str, path: &Path) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("`{}`: `{s}` is not a number", path.display())))
}

/// Curves in one CSV, plus axis labels.
fn curves_from_csv(path: &Path, label: Option<&str>) -> Result<(Vec<(String, Vec<(f64, f64)>, Interpolation)>, &'static str, &'static str)> {
    let (header, rows) = read_csv(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = label.map(str::to_string).unwrap_or(stem);
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    match cols.as_slice() {
        ["time", "survival", ..] | ["month", "value", ..] => {
            let mut pts = rows
                .iter()
                .map(|r| Ok((num(&r[0], path)?, num(&r[1], path)?)))
                .collect::<Result<Vec<_>>>()?;
            if pts[0].0 > 0.0 {
                pts.insert(0, (0.0, 1.0));
            }
            let y = if cols[0] == "time" { "Survival" } else { "Weighted trajectory" };
            Ok((vec![(name, pts, Interpolation::Step)], "Month", y))
        }
        ["method", "hr", "ss", "replicates", "power"] | ["method", "hr", "ss", "mean", ..] => {
            let power = cols[3] == "replicates";
            let ycol = if power { 4 } else { 3 };
            let mut series: Vec<(String, Vec<(f64, f64)>, Interpolation)> = Vec::new();
            for r in &rows {
                if r[ycol].is_empty() {
                    continue;
                }
                let key = format!("{} HR {}", r[0], r[1]);
                let pt = (num(&r[2], path)?, num(&r[ycol], path)?);
                match series.iter_mut().find(|s| s.0 == key) {
                    Some(s) => s.1.push(pt),
                    None => series.push((key, vec![pt], Interpolation::Linear)),
                }
            }
            for s in &mut series {
                s.1.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            let y = if power { "Power" } else { "Mean months to significance" };
            Ok((series, "Sample size", y))
        }
        _ => Err(Error::InvalidInput(format!(
            "`{}`: unrecognised columns {}",
            path.display(),
            header.join(",")
        ))),
    }
}

fn plot(inputs: &[PathBuf], labels: &[String], title: Option<&str>, out: &Path) -> Result<()> {
    let mut curves = Vec::new();
    let mut axes = None;
    for (i, path) in inputs.iter().enumerate() {
        let (series, x, y) = curves_from_csv(path, labels.get(i).map(String::as_str))?;
        axes.get_or_insert((x, y));
        for (label, points, interpolation) in series {
            curves.push(PlotCurve {
                label,
                points,
                stroke: Stroke::nth(curves.len()),
                interpolation,
            });
        }
    }
    let (x, y) = axes.unwrap_or(("x", "y"));
    let title = title.map(str::to_string).unwrap_or_else(|| {
        inputs
            .iter()
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect::<Vec<_>>()
            .join(", ")
    });
    let spec = PlotSpec::fitted(&title, x, y, curves)?;
    let svg = emit_svg_stepplot(&spec)?;
    let mut w = create(out)?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}
