use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use rayon::prelude::*;
use voxdetect::eval::{confusion_counts, load_labels, EvalReport};
use voxdetect::pipeline::{
    analysis_grid, extract_features, prepare_clip, run_experiment, write_posterior_csv, Example, PipelineConfig,
    TrainedModel, CONFIG_KEYS,
};
use voxdetect::separation::separate;
use voxdetect::{load_wav, write_wav, AudioClip};

type Clip = AudioClip<f64>;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] voxdetect::Error),
}

impl CliError {
    fn kind(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("usage", 1),
            CliError::Core(e) if e.is_numeric() => ("numeric", 3),
            CliError::Core(voxdetect::Error::InvalidArgument(_)) => ("usage", 1),
            CliError::Core(_) => ("data", 2),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(voxdetect::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Files and directories written by the current command, removed again on failure.
#[derive(Default)]
struct Artifacts {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Artifacts {
    fn dir(&mut self, path: &Path) -> Result<PathBuf> {
        let mut missing = Vec::new();
        let mut p = Some(path);
        while let Some(q) = p {
            if q.as_os_str().is_empty() || q.exists() {
                break;
            }
            missing.push(q.to_path_buf());
            p = q.parent();
        }
        std::fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(path.to_path_buf())
    }

    fn file(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    fn write(&mut self, path: PathBuf, contents: &[u8]) -> Result<()> {
        let path = self.file(path);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))
    }

    fn rollback(self) {
        for f in self.files.iter().rev() {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn cli() -> Command {
    let inputs = || {
        Arg::new("inputs")
            .value_name("WAV")
            .num_args(1..)
            .required(true)
            .value_parser(clap::value_parser!(PathBuf))
            .help("input recordings (16-bit PCM WAV)")
    };
    let out_dir = || {
        Arg::new("out-dir")
            .long("out-dir")
            .short('o')
            .value_name("DIR")
            .required(true)
            .value_parser(clap::value_parser!(PathBuf))
            .help("directory for the outputs")
    };
    let data = || {
        Arg::new("data")
            .long("data")
            .value_name("LIST")
            .required(true)
            .value_parser(clap::value_parser!(PathBuf))
            .help("text file with one `recording.wav labels.lab` pair per line")
    };
    let mut cmd = Command::new("voxdetect")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Frame-wise singing voice detection")
        .after_help("Set VOXDETECT_LOG (error, warn, info, debug, trace) for log output.")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .value_parser(clap::value_parser!(PathBuf))
                .help("key=value config file; flags override it"),
        )
        .arg(
            Arg::new("workers")
                .long("workers")
                .short('j')
                .value_name("N")
                .global(true)
                .value_parser(clap::value_parser!(usize))
                .help("worker threads (default: all cores)"),
        )
        .subcommand(
            Command::new("separate")
                .about("Write vocal and accompaniment estimates of each recording")
                .arg(inputs())
                .arg(out_dir()),
        )
        .subcommand(
            Command::new("features")
                .about("Write the raw feature matrix of each recording as CSV")
                .arg(inputs())
                .arg(out_dir()),
        )
        .subcommand(
            Command::new("train")
                .about("Train a model on labelled recordings")
                .arg(data())
                .arg(out_dir()),
        )
        .subcommand(
            Command::new("predict")
                .about("Write posterior curves and smoothed labels for each recording")
                .arg(
                    Arg::new("model")
                        .long("model")
                        .short('m')
                        .value_name("CHECKPOINT")
                        .required(true)
                        .value_parser(clap::value_parser!(PathBuf)),
                )
                .arg(inputs())
                .arg(out_dir()),
        )
        .subcommand(
            Command::new("evaluate")
                .about("Score predicted label files against ground truth")
                .arg(
                    Arg::new("pairs")
                        .long("pairs")
                        .value_name("LIST")
                        .required(true)
                        .value_parser(clap::value_parser!(PathBuf))
                        .help("text file with one `predicted.lab truth.lab recording.wav` triple per line"),
                )
                .arg(out_dir()),
        )
        .subcommand(
            Command::new("pipeline")
                .about("Cross-validated experiment: separation, features, training, prediction, smoothing, scoring")
                .arg(data())
                .arg(out_dir()),
        );
    for (key, help) in CONFIG_KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .global(true)
                .action(ArgAction::Set)
                .help_heading("Config overrides")
                .help(*help),
        );
    }
    cmd
}

/// Defaults, then the config file, then explicit flags.
fn resolve_config(m: &ArgMatches, base: PipelineConfig) -> Result<PipelineConfig> {
    let mut cfg = base;
    if let Some(path) = m.get_one::<PathBuf>("config") {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        cfg.apply_text(&text, path)?;
    }
    apply_flags(m, &mut cfg, |_| true)?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_flags(m: &ArgMatches, cfg: &mut PipelineConfig, allowed: impl Fn(&str) -> bool) -> Result<()> {
    for (key, _) in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            if !allowed(key) {
                return Err(CliError::Usage(format!(
                    "--{} cannot be changed after training",
                    flag_name(key)
                )));
            }
            cfg.set(key, v)?;
        }
    }
    Ok(())
}

fn manifest(command: &str, inputs: &[String], cfg: &PipelineConfig) -> String {
    let mut out = String::new();
    writeln!(out, "# voxdetect {}", env!("CARGO_PKG_VERSION")).expect("string write");
    writeln!(out, "# command={command}").expect("string write");
    for i in inputs {
        writeln!(out, "# input={i}").expect("string write");
    }
    out.push_str(&cfg.to_text());
    out
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("cannot derive a name from {}", path.display())))
}

fn unique_stems(paths: &[PathBuf]) -> Result<Vec<String>> {
    let stems = paths.iter().map(|p| stem(p)).collect::<Result<Vec<_>>>()?;
    let mut seen = HashSet::new();
    for s in &stems {
        if !seen.insert(s) {
            return Err(CliError::Usage(format!("two inputs share the name '{s}'")));
        }
    }
    Ok(stems)
}

/// Whitespace-separated rows of a list file; relative paths resolve against the list's directory.
fn read_list(path: &Path, columns: usize) -> Result<Vec<Vec<PathBuf>>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != columns {
            return Err(CliError::Core(voxdetect::Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {columns} paths, got {}", fields.len()),
            }));
        }
        rows.push(fields.iter().map(|f| base.join(f)).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Core(voxdetect::Error::InsufficientData(format!(
            "{} lists no files",
            path.display()
        ))));
    }
    Ok(rows)
}

fn load_examples(list: &Path) -> Result<Vec<Example<f64>>> {
    let rows = read_list(list, 2)?;
    let wavs: Vec<PathBuf> = rows.iter().map(|r| r[0].clone()).collect();
    let ids = unique_stems(&wavs)?;
    Ok(rows
        .par_iter()
        .zip(ids)
        .map(|(r, id)| Example::load(id, &r[0], &r[1]))
        .collect::<voxdetect::Result<Vec<_>>>()?)
}

fn display_inputs(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn cmd_separate(m: &ArgMatches, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let inputs: Vec<PathBuf> = m.get_many::<PathBuf>("inputs").expect("required").cloned().collect();
    let out = art.dir(m.get_one::<PathBuf>("out-dir").expect("required"))?;
    let stems = unique_stems(&inputs)?;
    let results = inputs
        .par_iter()
        .map(|p| {
            let clip: Clip = load_wav(p)?;
            let clip = if clip.sample_rate() == cfg.sample_rate {
                clip
            } else {
                clip.resample(cfg.sample_rate)?
            };
            let sep = separate(&clip, &cfg.separation)?;
            log::info!("{}: period {} frames", p.display(), sep.period_frames);
            Ok(sep)
        })
        .collect::<voxdetect::Result<Vec<_>>>()?;
    for (sep, s) in results.iter().zip(&stems) {
        write_wav(&sep.vocal, art.file(out.join(format!("{s}_vocal.wav"))))?;
        write_wav(&sep.accompaniment, art.file(out.join(format!("{s}_accompaniment.wav"))))?;
    }
    art.write(out.join("manifest.txt"), manifest("separate", &display_inputs(&inputs), cfg).as_bytes())
}

fn cmd_features(m: &ArgMatches, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let inputs: Vec<PathBuf> = m.get_many::<PathBuf>("inputs").expect("required").cloned().collect();
    let out = art.dir(m.get_one::<PathBuf>("out-dir").expect("required"))?;
    let stems = unique_stems(&inputs)?;
    let feats = inputs
        .par_iter()
        .map(|p| extract_features(&load_wav::<f64>(p)?, cfg))
        .collect::<voxdetect::Result<Vec<_>>>()?;
    for (f, s) in feats.iter().zip(&stems) {
        if !f.degenerate_frames().is_empty() {
            log::warn!("{s}: {} silent frames have zero features", f.degenerate_frames().len());
        }
        f.write_csv(art.file(out.join(format!("{s}_{}.csv", cfg.features))))?;
    }
    art.write(out.join("manifest.txt"), manifest("features", &display_inputs(&inputs), cfg).as_bytes())
}

fn cmd_train(m: &ArgMatches, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let list = m.get_one::<PathBuf>("data").expect("required");
    let out = art.dir(m.get_one::<PathBuf>("out-dir").expect("required"))?;
    let examples = load_examples(list)?;
    let prepared = voxdetect::pipeline::prepare_examples(&examples, cfg)?;
    let refs: Vec<_> = prepared.iter().collect();
    let model = voxdetect::pipeline::train_model(&refs, cfg)?;
    art.write(out.join("model.ckpt"), &model.to_bytes())?;
    art.write(out.join("loss_history.csv"), model.history.to_csv().as_bytes())?;
    art.write(out.join("manifest.txt"), manifest("train", &[list.display().to_string()], cfg).as_bytes())
}

fn cmd_predict(m: &ArgMatches, art: &mut Artifacts) -> Result<()> {
    let ckpt = m.get_one::<PathBuf>("model").expect("required");
    let mut model = TrainedModel::<f64>::load(ckpt)?;
    // only decision-stage settings may differ from training
    apply_flags(m, &mut model.config, |k| {
        matches!(k, "threshold" | "smoothing" | "median_window")
    })?;
    if m.get_one::<PathBuf>("config").is_some() {
        return Err(CliError::Usage("predict takes its config from the checkpoint".into()));
    }
    model.config.validate()?;
    let inputs: Vec<PathBuf> = m.get_many::<PathBuf>("inputs").expect("required").cloned().collect();
    let out = art.dir(m.get_one::<PathBuf>("out-dir").expect("required"))?;
    let stems = unique_stems(&inputs)?;
    let results = inputs
        .par_iter()
        .map(|p| {
            let clip = prepare_clip(&load_wav::<f64>(p)?, &model.config)?;
            model.predict(&voxdetect::pipeline::clip_features(&clip, &model.config)?)
        })
        .collect::<voxdetect::Result<Vec<_>>>()?;
    for ((track, labels), s) in results.iter().zip(&stems) {
        write_posterior_csv(track, labels, art.file(out.join(format!("{s}_posterior.csv"))))?;
        labels.write(art.file(out.join(format!("{s}.lab"))))?;
    }
    let mut inputs_desc = vec![format!("model={}", ckpt.display())];
    inputs_desc.extend(display_inputs(&inputs));
    art.write(out.join("manifest.txt"), manifest("predict", &inputs_desc, &model.config).as_bytes())
}

fn cmd_evaluate(m: &ArgMatches, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let list = m.get_one::<PathBuf>("pairs").expect("required");
    let out = art.dir(m.get_one::<PathBuf>("out-dir").expect("required"))?;
    let rows = read_list(list, 3)?;
    let wavs: Vec<PathBuf> = rows.iter().map(|r| r[2].clone()).collect();
    let ids = unique_stems(&wavs)?;
    let files = rows
        .par_iter()
        .zip(ids)
        .map(|(r, id)| {
            let grid = analysis_grid(&load_wav::<f64>(&r[2])?, cfg)?;
            let pred = load_labels(&r[0], &grid)?;
            let truth = load_labels(&r[1], &grid)?;
            Ok((id, confusion_counts(&pred, &truth)?))
        })
        .collect::<voxdetect::Result<Vec<_>>>()?;
    let report = EvalReport::from_files(files)?;
    for flag in &report.metrics.undefined {
        log::warn!("pooled {flag} is undefined and reported as 0");
    }
    art.write(out.join("report.json"), format!("{}\n", report.to_json()).as_bytes())?;
    art.write(out.join("manifest.txt"), manifest("evaluate", &[list.display().to_string()], cfg).as_bytes())
}

fn cmd_pipeline(m: &ArgMatches, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let list = m.get_one::<PathBuf>("data").expect("required");
    let out = art.dir(m.get_one::<PathBuf>("out-dir").expect("required"))?;
    let examples = load_examples(list)?;
    let outcome = run_experiment(&examples, cfg)?;
    let post_dir = art.dir(&out.join("posteriors"))?;
    let lab_dir = art.dir(&out.join("labels"))?;
    for f in &outcome.files {
        write_posterior_csv(&f.track, &f.smoothed, art.file(post_dir.join(format!("{}.csv", f.id))))?;
        f.smoothed.write(art.file(lab_dir.join(format!("{}.lab", f.id))))?;
    }
    for (k, h) in outcome.histories.iter().enumerate() {
        art.write(out.join(format!("loss_history_fold{k}.csv")), h.to_csv().as_bytes())?;
    }
    art.write(out.join("report.json"), format!("{}\n", outcome.report.to_json()).as_bytes())?;
    art.write(out.join("manifest.txt"), manifest("pipeline", &[list.display().to_string()], cfg).as_bytes())?;
    println!(
        "pooled f1 {:.4} (precision {:.4}, recall {:.4}); per-file mean f1 {:.4}",
        outcome.report.metrics.f1,
        outcome.report.metrics.precision,
        outcome.report.metrics.recall,
        outcome.report.per_file_mean.f1
    );
    Ok(())
}

fn run(m: &ArgMatches) -> Result<()> {
    if let Some(&n) = m.get_one::<usize>("workers") {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    let (name, sub) = m.subcommand().expect("subcommand required");
    let mut art = Artifacts::default();
    let result = match name {
        "predict" => cmd_predict(sub, &mut art),
        _ => resolve_config(sub, PipelineConfig::default()).and_then(|cfg| match name {
            "separate" => cmd_separate(sub, &cfg, &mut art),
            "features" => cmd_features(sub, &cfg, &mut art),
            "train" => cmd_train(sub, &cfg, &mut art),
            "evaluate" => cmd_evaluate(sub, &cfg, &mut art),
            "pipeline" => cmd_pipeline(sub, &cfg, &mut art),
            other => Err(CliError::Usage(format!("unknown command {other}"))),
        }),
    };
    if result.is_err() {
        art.rollback();
    }
    result
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ").replace('\\', "\\\\").replace('"', "\\\"")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VOXDETECT_LOG", "warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage message=\"{}\"", one_line(first));
            return ExitCode::from(1);
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.kind();
            eprintln!("error: kind={kind} message=\"{}\"", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn flags_override_file_order() {
        let m = cli()
            .try_get_matches_from(["voxdetect", "pipeline", "--data", "x", "-o", "y", "--median-window", "5", "--seed", "9"])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        let cfg = resolve_config(sub, PipelineConfig::default()).unwrap();
        assert_eq!(cfg.smoothing.median_window, 5);
        assert_eq!(cfg.seed(), 9);
    }

    #[test]
    fn messages_stay_on_one_line() {
        assert_eq!(one_line("a\n  b \"c\""), "a b \\\"c\\\"");
    }
}
