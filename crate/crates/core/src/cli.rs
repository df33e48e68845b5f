//! Command-line configuration and experiment orchestration.
//!
//! Settings come from an optional flat `key = value` file and from flags;
//! flags win. File keys are the long flag names, with `-` or `_`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::ber::{
    ensemble_ber, snr_at_ber, write_csv, BerCurve, BerMethod, ChannelSource, EnsembleSpec,
    McLimits, Receiver, ReceiverConfig, SeriesParams,
};
use crate::channel::{composite_response, generate_realization, ChannelRealization, SvParams};
use crate::error::{Error, Result};
use crate::pulse::{matched_autocorrelation, render_pulse, PulseSpec};
use crate::rng::derive_seed;
use crate::txrx::{n0_from_snr, rake_noise_scale, FrameSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "UWBSIM_OUT_DIR";

/// Series term budget for sweeps. High SNR points need many more terms
/// than the library default.
const DEFAULT_SERIES_TERMS: &str = "20000";

/// BER target at which receivers are compared.
pub const TARGET_BER: f64 = 1e-3;

/// UWB Rake / MMSE equalizer BER simulator.
///
/// Every option can also be given in a `--config` file as `key = value`
/// using the long option name (for example `fingers = 10`). Flags override
/// file values. The output directory defaults to $UWBSIM_OUT_DIR, or the
/// current directory.
#[derive(Debug, Default, Parser)]
#[command(name = "uwbsim", version)]
pub struct Args {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// cm3, cm4, a realization file, or a channel parameter file (required).
    #[arg(long)]
    pub channel: Option<String>,
    /// rake, mmse, rake-le, rake-dfe, all, or a comma-separated list [all].
    #[arg(long)]
    pub receiver: Option<String>,
    /// Rake fingers L [10].
    #[arg(long)]
    pub fingers: Option<String>,
    /// Equalizer taps as K1,K2 [10,10].
    #[arg(long)]
    pub taps: Option<String>,
    /// First Eb/N0 grid point, dB [0].
    #[arg(long, allow_hyphen_values = true)]
    pub snr_start: Option<String>,
    /// Last Eb/N0 grid point, dB [20].
    #[arg(long, allow_hyphen_values = true)]
    pub snr_stop: Option<String>,
    /// Eb/N0 grid step, dB [2].
    #[arg(long, allow_hyphen_values = true)]
    pub snr_step: Option<String>,
    /// Channel realizations averaged per point [50].
    #[arg(long)]
    pub realizations: Option<String>,
    /// Symbols per packet, training included [2560].
    #[arg(long)]
    pub packet: Option<String>,
    /// Training prefix length [512].
    #[arg(long)]
    pub training: Option<String>,
    /// Master seed [1].
    #[arg(long)]
    pub seed: Option<String>,
    /// mc, series, chernoff, or all [series].
    #[arg(long)]
    pub method: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// rrc or doublet [rrc].
    #[arg(long)]
    pub pulse: Option<String>,
    /// RRC roll-off [0.5].
    #[arg(long)]
    pub rolloff: Option<String>,
    /// Pulse length in symbols [48 for rrc, 8 for doublet].
    #[arg(long)]
    pub pulse_span: Option<String>,
    /// Doublet width parameter, ns [0.5].
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Maximum odd terms of the exact series [20000].
    #[arg(long)]
    pub series_terms: Option<String>,
    /// Monte Carlo: errors to collect per point [100].
    #[arg(long)]
    pub min_errors: Option<String>,
    /// Monte Carlo: symbol budget per point [10000000].
    #[arg(long)]
    pub max_symbols: Option<String>,
    /// Worker threads, 0 for all cores [0].
    #[arg(long)]
    pub threads: Option<String>,
    /// Write the sampled pulse as `time_ns amplitude` rows.
    #[arg(long)]
    pub dump_pulse: Option<PathBuf>,
    /// Write the first receiver's equalizer for realization 0 at the first SNR.
    #[arg(long)]
    pub dump_taps: Option<PathBuf>,
    /// Write realization 0 in the realization file format.
    #[arg(long)]
    pub dump_realization: Option<PathBuf>,
}

const FILE_KEYS: &[&str] = &[
    "channel",
    "receiver",
    "fingers",
    "taps",
    "snr-start",
    "snr-stop",
    "snr-step",
    "realizations",
    "packet",
    "training",
    "seed",
    "method",
    "output",
    "pulse",
    "rolloff",
    "pulse-span",
    "epsilon",
    "series-terms",
    "min-errors",
    "max-symbols",
    "threads",
    "dump-pulse",
    "dump-taps",
    "dump-realization",
];

/// Channel choice as given by the user.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelChoice {
    Cm3,
    Cm4,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelChoice,
    pub receivers: Vec<Receiver>,
    pub fingers: usize,
    pub k1: usize,
    pub k2: usize,
    pub snr_start: f64,
    pub snr_stop: f64,
    pub snr_step: f64,
    pub realizations: usize,
    pub frame: FrameSpec,
    pub seed: u64,
    pub methods: Vec<BerMethod>,
    pub output: PathBuf,
    pub pulse: PulseSpec,
    pub series: SeriesParams,
    pub mc: McLimits,
    pub threads: usize,
    pub dump_pulse: Option<PathBuf>,
    pub dump_taps: Option<PathBuf>,
    pub dump_realization: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Grid points `start + i * step` up to `stop`.
    pub fn snr_grid(&self) -> Vec<f64> {
        let n = ((self.snr_stop - self.snr_start) / self.snr_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.snr_start + i as f64 * self.snr_step).collect()
    }

    pub fn receiver_config(&self, receiver: Receiver) -> ReceiverConfig {
        ReceiverConfig::new(receiver, self.fingers, self.k1, self.k2)
    }
}

/// Parses a flat `key = value` file into a map keyed by flag name.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(idx + 1, format!("expected key = value, got {line:?}")))?;
        let key = k.trim().replace('_', "-");
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(Error::parse(idx + 1, format!("unknown key {:?}", k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn number<T: std::str::FromStr>(key: &str, v: &str, errs: &mut Vec<String>) -> Option<T> {
    match v.parse() {
        Ok(x) => Some(x),
        Err(_) => {
            errs.push(format!("{key}: cannot parse {v:?}"));
            None
        }
    }
}

/// Merges flags over file values over defaults and validates the result.
/// All problems are collected into one parameter error.
pub fn build_config(args: Args) -> Result<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config_file(&text).map_err(|e| match e {
                Error::Parse { line, message } => {
                    Error::param(format!("{}:{line}: {message}", path.display()))
                }
                other => other,
            })?
        }
        None => BTreeMap::new(),
    };
    let flags: [(&str, Option<String>); 24] = [
        ("channel", args.channel),
        ("receiver", args.receiver),
        ("fingers", args.fingers),
        ("taps", args.taps),
        ("snr-start", args.snr_start),
        ("snr-stop", args.snr_stop),
        ("snr-step", args.snr_step),
        ("realizations", args.realizations),
        ("packet", args.packet),
        ("training", args.training),
        ("seed", args.seed),
        ("method", args.method),
        ("output", args.output.map(|p| p.to_string_lossy().into_owned())),
        ("pulse", args.pulse),
        ("rolloff", args.rolloff),
        ("pulse-span", args.pulse_span),
        ("epsilon", args.epsilon),
        ("series-terms", args.series_terms),
        ("min-errors", args.min_errors),
        ("max-symbols", args.max_symbols),
        ("threads", args.threads),
        ("dump-pulse", args.dump_pulse.map(|p| p.to_string_lossy().into_owned())),
        ("dump-taps", args.dump_taps.map(|p| p.to_string_lossy().into_owned())),
        ("dump-realization", args.dump_realization.map(|p| p.to_string_lossy().into_owned())),
    ];
    let mut merged = file;
    for (k, v) in flags {
        if let Some(v) = v {
            merged.insert(k.to_string(), v);
        }
    }
    let get = |k: &str| merged.get(k).map(String::as_str);
    let mut errs = Vec::new();

    let channel = match get("channel") {
        None => {
            errs.push("channel: required (cm3, cm4, or a file path)".to_string());
            None
        }
        Some("cm3") => Some(ChannelChoice::Cm3),
        Some("cm4") => Some(ChannelChoice::Cm4),
        Some(path) => Some(ChannelChoice::File(PathBuf::from(path))),
    };

    let receivers: Vec<Receiver> = match get("receiver").unwrap_or("all") {
        "all" => Receiver::ALL.to_vec(),
        list => {
            let mut out = Vec::new();
            for name in list.split(',').map(str::trim) {
                match Receiver::from_label(name) {
                    Some(r) if !out.contains(&r) => out.push(r),
                    Some(_) => {}
                    None => errs.push(format!("receiver: unknown {name:?}")),
                }
            }
            out
        }
    };

    let methods: Vec<BerMethod> = match get("method").unwrap_or("series") {
        "all" => BerMethod::ALL.to_vec(),
        "mc" => vec![BerMethod::MonteCarlo],
        "series" => vec![BerMethod::Series],
        "chernoff" => vec![BerMethod::Chernoff],
        other => {
            errs.push(format!("method: expected mc, series, chernoff or all, got {other:?}"));
            Vec::new()
        }
    };

    let fingers: usize = number("fingers", get("fingers").unwrap_or("10"), &mut errs).unwrap_or(1);
    if fingers == 0 {
        errs.push("fingers: must be at least 1".into());
    }
    let (k1, k2) = {
        let raw = get("taps").unwrap_or("10,10");
        match raw.split_once(',') {
            Some((a, b)) => (
                number("taps K1", a.trim(), &mut errs).unwrap_or(0),
                number("taps K2", b.trim(), &mut errs).unwrap_or(0),
            ),
            None => {
                errs.push(format!("taps: expected K1,K2, got {raw:?}"));
                (0, 0)
            }
        }
    };

    let snr_start: f64 = number("snr-start", get("snr-start").unwrap_or("0"), &mut errs).unwrap_or(0.0);
    let snr_stop: f64 = number("snr-stop", get("snr-stop").unwrap_or("20"), &mut errs).unwrap_or(0.0);
    let snr_step: f64 = number("snr-step", get("snr-step").unwrap_or("2"), &mut errs).unwrap_or(1.0);
    if !(snr_step > 0.0) || !snr_step.is_finite() {
        errs.push(format!("snr-step: must be positive, got {snr_step}"));
    }
    if !(snr_stop >= snr_start) {
        errs.push(format!("snr-stop ({snr_stop}) is below snr-start ({snr_start})"));
    }

    let realizations: usize =
        number("realizations", get("realizations").unwrap_or("50"), &mut errs).unwrap_or(1);
    if realizations == 0 {
        errs.push("realizations: must be at least 1".into());
    }
    let packet: usize = number("packet", get("packet").unwrap_or("2560"), &mut errs).unwrap_or(1);
    let training: usize = number("training", get("training").unwrap_or("512"), &mut errs).unwrap_or(0);
    if training >= packet {
        errs.push(format!("training ({training}) must be shorter than packet ({packet})"));
    }
    let seed: u64 = number("seed", get("seed").unwrap_or("1"), &mut errs).unwrap_or(0);

    let mut pulse = match get("pulse").unwrap_or("rrc") {
        "rrc" => PulseSpec::default(),
        "doublet" => PulseSpec::doublet(0.5),
        other => {
            errs.push(format!("pulse: expected rrc or doublet, got {other:?}"));
            PulseSpec::default()
        }
    };
    if let Some(v) = get("rolloff") {
        pulse.rolloff = number("rolloff", v, &mut errs).unwrap_or(pulse.rolloff);
    }
    if let Some(v) = get("pulse-span") {
        pulse.span_symbols = number("pulse-span", v, &mut errs).unwrap_or(pulse.span_symbols);
    }
    if let Some(v) = get("epsilon") {
        pulse.epsilon = number("epsilon", v, &mut errs).unwrap_or(pulse.epsilon);
    }
    if let Err(e) = pulse.validate() {
        errs.push(format!("pulse: {e}"));
    }

    let series = SeriesParams {
        max_odd_terms: number("series-terms", get("series-terms").unwrap_or(DEFAULT_SERIES_TERMS), &mut errs)
            .unwrap_or(1),
        omega: None,
    };
    if series.max_odd_terms == 0 {
        errs.push("series-terms: must be at least 1".into());
    }
    let mc = McLimits {
        min_errors: number("min-errors", get("min-errors").unwrap_or("100"), &mut errs).unwrap_or(1),
        max_symbols: number("max-symbols", get("max-symbols").unwrap_or("10000000"), &mut errs)
            .unwrap_or(1),
    };
    if mc.min_errors == 0 {
        errs.push("min-errors: must be at least 1".into());
    }
    if mc.max_symbols < packet as u64 {
        errs.push(format!("max-symbols: must cover one packet ({packet})"));
    }
    let threads: usize = number("threads", get("threads").unwrap_or("0"), &mut errs).unwrap_or(0);

    let output = match get("output") {
        Some(p) => PathBuf::from(p),
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from),
    };

    if !errs.is_empty() {
        return Err(Error::param(errs.join("; ")));
    }
    Ok(ExperimentConfig {
        channel: channel.expect("checked above"),
        receivers,
        fingers,
        k1,
        k2,
        snr_start,
        snr_stop,
        snr_step,
        realizations,
        frame: FrameSpec {
            payload_symbols: packet - training,
            training_symbols: training,
            symbol_duration: pulse.symbol_duration,
        },
        seed,
        methods,
        output,
        pulse,
        series,
        mc,
        threads,
        dump_pulse: get("dump-pulse").map(PathBuf::from),
        dump_taps: get("dump-taps").map(PathBuf::from),
        dump_realization: get("dump-realization").map(PathBuf::from),
    })
}

/// Outcome of parsing the command line.
#[derive(Debug)]
pub enum Parsed {
    Run(Box<ExperimentConfig>),
    /// Help or version text was requested; print and exit successfully.
    Info(String),
}

/// Parses flags (and the file they name) into a configuration.
pub fn parse_config<I, T>(args: I) -> Result<Parsed>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Args::try_parse_from(args) {
        Ok(a) => Ok(Parsed::Run(Box::new(build_config(a)?))),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                Ok(Parsed::Info(e.to_string()))
            }
            _ => Err(Error::param(e.to_string())),
        },
    }
}

/// Resolves the channel choice. A file is a realization file if it starts
/// with the realization header, otherwise a parameter file.
pub fn load_channel(choice: &ChannelChoice) -> Result<ChannelSource> {
    match choice {
        ChannelChoice::Cm3 => Ok(ChannelSource::Model(SvParams::cm3())),
        ChannelChoice::Cm4 => Ok(ChannelSource::Model(SvParams::cm4())),
        ChannelChoice::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let with_path = |e: Error| match e {
                Error::Parse { line, message } => {
                    Error::param(format!("{}:{line}: {message}", path.display()))
                }
                other => other,
            };
            if text.starts_with("# sv-realization") {
                ChannelRealization::from_text(&text)
                    .map(ChannelSource::Fixed)
                    .map_err(with_path)
            } else {
                SvParams::from_text(&text).map(ChannelSource::Model).map_err(with_path)
            }
        }
    }
}

fn ensemble_spec(cfg: &ExperimentConfig) -> Result<EnsembleSpec> {
    Ok(EnsembleSpec {
        channel: load_channel(&cfg.channel)?,
        pulse: cfg.pulse.clone(),
        frame: cfg.frame,
        snr_db: cfg.snr_grid(),
        realizations: cfg.realizations,
        master_seed: cfg.seed,
        series: cfg.series,
        mc: cfg.mc,
    })
}

/// One receiver's curves and where they were written.
#[derive(Debug, Clone)]
pub struct ReceiverResult {
    pub receiver: ReceiverConfig,
    pub csv: PathBuf,
    pub curves: Vec<BerCurve>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<ReceiverResult>,
    pub summary: String,
    pub plot_script: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Summary block: SNR at the target BER for every (receiver, method), and
/// the gain of each receiver over each earlier one.
pub fn summarize(cfg: &ExperimentConfig, results: &[ReceiverResult]) -> String {
    let mut out = String::new();
    let channel = match &cfg.channel {
        ChannelChoice::Cm3 => "cm3".to_string(),
        ChannelChoice::Cm4 => "cm4".to_string(),
        ChannelChoice::File(p) => p.display().to_string(),
    };
    writeln!(
        out,
        "channel={channel} realizations={} seed={} fingers={} taps={},{}",
        cfg.realizations, cfg.seed, cfg.fingers, cfg.k1, cfg.k2
    )
    .ok();
    writeln!(out, "snr at ber {TARGET_BER:e} (dB):").ok();
    let fmt = |v: Option<f64>| v.map_or_else(|| "not reached".to_string(), |s| format!("{s:.2}"));
    for &method in &cfg.methods {
        let crossings: Vec<(Receiver, Option<f64>)> = results
            .iter()
            .filter_map(|r| {
                let c = r.curves.iter().find(|c| c.method == method)?;
                Some((r.receiver.receiver, snr_at_ber(&c.points, TARGET_BER)))
            })
            .collect();
        for (rx, s) in &crossings {
            writeln!(out, "  {method:<12} {rx:<9} {}", fmt(*s)).ok();
        }
        for (i, (a, sa)) in crossings.iter().enumerate() {
            for (b, sb) in &crossings[..i] {
                let gain = match (sa, sb) {
                    (Some(x), Some(y)) => format!("{:+.2} dB", y - x),
                    _ => "n/a".to_string(),
                };
                writeln!(out, "  {method:<12} gain {a} over {b}: {gain}").ok();
            }
        }
    }
    out
}

/// Gnuplot script drawing every CSV on a log BER axis, one series per
/// (receiver, method).
pub fn emit_plot_script(curves: &[(String, PathBuf, Vec<BerMethod>)], path: &Path) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::param("no curves to plot"));
    }
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale y\n");
    s.push_str("set format y '10^{%L}'\n");
    s.push_str("set xlabel 'Eb/N0 (dB)'\n");
    s.push_str("set ylabel 'BER'\n");
    s.push_str("set grid\n");
    s.push_str("set key bottom left\n");
    let mut series = Vec::new();
    for (label, csv, methods) in curves {
        let file = csv.file_name().map_or_else(|| csv.display().to_string(), |f| f.to_string_lossy().into_owned());
        for m in methods {
            series.push(format!(
                "'{file}' skip 1 using 1:(strcol(3) eq '{m}' ? $2 : 1/0) with linespoints title '{label} ({m})'"
            ));
        }
    }
    writeln!(s, "plot {}", series.join(", \\\n     ")).ok();
    write_file(path, &s)
}

fn dump_artifacts(cfg: &ExperimentConfig, spec: &EnsembleSpec) -> Result<()> {
    let pulse = render_pulse(&cfg.pulse)?;
    if let Some(path) = &cfg.dump_pulse {
        let mut buf = Vec::new();
        pulse.write_dump(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    if cfg.dump_realization.is_none() && cfg.dump_taps.is_none() {
        return Ok(());
    }
    let r = match &spec.channel {
        ChannelSource::Model(p) => generate_realization(p, derive_seed(cfg.seed, &[0]))?,
        ChannelSource::Fixed(r) => r.clone(),
    };
    if let Some(path) = &cfg.dump_realization {
        r.dump(path)?;
    }
    if let (Some(path), Some(&first)) = (&cfg.dump_taps, cfg.receivers.first()) {
        let m = matched_autocorrelation(&pulse)?;
        let dense = composite_response(&r, &m, cfg.pulse.oversampling)?;
        let rx = cfg.receiver_config(first);
        let (plan, comp) = rx.front_end(&dense)?;
        let design = rx.design(&comp, rake_noise_scale(&plan), n0_from_snr(cfg.snr_start))?;
        write_file(path, &design.to_text())?;
    }
    Ok(())
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = ensemble_spec(cfg)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    dump_artifacts(cfg, &spec)?;

    let mut results = Vec::new();
    for &receiver in &cfg.receivers {
        let rx = cfg.receiver_config(receiver);
        let mut curves = Vec::new();
        for &method in &cfg.methods {
            log::info!("{} / {method}", rx.name());
            curves.push(ensemble_ber(&spec, &rx, method)?);
        }
        let rows: Vec<_> = curves.iter().flat_map(|c| c.points.iter().cloned()).collect();
        let csv = cfg.output.join(format!("{receiver}.csv"));
        write_file(&csv, &write_csv(&rows))?;
        results.push(ReceiverResult {
            receiver: rx,
            csv,
            curves,
        });
    }

    let plot_script = cfg.output.join("ber.gp");
    let plotted: Vec<_> = results
        .iter()
        .map(|r| (r.receiver.name(), r.csv.clone(), cfg.methods.clone()))
        .collect();
    emit_plot_script(&plotted, &plot_script)?;
    let summary = summarize(cfg, &results);
    write_file(&cfg.output.join("summary.txt"), &summary)?;
    Ok(ExperimentOutput {
        results,
        summary,
        plot_script,
    })
}

/// Runs every requested (receiver, method) pair and writes one CSV per
/// receiver, `summary.txt`, and `ber.gp` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.threads == 0 {
        return run_inner(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

/// Process exit status for an error: 1 usage, 2 numerical, 3 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Parse { .. } => 1,
        Error::Numerical(_) => 2,
        Error::Io { .. } => 3,
    }
}
