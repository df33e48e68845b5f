//! Bit error rates: Chernoff bound, exact ISI series, Monte Carlo, and
//! averages over channel ensembles.

use std::fmt;
use std::fmt::Write as _;
use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::channel::{
    composite_response, generate_realization, ChannelRealization, CompositeChannelDense, SvParams,
};
use crate::equalizer::{
    detect_range, mmse_dfe_design, mmse_le_design, overall_response, EqualizerDesign,
    OverallResponse,
};
use crate::error::{Error, Result};
use crate::pulse::{matched_autocorrelation, render_pulse, PulseSpec, SampledWaveform};
use crate::rng::{derive_seed, substream};
use crate::txrx::{
    composite_coefficients, matched_filter_output, n0_from_snr, rake_combine, rake_noise_scale,
    random_symbols, select_fingers, CompositeChannel, FrameSpec, RakePlan,
};

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BerMethod {
    MonteCarlo,
    Chernoff,
    Series,
}

impl BerMethod {
    pub const ALL: [BerMethod; 3] = [BerMethod::MonteCarlo, BerMethod::Series, BerMethod::Chernoff];

    pub fn label(self) -> &'static str {
        match self {
            BerMethod::MonteCarlo => "monte-carlo",
            BerMethod::Chernoff => "chernoff",
            BerMethod::Series => "series",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "monte-carlo" | "mc" => Some(BerMethod::MonteCarlo),
            "chernoff" => Some(BerMethod::Chernoff),
            "series" => Some(BerMethod::Series),
            _ => None,
        }
    }
}

impl fmt::Display for BerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub method: BerMethod,
    /// Decided symbols (Monte Carlo only, else 0).
    pub trials: u64,
    pub errors: u64,
    /// Monte Carlo hit `max_symbols` without a single error.
    pub censored: bool,
}

impl BerPoint {
    pub fn analytic(snr_db: f64, ber: f64, method: BerMethod) -> Self {
        BerPoint {
            snr_db,
            ber,
            method,
            trials: 0,
            errors: 0,
            censored: false,
        }
    }
}

/// Chernoff bound with a flag for the degenerate `J_min = 0` case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffBound {
    pub value: f64,
    /// `J_min <= 0`: perfect equalization, the bound collapses to 0.
    pub exact: bool,
}

/// `exp(-(1 - J/s) / (2 J/s))` with `s = sigma_d^2`.
pub fn chernoff_ber(j_min: f64, sigma_d2: f64) -> Result<ChernoffBound> {
    if !(sigma_d2 > 0.0) {
        return Err(Error::param("sigma_d^2 must be positive"));
    }
    if j_min.is_nan() || j_min > sigma_d2 * (1.0 + 1e-12) {
        return Err(Error::param(format!(
            "J_min {j_min} must lie in [0, sigma_d^2 = {sigma_d2}]"
        )));
    }
    if j_min <= 0.0 {
        return Ok(ChernoffBound {
            value: 0.0,
            exact: true,
        });
    }
    let ratio = (j_min / sigma_d2).min(1.0);
    Ok(ChernoffBound {
        value: (-(1.0 - ratio) / (2.0 * ratio)).exp(),
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesParams {
    /// Number of odd `z` values allowed, `z = 1, 3, ...`.
    pub max_odd_terms: usize,
    /// Series frequency step `w`; `None` picks
    /// `pi / (4 (q_0 + sum |q_n| + 5 sigma_w))`.
    pub omega: Option<f64>,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams {
            max_odd_terms: 501,
            omega: None,
        }
    }
}

/// Largest magnitude a term may have once the series counts as converged.
pub const SERIES_TOLERANCE: f64 = 1e-12;

/// Exact error probability of `sign(q_0 + sum_n q_n d_n + w)` for i.i.d.
/// `+1/-1` symbols `d_n` and Gaussian `w` of variance `sigma_w^2`.
pub fn series_ber(resp: &OverallResponse, params: &SeriesParams) -> Result<f64> {
    let q0 = resp.q0();
    let sigma = resp.sigma_w2.sqrt();
    if !(q0 > 0.0) {
        return Err(Error::param(format!("q_0 must be positive, got {q0}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("series needs a positive, finite noise level"));
    }
    if params.max_odd_terms == 0 {
        return Err(Error::param("max_odd_terms must be at least 1"));
    }
    let isi: Vec<f64> = resp.interference().filter(|q| *q != 0.0).collect();
    let w = match params.omega {
        Some(w) if w > 0.0 => w,
        Some(w) => return Err(Error::param(format!("omega must be positive, got {w}"))),
        None => PI / (4.0 * (q0 + isi.iter().map(|q| q.abs()).sum::<f64>() + 5.0 * sigma)),
    };
    let mut sum = 0.0;
    for i in 0..params.max_odd_terms {
        let z = (2 * i + 1) as f64;
        let zw = z * w;
        let envelope = (-0.5 * zw * zw * sigma * sigma).exp() / z;
        let product: f64 = isi.iter().map(|q| (zw * q).cos()).product();
        sum += envelope * (zw * q0).sin() * product;
        if envelope < SERIES_TOLERANCE {
            return Ok((0.5 - 2.0 / PI * sum).clamp(0.0, 0.5));
        }
    }
    let z = (2 * params.max_odd_terms - 1) as f64;
    let residual = (-0.5 * (z * w * sigma).powi(2)).exp() / z;
    Err(Error::Numerical(format!(
        "series not converged after {} odd terms (last term bound {residual:.3e}); \
         raise max_odd_terms",
        params.max_odd_terms
    )))
}

/// Stopping rule for Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McLimits {
    pub min_errors: u64,
    pub max_symbols: u64,
}

impl Default for McLimits {
    fn default() -> Self {
        McLimits {
            min_errors: 100,
            max_symbols: 10_000_000,
        }
    }
}

/// Everything a packet simulation needs: the waveform channel, the Rake
/// plan, and the equalizer that follows it.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    pub dense: &'a CompositeChannelDense,
    pub plan: &'a RakePlan,
    pub design: &'a EqualizerDesign,
    pub frame: FrameSpec,
}

/// Packets simulated between stopping-rule checks.
const PACKET_BATCH: u64 = 16;

/// Runs one packet `index` and returns `(errors, decided payload symbols)`.
fn simulate_packet(chain: &Chain<'_>, n0: f64, seed: u64, index: u64) -> Result<(u64, u64)> {
    let mut rng = substream(seed, &[index]);
    let frame = &chain.frame;
    let packet = random_symbols(frame.packet_len(), &mut rng);
    let pad = chain.design.k1 + chain.design.k2 + chain.dense.span_symbols + 1;
    let mut symbols = vec![0.0; pad];
    symbols.extend_from_slice(&packet);
    symbols.resize(packet.len() + 2 * pad, 0.0);

    let waveform = matched_filter_output(&symbols, chain.dense, n0, &mut rng)?;
    let y = rake_combine(&waveform, chain.plan, chain.dense.oversampling, symbols.len())?;
    let decisions = detect_range(&y, chain.design, pad..pad + packet.len());
    let errors = decisions[frame.training_symbols..]
        .iter()
        .zip(&packet[frame.training_symbols..])
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok((errors, frame.payload_symbols as u64))
}

/// Monte Carlo BER over whole packets, stopping after the packet that
/// reaches `min_errors` or `max_symbols` decided payload symbols.
///
/// Packets are simulated in parallel batches but the stopping rule is
/// applied in packet order, so the result depends only on `seed`.
pub fn monte_carlo_ber(chain: &Chain<'_>, snr_db: f64, limits: McLimits, seed: u64) -> Result<BerPoint> {
    chain.frame.validate()?;
    if limits.min_errors == 0 {
        return Err(Error::param("min_errors must be at least 1"));
    }
    if limits.max_symbols < chain.frame.packet_len() as u64 {
        return Err(Error::param("max_symbols must cover at least one packet"));
    }
    if chain.frame.payload_symbols == 0 {
        return Err(Error::param("packets carry no payload to count"));
    }
    let n0 = n0_from_snr(snr_db);
    let (mut errors, mut trials) = (0u64, 0u64);
    let mut next = 0u64;
    'outer: loop {
        let batch: Vec<(u64, u64)> = (next..next + PACKET_BATCH)
            .into_par_iter()
            .map(|i| simulate_packet(chain, n0, seed, i))
            .collect::<Result<_>>()?;
        next += PACKET_BATCH;
        for (e, t) in batch {
            errors += e;
            trials += t;
            if errors >= limits.min_errors || trials >= limits.max_symbols {
                break 'outer;
            }
        }
    }
    Ok(BerPoint {
        snr_db,
        ber: errors as f64 / trials as f64,
        method: BerMethod::MonteCarlo,
        trials,
        errors,
        censored: errors == 0,
    })
}

/// Receiver structures under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    /// Selective Rake with MRC and sign decisions.
    Rake,
    /// Strongest-path single finger followed by an MMSE LE.
    Mmse,
    RakeLe,
    RakeDfe,
}

impl Receiver {
    pub const ALL: [Receiver; 4] = [Receiver::Rake, Receiver::Mmse, Receiver::RakeLe, Receiver::RakeDfe];

    pub fn label(self) -> &'static str {
        match self {
            Receiver::Rake => "rake",
            Receiver::Mmse => "mmse",
            Receiver::RakeLe => "rake-le",
            Receiver::RakeDfe => "rake-dfe",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Receiver::ALL.into_iter().find(|r| r.label() == s)
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    pub receiver: Receiver,
    pub fingers: usize,
    pub k1: usize,
    pub k2: usize,
}

impl ReceiverConfig {
    pub fn new(receiver: Receiver, fingers: usize, k1: usize, k2: usize) -> Self {
        ReceiverConfig {
            receiver,
            fingers,
            k1,
            k2,
        }
    }

    pub fn name(&self) -> String {
        match self.receiver {
            Receiver::Rake => format!("rake L={}", self.fingers),
            Receiver::Mmse => format!("mmse K={},{}", self.k1, self.k2),
            _ => format!("{} L={} K={},{}", self.receiver, self.fingers, self.k1, self.k2),
        }
    }

    fn finger_count(&self) -> usize {
        match self.receiver {
            Receiver::Mmse => 1,
            _ => self.fingers,
        }
    }

    /// Rake plan and symbol-rate channel for one dense response.
    pub fn front_end(&self, dense: &CompositeChannelDense) -> Result<(RakePlan, CompositeChannel)> {
        let plan = select_fingers(dense, self.finger_count())?;
        let comp = composite_coefficients(dense, &plan)?;
        Ok((plan, comp))
    }

    /// Equalizer for a given front end at noise level `n0`. The plain Rake
    /// gets a one-tap MMSE scaling, which leaves its decisions unchanged
    /// and gives it a residual MSE for the Chernoff bound.
    pub fn design(&self, comp: &CompositeChannel, noise_scale: f64, n0: f64) -> Result<EqualizerDesign> {
        match self.receiver {
            Receiver::Rake => mmse_le_design(comp, noise_scale, n0, 0, 0),
            Receiver::Mmse | Receiver::RakeLe => mmse_le_design(comp, noise_scale, n0, self.k1, self.k2),
            Receiver::RakeDfe => mmse_dfe_design(comp, noise_scale, n0, self.k1, self.k2),
        }
    }
}

/// Where channel realizations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Model(SvParams),
    /// One fixed realization, used for every ensemble member.
    Fixed(ChannelRealization),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub channel: ChannelSource,
    pub pulse: PulseSpec,
    pub frame: FrameSpec,
    pub snr_db: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    pub series: SeriesParams,
    pub mc: McLimits,
}

impl EnsembleSpec {
    pub fn new(channel: ChannelSource, snr_db: Vec<f64>, realizations: usize, master_seed: u64) -> Self {
        EnsembleSpec {
            channel,
            pulse: PulseSpec::default(),
            frame: FrameSpec::default(),
            snr_db,
            realizations,
            master_seed,
            series: SeriesParams::default(),
            mc: McLimits::default(),
        }
    }

    fn realization(&self, index: usize) -> Result<ChannelRealization> {
        match &self.channel {
            ChannelSource::Model(p) => generate_realization(p, derive_seed(self.master_seed, &[index as u64])),
            ChannelSource::Fixed(r) => Ok(r.clone()),
        }
    }
}

/// Ensemble-averaged BER curve for one receiver and method.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub receiver: ReceiverConfig,
    pub method: BerMethod,
    pub points: Vec<BerPoint>,
    /// `per_channel[i][j]`: BER of realization `i` at grid point `j`.
    pub per_channel: Vec<Vec<f64>>,
}

impl BerCurve {
    /// Sample standard deviation of the per-channel BER at each grid point.
    pub fn spread(&self) -> Vec<f64> {
        let n = self.per_channel.len();
        (0..self.points.len())
            .map(|j| {
                if n < 2 {
                    return 0.0;
                }
                let mean = self.points[j].ber;
                let ss: f64 = self.per_channel.iter().map(|r| (r[j] - mean).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            })
            .collect()
    }
}

struct FrontEnd {
    dense: CompositeChannelDense,
    plan: RakePlan,
    comp: CompositeChannel,
    noise_scale: f64,
}

fn front_end(spec: &EnsembleSpec, m: &SampledWaveform, rx: &ReceiverConfig, index: usize) -> Result<FrontEnd> {
    let r = spec.realization(index)?;
    let dense = composite_response(&r, m, spec.pulse.oversampling)?;
    let (plan, comp) = rx.front_end(&dense)?;
    if plan.truncated {
        log::warn!(
            "realization {index}: only {} nonzero samples for {} fingers",
            plan.fingers(),
            rx.fingers
        );
    }
    let noise_scale = rake_noise_scale(&plan);
    Ok(FrontEnd {
        dense,
        plan,
        comp,
        noise_scale,
    })
}

fn evaluate_point(
    spec: &EnsembleSpec,
    fe: &FrontEnd,
    rx: &ReceiverConfig,
    method: BerMethod,
    index: usize,
    j: usize,
) -> Result<BerPoint> {
    let snr = spec.snr_db[j];
    let n0 = n0_from_snr(snr);
    let design = rx.design(&fe.comp, fe.noise_scale, n0)?;
    match method {
        BerMethod::Chernoff => {
            let b = chernoff_ber(design.j_min, design.sigma_d2)?;
            Ok(BerPoint::analytic(snr, b.value, method))
        }
        BerMethod::Series => {
            let resp = overall_response(&design, &fe.comp, fe.noise_scale, n0)?;
            Ok(BerPoint::analytic(snr, series_ber(&resp, &spec.series)?, method))
        }
        BerMethod::MonteCarlo => {
            let chain = Chain {
                dense: &fe.dense,
                plan: &fe.plan,
                design: &design,
                frame: spec.frame,
            };
            let seed = derive_seed(spec.master_seed, &[index as u64, j as u64]);
            monte_carlo_ber(&chain, snr, spec.mc, seed)
        }
    }
}

/// Per-channel evaluation at every SNR of the grid.
fn evaluate_channel(
    spec: &EnsembleSpec,
    m: &SampledWaveform,
    rx: &ReceiverConfig,
    method: BerMethod,
    index: usize,
) -> Result<Vec<BerPoint>> {
    let fe = front_end(spec, m, rx, index).map_err(|e| e.context(format!("realization {index}")))?;
    (0..spec.snr_db.len())
        .map(|j| {
            evaluate_point(spec, &fe, rx, method, index, j).map_err(|e| {
                e.context(format!("realization {index}, {} dB", spec.snr_db[j]))
            })
        })
        .collect()
}

/// Averages per-channel BER over `spec.realizations` channels.
///
/// Realization `i` uses seed `derive(master, [i])`, and Monte Carlo at grid
/// point `j` of it uses `derive(master, [i, j])`, so every receiver sees the
/// same channels and the same noise, and the result does not depend on the
/// number of worker threads.
pub fn ensemble_ber(spec: &EnsembleSpec, rx: &ReceiverConfig, method: BerMethod) -> Result<BerCurve> {
    if spec.realizations == 0 {
        return Err(Error::param("at least one realization is required"));
    }
    if spec.snr_db.is_empty() {
        return Err(Error::param("empty SNR grid"));
    }
    let m = matched_autocorrelation(&render_pulse(&spec.pulse)?)?;
    let count = match spec.channel {
        ChannelSource::Fixed(_) => 1,
        ChannelSource::Model(_) => spec.realizations,
    };
    let per: Vec<Vec<BerPoint>> = (0..count)
        .into_par_iter()
        .map(|i| evaluate_channel(spec, &m, rx, method, i))
        .collect::<Result<_>>()?;

    let n = per.len() as f64;
    let points = spec
        .snr_db
        .iter()
        .enumerate()
        .map(|(j, &snr)| {
            let ber = per.iter().map(|p| p[j].ber).sum::<f64>() / n;
            let trials = per.iter().map(|p| p[j].trials).sum();
            let errors = per.iter().map(|p| p[j].errors).sum();
            BerPoint {
                snr_db: snr,
                ber,
                method,
                trials,
                errors,
                censored: method == BerMethod::MonteCarlo && errors == 0,
            }
        })
        .collect();
    Ok(BerCurve {
        receiver: *rx,
        method,
        points,
        per_channel: per.iter().map(|p| p.iter().map(|b| b.ber).collect()).collect(),
    })
}

/// SNR at which the curve first falls through `target`, interpolating
/// `log10(BER)` linearly in dB. `None` if the curve never crosses.
pub fn snr_at_ber(points: &[BerPoint], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if !(a.ber >= target && b.ber < target) {
            return None;
        }
        let t = if b.ber > 0.0 {
            (a.ber.log10() - target.log10()) / (a.ber.log10() - b.ber.log10())
        } else {
            (a.ber - target) / (a.ber - b.ber)
        };
        Some(a.snr_db + t * (b.snr_db - a.snr_db))
    })
}

pub const CSV_HEADER: &str = "snr_db,ber,method,trials,errors,censored";

pub fn write_csv(points: &[BerPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.snr_db, p.ber, p.method, p.trials, p.errors, p.censored
        )
        .expect("writing to a String");
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BerPoint>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header {CSV_HEADER:?}"))),
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(Error::parse(line_no, format!("expected 6 fields, got {}", f.len())));
        }
        let bad = |what: &str| Error::parse(line_no, format!("bad {what}"));
        let point = BerPoint {
            snr_db: f[0].parse().map_err(|_| bad("snr_db"))?,
            ber: f[1].parse().map_err(|_| bad("ber"))?,
            method: BerMethod::from_label(f[2]).ok_or_else(|| bad("method"))?,
            trials: f[3].parse().map_err(|_| bad("trials"))?,
            errors: f[4].parse().map_err(|_| bad("errors"))?,
            censored: f[5].parse().map_err(|_| bad("censored"))?,
        };
        if !(0.0..=1.0).contains(&point.ber) || point.errors > point.trials {
            return Err(Error::parse(line_no, "ber outside [0, 1] or errors > trials"));
        }
        points.push(point);
    }
    Ok(points)
}
