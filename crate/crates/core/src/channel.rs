//! Saleh-Valenzuela multipath channels (IEEE 802.15.3a).
//!
//! Cluster arrivals form a Poisson process of rate `Lambda`, rays inside a
//! cluster a Poisson process of rate `lambda`. A ray arriving `tau` after
//! its cluster, which itself arrived at `T`, has mean-square gain
//! `exp(-T/Gamma) exp(-tau/gamma)`; the gain is lognormal with a cluster term
//! and a ray term (dB standard deviations `sigma_xi`, `sigma_zeta`) and a
//! random sign. Realizations are truncated at `max_delay`, normalized to unit
//! energy, and shifted so that the first arrival is at zero delay.
//!
//! Lognormal shadowing is drawn and recorded in the realization, but it is
//! never applied to the gains: the energy normalization would cancel it.

use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::pulse::SampledWaveform;
use crate::rng::{derive_seed, from_seed};

/// Channel model parameters. Rates are in 1/ns, times in ns, spreads in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct SvParams {
    pub cluster_rate: f64,
    pub ray_rate: f64,
    pub cluster_decay: f64,
    pub ray_decay: f64,
    pub sigma_cluster_db: f64,
    pub sigma_ray_db: f64,
    pub sigma_shadow_db: f64,
    pub max_delay: f64,
}

impl SvParams {
    /// CM3: 4-10 m, non line of sight. Window of 70 grid ticks at 0.625 ns.
    pub fn cm3() -> Self {
        SvParams {
            cluster_rate: 0.0067,
            ray_rate: 2.1,
            cluster_decay: 14.0,
            ray_decay: 7.9,
            sigma_cluster_db: 3.3941,
            sigma_ray_db: 3.3941,
            sigma_shadow_db: 3.0,
            max_delay: 70.0 * 0.625,
        }
    }

    /// CM4: extreme non line of sight. Window of 100 grid ticks at 0.625 ns.
    pub fn cm4() -> Self {
        SvParams {
            cluster_decay: 24.0,
            ray_decay: 12.0,
            max_delay: 100.0 * 0.625,
            ..Self::cm3()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cluster_rate", self.cluster_rate),
            ("ray_rate", self.ray_rate),
            ("cluster_decay", self.cluster_decay),
            ("ray_decay", self.ray_decay),
            ("max_delay", self.max_delay),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        let sigmas = [
            ("sigma_cluster_db", self.sigma_cluster_db),
            ("sigma_ray_db", self.sigma_ray_db),
            ("sigma_shadow_db", self.sigma_shadow_db),
        ];
        for (name, v) in sigmas {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` parameter file. Missing keys keep the
    /// CM3 value; unknown keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = Self::cm3();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(idx + 1, format!("expected key = value, got {line:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad number {:?}", value.trim())))?;
            let slot = match key.trim() {
                "cluster_rate" => &mut p.cluster_rate,
                "ray_rate" => &mut p.ray_rate,
                "cluster_decay" => &mut p.cluster_decay,
                "ray_decay" => &mut p.ray_decay,
                "sigma_cluster_db" => &mut p.sigma_cluster_db,
                "sigma_ray_db" => &mut p.sigma_ray_db,
                "sigma_shadow_db" => &mut p.sigma_shadow_db,
                "max_delay" => &mut p.max_delay,
                other => return Err(Error::parse(idx + 1, format!("unknown key {other:?}"))),
            };
            *slot = value;
        }
        p.validate()?;
        Ok(p)
    }
}

/// One ray as drawn, before truncation and normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub cluster_arrival: f64,
    pub excess_delay: f64,
    pub gain: f64,
}

/// Raw draw of the clustered arrival process.
///
/// `cluster_gaps` and `ray_gaps` include the final gap that crossed
/// `max_delay`; keeping it makes the pooled gap mean an unbiased estimate
/// of the inter-arrival time.
#[derive(Debug, Clone, Default)]
pub struct ClusterTrace {
    pub rays: Vec<Ray>,
    pub cluster_arrivals: Vec<f64>,
    pub cluster_gaps: Vec<f64>,
    pub ray_gaps: Vec<f64>,
    pub shadowing_db: f64,
}

/// Draws clusters and rays up to `max_delay`.
pub fn draw_trace<R: Rng>(params: &SvParams, rng: &mut R) -> Result<ClusterTrace> {
    params.validate()?;
    let cluster_gap = Exp::new(params.cluster_rate).map_err(|e| Error::param(e.to_string()))?;
    let ray_gap = Exp::new(params.ray_rate).map_err(|e| Error::param(e.to_string()))?;
    let cluster_fade =
        Normal::new(0.0, params.sigma_cluster_db).map_err(|e| Error::param(e.to_string()))?;
    let ray_fade = Normal::new(0.0, params.sigma_ray_db).map_err(|e| Error::param(e.to_string()))?;
    let shadow = Normal::new(0.0, params.sigma_shadow_db).map_err(|e| Error::param(e.to_string()))?;

    // Mean offset (dB) that makes E[gain^2] equal the exponential profile.
    let total_var = params.sigma_cluster_db.powi(2) + params.sigma_ray_db.powi(2);
    let lognormal_bias = total_var * LN_10 / 20.0;

    let mut trace = ClusterTrace {
        shadowing_db: shadow.sample(rng),
        ..Default::default()
    };
    let mut cluster_t = 0.0;
    while cluster_t <= params.max_delay {
        trace.cluster_arrivals.push(cluster_t);
        let xi = cluster_fade.sample(rng);
        let mut tau = 0.0;
        while cluster_t + tau <= params.max_delay {
            let zeta = ray_fade.sample(rng);
            let mu = (-10.0 * cluster_t / params.cluster_decay - 10.0 * tau / params.ray_decay)
                / LN_10
                - lognormal_bias;
            let magnitude = 10f64.powf((mu + xi + zeta) / 20.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            trace.rays.push(Ray {
                cluster_arrival: cluster_t,
                excess_delay: tau,
                gain: sign * magnitude,
            });
            let gap = ray_gap.sample(rng);
            trace.ray_gaps.push(gap);
            tau += gap;
        }
        let gap = cluster_gap.sample(rng);
        trace.cluster_gaps.push(gap);
        cluster_t += gap;
    }
    Ok(trace)
}

/// Multipath taps `{h_p, tau_p}` of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<f64>,
    /// Nondecreasing, ns.
    pub delays: Vec<f64>,
    pub shadowing_db: f64,
    pub seed: u64,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps, checking the invariants
    /// that do not depend on normalization.
    pub fn new(gains: Vec<f64>, delays: Vec<f64>, shadowing_db: f64, seed: u64) -> Result<Self> {
        if gains.len() != delays.len() {
            return Err(Error::param(format!(
                "{} gains but {} delays",
                gains.len(),
                delays.len()
            )));
        }
        if gains.is_empty() {
            return Err(Error::param("realization has no paths"));
        }
        if gains.iter().chain(&delays).any(|v| !v.is_finite()) {
            return Err(Error::param("non-finite gain or delay"));
        }
        if delays[0] < 0.0 {
            return Err(Error::param("negative delay"));
        }
        if let Some(i) = delays.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::param(format!("delays decrease at path {}", i + 1)));
        }
        Ok(ChannelRealization {
            gains,
            delays,
            shadowing_db,
            seed,
        })
    }

    /// A single unit path at zero delay.
    pub fn single_path() -> Self {
        ChannelRealization {
            gains: vec![1.0],
            delays: vec![0.0],
            shadowing_db: 0.0,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.gains.iter().map(|g| g * g).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ChannelRealization {
            gains: self.gains.iter().map(|g| g * factor).collect(),
            ..self.clone()
        }
    }

    /// Header line plus `delay_ns,gain` rows, shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# sv-realization v1 seed={} shadow_db={}\n",
            self.seed, self.shadowing_db
        );
        for (d, g) in self.delays.iter().zip(&self.gains) {
            writeln!(out, "{d},{g}").expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty realization file"))?;
        let fields = header
            .strip_prefix("# sv-realization v1")
            .ok_or_else(|| Error::parse(1, "missing '# sv-realization v1' header"))?;
        let mut seed = None;
        let mut shadow = None;
        for field in fields.split_whitespace() {
            match field.split_once('=') {
                Some(("seed", v)) => {
                    seed = Some(v.parse::<u64>().map_err(|_| Error::parse(1, "bad seed"))?)
                }
                Some(("shadow_db", v)) => {
                    shadow = Some(v.parse::<f64>().map_err(|_| Error::parse(1, "bad shadow_db"))?)
                }
                _ => return Err(Error::parse(1, format!("unexpected header field {field:?}"))),
            }
        }
        let seed = seed.ok_or_else(|| Error::parse(1, "header lacks seed="))?;
        let shadow = shadow.ok_or_else(|| Error::parse(1, "header lacks shadow_db="))?;

        let mut gains = Vec::new();
        let mut delays: Vec<f64> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (d, g) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(line_no, "expected delay_ns,gain"))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad delay {d:?}")))?;
            let g: f64 = g
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad gain {g:?}")))?;
            if !d.is_finite() || !g.is_finite() || d < 0.0 {
                return Err(Error::parse(line_no, "delay and gain must be finite, delay >= 0"));
            }
            if delays.last().is_some_and(|&prev| d < prev) {
                return Err(Error::parse(line_no, "delays must be nondecreasing"));
            }
            delays.push(d);
            gains.push(g);
        }
        if gains.is_empty() {
            return Err(Error::parse(1, "realization has no paths"));
        }
        Ok(ChannelRealization {
            gains,
            delays,
            shadowing_db: shadow,
            seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

const MAX_ATTEMPTS: u64 = 100;

/// Draws one normalized realization. Deterministic in `(params, seed)`.
pub fn generate_realization(params: &SvParams, seed: u64) -> Result<ChannelRealization> {
    params.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let stream_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, &[attempt])
        };
        let mut rng = from_seed(stream_seed);
        let trace = draw_trace(params, &mut rng)?;
        let mut taps: Vec<(f64, f64)> = trace
            .rays
            .iter()
            .map(|r| (r.cluster_arrival + r.excess_delay, r.gain))
            .collect();
        taps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let energy: f64 = taps.iter().map(|t| t.1 * t.1).sum();
        if taps.is_empty() || !(energy > 0.0) || !energy.is_finite() {
            continue;
        }
        let scale = energy.sqrt().recip();
        let origin = taps[0].0;
        return Ok(ChannelRealization {
            delays: taps.iter().map(|t| t.0 - origin).collect(),
            gains: taps.iter().map(|t| t.1 * scale).collect(),
            shadowing_db: trace.shadowing_db,
            seed,
        });
    }
    Err(Error::Numerical(format!(
        "no usable paths after {MAX_ATTEMPTS} draws; check max_delay and decay constants"
    )))
}

/// Mean excess delay and RMS delay spread (ns) of the power-delay profile.
fn delay_moments(r: &ChannelRealization) -> (f64, f64) {
    let energy = r.energy();
    let mean = r
        .gains
        .iter()
        .zip(&r.delays)
        .map(|(g, d)| g * g * d)
        .sum::<f64>()
        / energy;
    let second = r
        .gains
        .iter()
        .zip(&r.delays)
        .map(|(g, d)| g * g * d * d)
        .sum::<f64>()
        / energy;
    (mean, (second - mean * mean).max(0.0).sqrt())
}

/// RMS delay spread, ns.
pub fn rms_delay_spread(r: &ChannelRealization) -> f64 {
    delay_moments(r).1
}

/// Coherence bandwidth in MHz using the `1 / (5 sigma_tau)` convention.
/// A zero delay spread gives `f64::INFINITY`.
pub fn coherence_bandwidth(r: &ChannelRealization) -> f64 {
    coherence_bandwidth_from_spread(rms_delay_spread(r))
}

pub fn coherence_bandwidth_from_spread(rms_spread_ns: f64) -> f64 {
    if rms_spread_ns <= 0.0 {
        f64::INFINITY
    } else {
        1e3 / (5.0 * rms_spread_ns)
    }
}

/// Sampled composite response `h(t) = sum_i h_i m(t - tau_i)` on the `T_m` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeChannelDense {
    pub samples: Vec<f64>,
    /// Grid spacing, ns.
    pub sample_interval: f64,
    pub oversampling: usize,
    /// `ceil(len / oversampling)`.
    pub span_symbols: usize,
    /// Grid tick of `samples[0]`, relative to the first path.
    pub start_tick: i64,
}

impl CompositeChannelDense {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Sample at grid index `i`, zero outside the stored range.
    pub fn at(&self, i: i64) -> f64 {
        usize::try_from(i)
            .ok()
            .and_then(|i| self.samples.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// Shortest window obtained by peeling the weaker edge sample off while
    /// the retained energy stays at or above `fraction` of the total.
    pub fn trimmed(&self, fraction: f64) -> Self {
        let e: Vec<f64> = self.samples.iter().map(|s| s * s).collect();
        let total: f64 = e.iter().sum();
        let floor = fraction * total;
        let (mut lo, mut hi) = (0usize, e.len().saturating_sub(1));
        let mut kept = total;
        while lo < hi {
            let (edge, from_front) = if e[lo] <= e[hi] { (e[lo], true) } else { (e[hi], false) };
            if kept - edge < floor {
                break;
            }
            kept -= edge;
            if from_front {
                lo += 1;
            } else {
                hi -= 1;
            }
        }
        let samples = self.samples[lo..=hi].to_vec();
        CompositeChannelDense {
            span_symbols: samples.len().div_ceil(self.oversampling),
            samples,
            start_tick: self.start_tick + lo as i64,
            ..*self
        }
    }
}

/// Fraction of composite energy retained by [`composite_response`].
pub const RETAINED_ENERGY: f64 = 0.99;

/// Full (untrimmed) composite response. Path delays are snapped to the
/// nearest grid tick; paths landing on the same tick add coherently.
pub fn composite_response_full(
    r: &ChannelRealization,
    m: &SampledWaveform,
    oversampling: usize,
) -> Result<CompositeChannelDense> {
    if r.is_empty() {
        return Err(Error::param("empty realization"));
    }
    if m.is_empty() || m.len() % 2 == 0 {
        return Err(Error::param("autocorrelation must have odd, nonzero length"));
    }
    if oversampling == 0 {
        return Err(Error::param("oversampling must be at least 1"));
    }
    let dt = m.sample_interval;
    let ticks: Vec<usize> = r.delays.iter().map(|d| (d / dt).round() as usize).collect();
    let last = *ticks.iter().max().expect("nonempty");
    let mut samples = vec![0.0; last + m.len()];
    for (&tick, &g) in ticks.iter().zip(&r.gains) {
        for (s, mv) in samples[tick..tick + m.len()].iter_mut().zip(&m.samples) {
            *s += g * mv;
        }
    }
    Ok(CompositeChannelDense {
        span_symbols: samples.len().div_ceil(oversampling),
        samples,
        sample_interval: dt,
        oversampling,
        start_tick: -(m.center() as i64),
    })
}

/// Composite response trimmed to the window holding 99 % of its energy.
pub fn composite_response(
    r: &ChannelRealization,
    m: &SampledWaveform,
    oversampling: usize,
) -> Result<CompositeChannelDense> {
    Ok(composite_response_full(r, m, oversampling)?.trimmed(RETAINED_ENERGY))
}
