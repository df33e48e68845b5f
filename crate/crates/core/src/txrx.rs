//! BPSK framing, the matched-filter output waveform, and Rake combining.
//!
//! Waveform samples live on the `T_m` grid. Symbol `k` of a frame starts at
//! grid index `k * oversampling`, so sample `i` of a matched-filter output
//! built from a composite response `h` is `sum_k d(k) h[i - k * OS]` plus
//! noise. A Rake finger at delay `tau` reads sample `n * OS + tau` for
//! symbol `n`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::CompositeChannelDense;
use crate::error::{Error, Result};
use crate::pulse::SampledWaveform;
use crate::rng::from_seed;

/// Packet layout. The training prefix is part of the packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub payload_symbols: usize,
    pub training_symbols: usize,
    /// `T_s`, ns.
    pub symbol_duration: f64,
}

impl Default for FrameSpec {
    /// 2560-symbol packets with a 512-symbol training prefix at 200 Mbps.
    fn default() -> Self {
        FrameSpec {
            payload_symbols: 2048,
            training_symbols: 512,
            symbol_duration: 5.0,
        }
    }
}

impl FrameSpec {
    pub fn packet_len(&self) -> usize {
        self.payload_symbols + self.training_symbols
    }

    pub fn validate(&self) -> Result<()> {
        if self.packet_len() == 0 {
            return Err(Error::param("packet has no symbols"));
        }
        if !(self.symbol_duration > 0.0) {
            return Err(Error::param("symbol duration must be positive"));
        }
        Ok(())
    }
}

/// One packet of `+1/-1` symbols; the first `training` are the training prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub symbols: Vec<f64>,
    pub training: usize,
}

impl Frame {
    pub fn training_symbols(&self) -> &[f64] {
        &self.symbols[..self.training]
    }

    pub fn payload(&self) -> &[f64] {
        &self.symbols[self.training..]
    }
}

/// `n` i.i.d. equiprobable BPSK symbols.
pub fn random_symbols<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

pub fn generate_frame(spec: &FrameSpec, seed: u64) -> Result<Frame> {
    spec.validate()?;
    let mut rng = from_seed(seed);
    Ok(Frame {
        symbols: random_symbols(spec.packet_len(), &mut rng),
        training: spec.training_symbols,
    })
}

/// `N0` for a given `Eb/N0` in dB with unit bit energy.
pub fn n0_from_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Matched-filter output for a symbol sequence through `dense`, plus white
/// Gaussian noise of variance `N0/2` per grid sample.
///
/// The output has `(symbols.len() - 1) * OS + dense.len()` samples. With
/// `n0 == 0` no random numbers are drawn.
pub fn matched_filter_output<R: Rng>(
    symbols: &[f64],
    dense: &CompositeChannelDense,
    n0: f64,
    rng: &mut R,
) -> Result<SampledWaveform> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::param(format!("N0 must be finite and >= 0, got {n0}")));
    }
    if dense.is_empty() || dense.oversampling == 0 {
        return Err(Error::param("empty composite response"));
    }
    if symbols.is_empty() {
        return SampledWaveform::new(Vec::new(), dense.sample_interval);
    }
    let os = dense.oversampling;
    let mut out = vec![0.0; (symbols.len() - 1) * os + dense.len()];
    for (k, &d) in symbols.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for (o, h) in out[k * os..k * os + dense.len()].iter_mut().zip(&dense.samples) {
            *o += d * h;
        }
    }
    if n0 > 0.0 {
        let noise = Normal::new(0.0, (n0 / 2.0).sqrt()).map_err(|e| Error::param(e.to_string()))?;
        for o in &mut out {
            *o += noise.sample(rng);
        }
    }
    SampledWaveform::new(out, dense.sample_interval)
}

/// Rake finger positions (grid indices into the composite response) and
/// combining weights. The sampling offset `t0` is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RakePlan {
    pub finger_delays: Vec<usize>,
    pub weights: Vec<f64>,
    /// Set when fewer fingers than requested could be placed.
    pub truncated: bool,
}

impl RakePlan {
    pub fn new(finger_delays: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if finger_delays.len() != weights.len() {
            return Err(Error::param("finger delays and weights differ in length"));
        }
        if finger_delays.is_empty() {
            return Err(Error::param("a Rake plan needs at least one finger"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("non-finite finger weight"));
        }
        let mut sorted = finger_delays.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("finger delays must be distinct"));
        }
        Ok(RakePlan {
            finger_delays,
            weights,
            truncated: false,
        })
    }

    pub fn fingers(&self) -> usize {
        self.finger_delays.len()
    }

    pub fn max_delay(&self) -> usize {
        self.finger_delays.iter().copied().max().unwrap_or(0)
    }
}

/// Selective Rake with maximal-ratio weights: the `l` grid positions of
/// largest `|h|`, ties going to the earlier position.
///
/// If the response has fewer than `l` nonzero samples, all of them are
/// taken and `truncated` is set.
pub fn select_fingers(dense: &CompositeChannelDense, l: usize) -> Result<RakePlan> {
    if l == 0 {
        return Err(Error::param("at least one finger is required"));
    }
    let mut order: Vec<usize> = (0..dense.len()).filter(|&i| dense.samples[i] != 0.0).collect();
    if order.is_empty() {
        return Err(Error::param("composite response is identically zero"));
    }
    order.sort_by(|&a, &b| {
        dense.samples[b]
            .abs()
            .total_cmp(&dense.samples[a].abs())
            .then(a.cmp(&b))
    });
    let truncated = order.len() < l;
    order.truncate(l);
    let weights = order.iter().map(|&i| dense.samples[i]).collect();
    Ok(RakePlan {
        finger_delays: order,
        weights,
        truncated,
    })
}

/// All-Rake: a finger on every nonzero sample.
pub fn all_fingers(dense: &CompositeChannelDense) -> Result<RakePlan> {
    let mut plan = select_fingers(dense, dense.len().max(1))?;
    plan.truncated = false;
    Ok(plan)
}

/// Symbol-rate Rake output `y[n] = sum_l beta_l r[n * OS + tau_l]` for
/// `n < frame_len`.
pub fn rake_combine(
    waveform: &SampledWaveform,
    plan: &RakePlan,
    oversampling: usize,
    frame_len: usize,
) -> Result<Vec<f64>> {
    if frame_len == 0 {
        return Ok(Vec::new());
    }
    let last = (frame_len - 1) * oversampling + plan.max_delay();
    if last >= waveform.len() {
        return Err(Error::param(format!(
            "finger at grid index {last} is past the end of a {}-sample waveform",
            waveform.len()
        )));
    }
    let r = &waveform.samples;
    Ok((0..frame_len)
        .map(|n| {
            plan.finger_delays
                .iter()
                .zip(&plan.weights)
                .map(|(&tau, &b)| b * r[n * oversampling + tau])
                .sum()
        })
        .collect())
}

/// Noise variance multiplier `sum_l beta_l^2` at the Rake output.
pub fn rake_noise_scale(plan: &RakePlan) -> f64 {
    plan.weights.iter().map(|b| b * b).sum()
}

/// Symbol-spaced equivalent channel `y[n] = sum_k alpha_k d(n - k)`, with
/// `k` running from `-n1` (pre-cursors) to `n2` (post-cursors).
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeChannel {
    /// `alpha[i]` is `alpha_{i - n1}`.
    pub alpha: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
}

impl CompositeChannel {
    /// Builds a channel from taps `alpha_{-n1} .. alpha_{n2}`.
    pub fn new(alpha: Vec<f64>, n1: usize) -> Result<Self> {
        if n1 >= alpha.len() {
            return Err(Error::param("n1 must index into alpha"));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::param("non-finite alpha"));
        }
        if !(alpha[n1] > 0.0) {
            return Err(Error::param(format!(
                "alpha_0 must be positive, got {}",
                alpha[n1]
            )));
        }
        let n2 = alpha.len() - 1 - n1;
        Ok(CompositeChannel { alpha, n1, n2 })
    }

    /// A pure gain with no intersymbol interference.
    pub fn identity() -> Self {
        CompositeChannel {
            alpha: vec![1.0],
            n1: 0,
            n2: 0,
        }
    }

    /// `alpha_k`, zero outside `-n1..=n2`.
    pub fn at(&self, k: i64) -> f64 {
        usize::try_from(k + self.n1 as i64)
            .ok()
            .and_then(|i| self.alpha.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha[self.n1]
    }

    /// `rho(m) = sum_k alpha_k alpha_{k+m}`.
    pub fn autocorrelation(&self, m: i64) -> f64 {
        let m = m.unsigned_abs() as usize;
        self.alpha
            .iter()
            .zip(self.alpha.iter().skip(m))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Noiseless output `sum_k alpha_k d(n - k)` for `n` in `0..symbols.len()`.
    pub fn convolve(&self, symbols: &[f64]) -> Vec<f64> {
        let n = symbols.len() as i64;
        (0..n)
            .map(|i| {
                (-(self.n1 as i64)..=self.n2 as i64)
                    .filter(|k| (0..n).contains(&(i - k)))
                    .map(|k| self.at(k) * symbols[(i - k) as usize])
                    .sum()
            })
            .collect()
    }
}

/// Relative magnitude below which `alpha_k` is dropped from the edges.
pub const DEFAULT_ALPHA_THRESHOLD: f64 = 1e-6;

/// `alpha_k = sum_l beta_l h[k * OS + tau_l]`, trimmed to the taps with
/// `|alpha_k| > 1e-6 |alpha_0|`.
pub fn composite_coefficients(
    dense: &CompositeChannelDense,
    plan: &RakePlan,
) -> Result<CompositeChannel> {
    composite_coefficients_with(dense, plan, DEFAULT_ALPHA_THRESHOLD)
}

/// As [`composite_coefficients`] with an explicit relative threshold; `0`
/// keeps every nonzero tap.
pub fn composite_coefficients_with(
    dense: &CompositeChannelDense,
    plan: &RakePlan,
    rel_threshold: f64,
) -> Result<CompositeChannel> {
    if !(rel_threshold >= 0.0) {
        return Err(Error::param("threshold must be >= 0"));
    }
    let os = dense.oversampling as i64;
    if let Some(&bad) = plan.finger_delays.iter().find(|&&t| t >= dense.len()) {
        return Err(Error::param(format!(
            "finger at {bad} outside a {}-sample response",
            dense.len()
        )));
    }
    let len = dense.len() as i64;
    let k_min = -(plan.max_delay() as i64 / os);
    let k_max = (len - 1) / os;
    let alpha_k = |k: i64| -> f64 {
        plan.finger_delays
            .iter()
            .zip(&plan.weights)
            .map(|(&tau, &b)| b * dense.at(k * os + tau as i64))
            .sum()
    };
    let full: Vec<f64> = (k_min..=k_max).map(alpha_k).collect();
    let zero = (-k_min) as usize;
    let a0 = full[zero];
    if !(a0 > 0.0) {
        return Err(Error::Numerical(format!(
            "alpha_0 = {a0} is not positive; the Rake plan does not match this channel"
        )));
    }
    let keep = |a: &f64| a.abs() > rel_threshold * a0;
    let first = full.iter().position(keep).expect("alpha_0 passes");
    let last = full.iter().rposition(keep).expect("alpha_0 passes");
    CompositeChannel::new(full[first..=last].to_vec(), zero - first)
}

/// Symbol-rate shortcut: `alpha (x) d` plus white Gaussian noise of variance
/// `sigma2` per output.
pub fn symbol_rate_output<R: Rng>(
    symbols: &[f64],
    comp: &CompositeChannel,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::param("noise variance must be >= 0"));
    }
    let mut y = comp.convolve(symbols);
    if sigma2 > 0.0 {
        let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::param(e.to_string()))?;
        for v in &mut y {
            *v += noise.sample(rng);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{composite_response, composite_response_full, generate_realization, ChannelRealization, SvParams};
    use crate::pulse::{matched_autocorrelation, render_pulse, PulseSpec};
    use crate::rng::substream;
    use proptest::prelude::*;

    fn m() -> SampledWaveform {
        matched_autocorrelation(&render_pulse(&PulseSpec::default()).unwrap()).unwrap()
    }

    fn cm3_dense(seed: u64) -> CompositeChannelDense {
        composite_response(&generate_realization(&SvParams::cm3(), seed).unwrap(), &m(), 8).unwrap()
    }

    fn dense_from(samples: Vec<f64>) -> CompositeChannelDense {
        CompositeChannelDense {
            span_symbols: samples.len().div_ceil(8),
            samples,
            sample_interval: 0.625,
            oversampling: 8,
            start_tick: 0,
        }
    }

    #[test]
    fn frames_are_deterministic_and_balanced() {
        let spec = FrameSpec::default();
        assert_eq!(spec.packet_len(), 2560);
        let a = generate_frame(&spec, 11).unwrap();
        assert_eq!(a, generate_frame(&spec, 11).unwrap());
        assert_eq!(a.training_symbols().len(), 512);
        assert_eq!(a.payload().len(), 2048);

        let n = 1_000_000;
        let s = random_symbols(n, &mut from_seed(5));
        assert!(s.iter().all(|v| *v == 1.0 || *v == -1.0));
        let bound = 4.0 / (n as f64).sqrt();
        assert!((s.iter().sum::<f64>() / n as f64).abs() < bound);
        for lag in 1..4 {
            let c: f64 = s.iter().zip(&s[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            assert!(c.abs() < bound, "lag {lag}: {c}");
        }
    }

    #[test]
    fn single_symbol_single_path_is_m() {
        let m = m();
        let dense = composite_response_full(&ChannelRealization::single_path(), &m, 8).unwrap();
        let out = matched_filter_output(&[1.0], &dense, 0.0, &mut from_seed(0)).unwrap();
        assert_eq!(out.samples, m.samples);
    }

    #[test]
    fn waveform_matches_direct_convolution() {
        let dense = cm3_dense(7);
        let symbols = random_symbols(40, &mut from_seed(1));
        let out = matched_filter_output(&symbols, &dense, 0.0, &mut from_seed(0)).unwrap();
        for (i, v) in out.samples.iter().enumerate() {
            let mut expect = 0.0;
            for (j, h) in dense.samples.iter().enumerate() {
                if i >= j && (i - j) % 8 == 0 && (i - j) / 8 < symbols.len() {
                    expect += symbols[(i - j) / 8] * h;
                }
            }
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_only_variance() {
        let dense = dense_from(vec![1.0]);
        let n = 1_000_000;
        let out =
            matched_filter_output(&vec![0.0; n], &dense, 2.0, &mut from_seed(3)).unwrap();
        let var = out.samples.iter().map(|v| v * v).sum::<f64>() / out.len() as f64;
        // Standard error of a unit-variance sample variance is sqrt(2/n).
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        assert!(matched_filter_output(&[1.0], &dense, -1.0, &mut from_seed(0)).is_err());
    }

    #[test]
    fn one_finger_is_global_peak() {
        let dense = cm3_dense(2);
        let plan = select_fingers(&dense, 1).unwrap();
        let peak = (0..dense.len())
            .max_by(|&a, &b| dense.samples[a].abs().total_cmp(&dense.samples[b].abs()).then(b.cmp(&a)))
            .unwrap();
        assert_eq!(plan.finger_delays, vec![peak]);
        assert_eq!(plan.weights, vec![dense.samples[peak]]);
    }

    #[test]
    fn ties_go_to_earlier_position() {
        let dense = dense_from(vec![0.0, 0.5, -0.5, 0.2, 0.5]);
        let plan = select_fingers(&dense, 2).unwrap();
        assert_eq!(plan.finger_delays, vec![1, 2]);
        let all = select_fingers(&dense, 10).unwrap();
        assert!(all.truncated);
        assert_eq!(all.finger_delays, vec![1, 2, 4, 3]);
        assert!(!all_fingers(&dense).unwrap().truncated);
        assert!(select_fingers(&dense, 0).is_err());
    }

    #[test]
    fn top_l_matches_exhaustive_sort() {
        for seed in 0..30 {
            let dense = cm3_dense(seed);
            let plan = select_fingers(&dense, 10).unwrap();
            let mut idx: Vec<usize> = (0..dense.len()).collect();
            idx.sort_by(|&a, &b| {
                let (x, y) = (dense.samples[a].abs(), dense.samples[b].abs());
                y.partial_cmp(&x).unwrap().then(a.cmp(&b))
            });
            let mut want = idx[..10].to_vec();
            let mut got = plan.finger_delays.clone();
            want.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, want);
            for (&t, &b) in plan.finger_delays.iter().zip(&plan.weights) {
                assert_eq!(b, dense.samples[t]);
            }
        }
    }

    #[test]
    fn single_path_single_finger_coefficients() {
        let dense = composite_response(&ChannelRealization::single_path(), &m(), 8).unwrap();
        let plan = select_fingers(&dense, 1).unwrap();
        let comp = composite_coefficients(&dense, &plan).unwrap();
        assert_eq!((comp.n1, comp.n2), (0, 0));
        assert!((comp.alpha0() - 1.0).abs() < 1e-12);

        let symbols = [1.0];
        let full = composite_response_full(&ChannelRealization::single_path(), &m(), 8).unwrap();
        let out = matched_filter_output(&symbols, &full, 0.0, &mut from_seed(0)).unwrap();
        let p = select_fingers(&full, 1).unwrap();
        let y = rake_combine(&out, &p, 8, 1).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let dense = cm3_dense(4);
        let mut plan = select_fingers(&dense, 5).unwrap();
        plan.weights.iter_mut().for_each(|w| *w = 0.0);
        let symbols = random_symbols(30, &mut from_seed(2));
        let out = matched_filter_output(&symbols, &dense, 0.0, &mut from_seed(0)).unwrap();
        assert!(rake_combine(&out, &plan, 8, 30).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn out_of_range_finger_is_error() {
        let dense = dense_from(vec![1.0, 0.5]);
        let out = matched_filter_output(&[1.0, -1.0], &dense, 0.0, &mut from_seed(0)).unwrap();
        let plan = RakePlan::new(vec![20], vec![1.0]).unwrap();
        assert!(rake_combine(&out, &plan, 8, 2).is_err());
        assert!(composite_coefficients(&dense, &plan).is_err());
        assert!(RakePlan::new(vec![1, 1], vec![1.0, 1.0]).is_err());
    }

    fn fir_mismatch(seed: u64, l: usize) -> f64 {
        let dense = cm3_dense(seed);
        let plan = select_fingers(&dense, l).unwrap();
        let comp = composite_coefficients_with(&dense, &plan, 0.0).unwrap();
        let symbols = random_symbols(200, &mut substream(seed, &[1]));
        let out = matched_filter_output(&symbols, &dense, 0.0, &mut from_seed(0)).unwrap();
        let y = rake_combine(&out, &plan, 8, symbols.len()).unwrap();
        let fir = comp.convolve(&symbols);
        // Pre-cursor taps reach past the last symbol; those outputs see
        // fewer terms in both, so every index compares.
        y.iter().zip(&fir).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn noiseless_rake_is_symbol_rate_fir() {
        for seed in 0..20 {
            for l in [1, 5, 10, 40] {
                let err = fir_mismatch(seed, l);
                assert!(err < 1e-9, "seed {seed} L {l}: {err}");
            }
        }
    }

    #[test]
    fn finger_noise_is_uncorrelated() {
        let dense = cm3_dense(9);
        let plan = select_fingers(&dense, 4).unwrap();
        let n = 1_000_000;
        let out = matched_filter_output(&vec![0.0; n], &dense, 2.0, &mut from_seed(8)).unwrap();
        let finger = |l: usize| -> Vec<f64> {
            (0..n).map(|k| out.samples[k * 8 + plan.finger_delays[l]]).collect()
        };
        let a = finger(0);
        let b = finger(1);
        let c: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(c.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn alpha0_is_energy_and_grows_with_l() {
        let dense = cm3_dense(12);
        let arake = composite_coefficients(&dense, &all_fingers(&dense).unwrap()).unwrap();
        let mut prev = 0.0;
        for l in 1..=30 {
            let plan = select_fingers(&dense, l).unwrap();
            let comp = composite_coefficients(&dense, &plan).unwrap();
            let direct: f64 = plan.weights.iter().map(|b| b * b).sum();
            assert!((comp.alpha0() - direct).abs() < 1e-12);
            assert!((rake_noise_scale(&plan) - direct).abs() < 1e-12);
            assert!(comp.alpha0() >= prev);
            assert!(arake.alpha0() >= comp.alpha0());
            prev = comp.alpha0();
        }
    }

    #[test]
    fn noise_scale_examples() {
        let unit = RakePlan::new(vec![0], vec![1.0]).unwrap();
        assert_eq!(rake_noise_scale(&unit), 1.0);
        let two = RakePlan::new(vec![0, 3], vec![0.6, 0.8]).unwrap();
        assert!((rake_noise_scale(&two) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cm3_coefficient_span_is_bounded() {
        let mut excess = Vec::new();
        for seed in 0..100 {
            let dense = cm3_dense(seed);
            let comp = composite_coefficients(&dense, &select_fingers(&dense, 10).unwrap()).unwrap();
            let taps = comp.n1 + comp.n2 + 1;
            // alpha is a correlation of the response with itself at finger
            // offsets, so it can never be longer than this.
            assert!(taps < 2 * dense.span_symbols, "seed {seed}");
            excess.push(taps as i64 - dense.span_symbols as i64);
        }
        excess.sort_unstable();
        assert!(excess[excess.len() / 2] <= 1, "{excess:?}");
    }

    #[test]
    fn composite_channel_validation() {
        assert!(CompositeChannel::new(vec![0.5, -1.0], 1).is_err());
        assert!(CompositeChannel::new(vec![1.0], 1).is_err());
        let c = CompositeChannel::new(vec![0.2, 1.0, 0.5], 1).unwrap();
        assert_eq!((c.n1, c.n2), (1, 1));
        assert_eq!(c.at(-1), 0.2);
        assert_eq!(c.at(2), 0.0);
        assert!((c.autocorrelation(1) - 0.7).abs() < 1e-15);
        assert_eq!(c.convolve(&[1.0, 0.0, 0.0]), vec![1.0, 0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn rake_output_is_linear_in_symbols(seed in 0u64..1000, scale in -3.0f64..3.0) {
            let dense = cm3_dense(seed);
            let plan = select_fingers(&dense, 6).unwrap();
            let s = random_symbols(20, &mut from_seed(seed));
            let scaled: Vec<f64> = s.iter().map(|v| v * scale).collect();
            let y = rake_combine(&matched_filter_output(&s, &dense, 0.0, &mut from_seed(0)).unwrap(), &plan, 8, 20).unwrap();
            let ys = rake_combine(&matched_filter_output(&scaled, &dense, 0.0, &mut from_seed(0)).unwrap(), &plan, 8, 20).unwrap();
            for (a, b) in y.iter().zip(&ys) {
                prop_assert!((a * scale - b).abs() < 1e-9);
            }
        }
    }
}
