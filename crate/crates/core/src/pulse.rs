//! Transmit pulses and the matched-filter autocorrelation.
//!
//! Waveforms live on a uniform grid with spacing `T_m = T_s / oversampling`.
//! Every rendered pulse is normalized to unit energy (`sum(s^2) * dt = 1`),
//! so the autocorrelation peak is exactly one.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use crate::error::{Error, Result};

/// Shape of the transmit pulse.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseKind {
    /// Second derivative of a Gaussian, parameterized by `epsilon`.
    GaussianDoublet,
    /// Root raised cosine with roll-off `rolloff`.
    Rrc,
    /// Arbitrary samples on the `T_m` grid; normalized on render.
    UserSamples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// Doublet width parameter, ns.
    pub epsilon: f64,
    pub rolloff: f64,
    /// Total rendered duration in symbols.
    pub span_symbols: usize,
    /// Samples per symbol.
    pub oversampling: usize,
    /// Symbol duration `T_s`, ns.
    pub symbol_duration: f64,
    /// Largest acceptable fraction of RRC energy lost to truncation.
    pub max_tail_energy: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        PulseSpec {
            kind: PulseKind::Rrc,
            epsilon: 0.5,
            rolloff: 0.5,
            span_symbols: 48,
            oversampling: 8,
            symbol_duration: 5.0,
            max_tail_energy: 1e-6,
        }
    }
}

impl PulseSpec {
    pub fn rrc(rolloff: f64) -> Self {
        PulseSpec {
            rolloff,
            ..Default::default()
        }
    }

    pub fn doublet(epsilon: f64) -> Self {
        PulseSpec {
            kind: PulseKind::GaussianDoublet,
            epsilon,
            span_symbols: 8,
            ..Default::default()
        }
    }

    /// Grid spacing `T_m`, ns.
    pub fn sample_interval(&self) -> f64 {
        self.symbol_duration / self.oversampling as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.oversampling == 0 {
            return Err(Error::param("oversampling must be at least 1"));
        }
        if self.span_symbols == 0 {
            return Err(Error::param("span_symbols must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::param(format!(
                "rolloff {} outside [0, 1]",
                self.rolloff
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.symbol_duration > 0.0) || !self.symbol_duration.is_finite() {
            return Err(Error::param("symbol_duration must be positive"));
        }
        if let PulseKind::UserSamples(s) = &self.kind {
            if s.is_empty() {
                return Err(Error::param("user pulse has no samples"));
            }
        }
        Ok(())
    }
}

/// Real samples on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub samples: Vec<f64>,
    /// Grid spacing, ns.
    pub sample_interval: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<f64>, sample_interval: f64) -> Result<Self> {
        if !(sample_interval > 0.0) || !sample_interval.is_finite() {
            return Err(Error::param(format!(
                "sample interval must be positive, got {sample_interval}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(SampledWaveform {
            samples,
            sample_interval,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the middle sample (the time origin for symmetric waveforms).
    pub fn center(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() * self.sample_interval
    }

    /// Time of sample `i` in ns, relative to the center sample.
    pub fn time_of(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.sample_interval
    }

    /// Writes `time_ns,amplitude` rows, centered on the middle sample.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# time_ns amplitude")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(out, "{} {}", self.time_of(i), s)?;
        }
        Ok(())
    }
}

/// Second derivative of a Gaussian: `[1 - 4 pi (t/eps)^2] exp(-2 pi (t/eps)^2)`.
pub fn gaussian_doublet(t: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let x = t / epsilon;
    let x2 = x * x;
    Ok((1.0 - 4.0 * PI * x2) * (-2.0 * PI * x2).exp())
}

/// Root-raised-cosine impulse response at `x = t / T_s` with unit-`T_s`
/// scaling, so that the untruncated pulse has energy `T_s`.
pub fn rrc_impulse(x: f64, rolloff: f64) -> f64 {
    let a = rolloff;
    if x == 0.0 {
        return 1.0 - a + 4.0 * a / PI;
    }
    if a > 0.0 && ((4.0 * a * x).abs() - 1.0).abs() < 1e-12 {
        let arg = PI / (4.0 * a);
        return a * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * x * (1.0 - a)).sin() + 4.0 * a * x * (PI * x * (1.0 + a)).cos();
    let den = PI * x * (1.0 - (4.0 * a * x).powi(2));
    num / den
}

/// Renders the pulse on the `T_m` grid, centered and energy-normalized.
///
/// The sample count is always odd, `2 * (span * oversampling / 2) + 1`, and
/// the two halves are evaluated from the same `|t|` so that the result is
/// exactly even. For RRC pulses the truncated tail energy is checked
/// against `max_tail_energy`.
pub fn render_pulse(spec: &PulseSpec) -> Result<SampledWaveform> {
    spec.validate()?;
    let dt = spec.sample_interval();
    let half = spec.span_symbols * spec.oversampling / 2;

    let raw: Vec<f64> = match &spec.kind {
        PulseKind::UserSamples(s) => s.clone(),
        kind => {
            let one_side: Vec<f64> = (0..=half)
                .map(|k| match kind {
                    PulseKind::GaussianDoublet => {
                        gaussian_doublet(k as f64 * dt, spec.epsilon).expect("validated epsilon")
                    }
                    _ => rrc_impulse(k as f64 / spec.oversampling as f64, spec.rolloff),
                })
                .collect();
            one_side[1..]
                .iter()
                .rev()
                .chain(one_side.iter())
                .copied()
                .collect()
        }
    };

    if spec.kind == PulseKind::Rrc {
        // Untruncated RRC energy is exactly T_s on this grid (band-limited
        // below the sampling Nyquist rate), in unit-T_s scaling that is 1.
        let kept: f64 = raw.iter().map(|s| s * s).sum::<f64>() / spec.oversampling as f64;
        let tail = 1.0 - kept;
        if tail > spec.max_tail_energy {
            return Err(Error::param(format!(
                "RRC truncated at {} symbols loses {tail:.3e} of its energy (limit {:.1e}); \
                 increase span_symbols",
                spec.span_symbols, spec.max_tail_energy
            )));
        }
    }

    let energy: f64 = raw.iter().map(|s| s * s).sum::<f64>() * dt;
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::param("pulse has zero or non-finite energy"));
    }
    let scale = energy.sqrt().recip();
    SampledWaveform::new(raw.into_iter().map(|s| s * scale).collect(), dt)
}

/// Deterministic autocorrelation `m(t) = p(t) * p(-t)` on the pulse grid.
///
/// The output has `2N - 1` samples with lag zero at the center; the
/// negative-lag half is a copy of the positive one.
pub fn matched_autocorrelation(pulse: &SampledWaveform) -> Result<SampledWaveform> {
    if pulse.is_empty() {
        return Err(Error::param("empty pulse"));
    }
    let p = &pulse.samples;
    let n = p.len();
    let positive: Vec<f64> = (0..n)
        .map(|lag| {
            p[..n - lag]
                .iter()
                .zip(&p[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * pulse.sample_interval
        })
        .collect();
    let samples = positive[1..]
        .iter()
        .rev()
        .chain(positive.iter())
        .copied()
        .collect();
    SampledWaveform::new(samples, pulse.sample_interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_even(w: &SampledWaveform) {
        let n = w.len();
        assert_eq!(n % 2, 1);
        for i in 0..n / 2 {
            assert_eq!(w.samples[i], w.samples[n - 1 - i], "asymmetry at {i}");
        }
    }

    #[test]
    fn doublet_values() {
        assert_eq!(gaussian_doublet(0.0, 0.5).unwrap(), 1.0);
        let eps = 0.73;
        let root = eps / (2.0 * PI.sqrt());
        assert_abs_diff_eq!(gaussian_doublet(root, eps).unwrap(), 0.0, epsilon = 1e-15);
        // 40-digit reference evaluation of the same expression.
        assert_abs_diff_eq!(
            gaussian_doublet(0.2, 0.5).unwrap(),
            -0.369_817_240_646_085_119_328_276_422_883_8,
            epsilon = 1e-15
        );
        assert!(gaussian_doublet(0.1, 0.0).is_err());
        assert!(gaussian_doublet(0.1, -1.0).is_err());
    }

    #[test]
    fn doublet_sign_structure() {
        let eps = 0.5;
        let root = eps / (2.0 * PI.sqrt());
        for i in 1..2000 {
            let t = i as f64 * 1e-3;
            let v = gaussian_doublet(t, eps).unwrap();
            if v.abs() < 1e-15 {
                break;
            }
            if t < root * (1.0 - 1e-9) {
                assert!(v > 0.0, "t={t}");
            } else if t > root * (1.0 + 1e-9) {
                assert!(v < 0.0, "t={t}");
            }
            assert_eq!(v, gaussian_doublet(-t, eps).unwrap());
        }
    }

    #[test]
    fn rendered_pulses_have_unit_energy_and_symmetry() {
        let specs = [
            PulseSpec::default(),
            PulseSpec::doublet(0.5),
            PulseSpec {
                oversampling: 5,
                span_symbols: 41,
                ..PulseSpec::rrc(0.5)
            },
            PulseSpec {
                rolloff: 1.0,
                span_symbols: 40,
                ..Default::default()
            },
        ];
        for spec in &specs {
            let p = render_pulse(spec).unwrap();
            assert!((p.energy() - 1.0).abs() < 1e-12, "{spec:?}");
            assert_even(&p);
            let c = p.center();
            assert!(p.samples.iter().all(|s| s.abs() <= p.samples[c]));
        }
    }

    #[test]
    fn rrc_center_is_maximum() {
        let p = render_pulse(&PulseSpec::rrc(0.5)).unwrap();
        let max = p.samples.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(p.samples[p.center()], max);
        assert_eq!(p.len(), 48 * 8 + 1);
    }

    #[test]
    fn short_rrc_is_rejected_for_tail_energy() {
        let spec = PulseSpec {
            span_symbols: 8,
            ..PulseSpec::rrc(0.5)
        };
        assert!(matches!(render_pulse(&spec), Err(Error::Parameter(_))));
        let relaxed = PulseSpec {
            max_tail_energy: 1e-3,
            ..spec
        };
        assert!(render_pulse(&relaxed).is_ok());
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            PulseSpec {
                oversampling: 0,
                ..Default::default()
            },
            PulseSpec {
                span_symbols: 0,
                ..Default::default()
            },
            PulseSpec {
                rolloff: 1.5,
                ..Default::default()
            },
            PulseSpec {
                epsilon: 0.0,
                ..Default::default()
            },
            PulseSpec {
                kind: PulseKind::UserSamples(vec![]),
                ..Default::default()
            },
            PulseSpec {
                kind: PulseKind::UserSamples(vec![0.0, 0.0]),
                ..Default::default()
            },
        ] {
            assert!(render_pulse(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn user_samples_are_normalized() {
        let spec = PulseSpec {
            kind: PulseKind::UserSamples(vec![1.0, 2.0, 1.0]),
            ..Default::default()
        };
        let p = render_pulse(&spec).unwrap();
        assert!((p.energy() - 1.0).abs() < 1e-12);
        assert_eq!(p.samples[0], p.samples[2]);
    }

    #[test]
    fn rrc_half_amplitude_point_by_dft() {
        // |P(f)| of an RRC drops to 1/sqrt(2) of its DC value at f = 1/(2 T_s).
        let spec = PulseSpec::rrc(0.5);
        let p = render_pulse(&spec).unwrap();
        let dt = p.sample_interval;
        let ts = spec.symbol_duration;
        let magnitude = |f: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, s) in p.samples.iter().enumerate() {
                let arg = -2.0 * PI * f * p.time_of(i);
                re += s * arg.cos();
                im += s * arg.sin();
            }
            (re * re + im * im).sqrt() * dt
        };
        let dc = magnitude(0.0);
        let df = 1e-4 / ts;
        let mut f = 0.0;
        while magnitude(f) / dc > FRAC_1_SQRT_2 {
            f += df;
        }
        let target = 1.0 / (2.0 * ts);
        assert!((f - target).abs() < 2e-3 / ts, "f={f} target={target}");
    }

    #[test]
    fn autocorrelation_peak_and_symmetry() {
        let p = render_pulse(&PulseSpec::rrc(0.5)).unwrap();
        let m = matched_autocorrelation(&p).unwrap();
        assert_eq!(m.len(), 2 * p.len() - 1);
        assert!((m.samples[m.center()] - 1.0).abs() < 1e-12);
        assert_even(&m);

        let d = render_pulse(&PulseSpec::doublet(0.5)).unwrap();
        let md = matched_autocorrelation(&d).unwrap();
        assert!((md.samples[md.center()] - 1.0).abs() < 1e-12);
        assert_even(&md);
        assert!(matched_autocorrelation(&SampledWaveform {
            samples: vec![],
            sample_interval: 1.0
        })
        .is_err());
    }

    #[test]
    fn raised_cosine_nyquist_zeros() {
        // The RRC autocorrelation is a raised cosine, zero at every nonzero
        // multiple of T_s. The truncation error falls off as span^-3, so a
        // long pulse is needed to see the zeros at 1e-9.
        let spec = PulseSpec {
            span_symbols: 512,
            ..PulseSpec::rrc(0.5)
        };
        let p = render_pulse(&spec).unwrap();
        let m = matched_autocorrelation(&p).unwrap();
        let c = m.center();
        for k in 1..=20 {
            let lag = k * spec.oversampling;
            assert!(m.samples[c + lag].abs() < 1e-9, "k={k}: {}", m.samples[c + lag]);
            assert!(m.samples[c - lag].abs() < 1e-9);
        }
    }

    #[test]
    fn dump_has_one_row_per_sample() {
        let p = render_pulse(&PulseSpec::doublet(0.5)).unwrap();
        let mut buf = Vec::new();
        p.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), p.len());
        let mid: Vec<f64> = rows[p.center()]
            .split_whitespace()
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(mid[0], 0.0);
        assert_eq!(mid[1], p.samples[p.center()]);
    }
}
