//! MMSE linear and decision-feedback equalizers over the symbol-rate Rake
//! output, LMS training, and hard-decision detection.
//!
//! The soft estimate of `d(n)` is `sum_r c_r y(n - r)` over feed-forward lags
//! `r = -K1 ..= K2` (LE) or `r = -K1 ..= 0` (DFE), minus `sum_i b_i d(n - i)`
//! over past decisions for `i = 1 ..= K2` (DFE only). With
//! `y(n) = sum_k alpha_k d(n - k) + w(n)` and white `w` of variance
//! `sigma^2 = noise_scale * N0 / 2`:
//!
//! - `R_ij = rho(r_j - r_i) + sigma^2 delta_ij`, `rho` the autocorrelation of alpha,
//! - `p_r = alpha_{-r}`,
//! - `U_ir = alpha_{i - r}`, the correlation of `d(n - i)` with `y(n - r)`.
//!
//! The LE solves `R c = p`. The DFE solves `(R_F - U^T U) c = p_F` on its
//! reduced lag set and sets `b = U c`. In both cases `J_min = 1 - p^T c`.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::txrx::CompositeChannel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualizerKind {
    Le,
    Dfe,
}

impl EqualizerKind {
    pub fn label(self) -> &'static str {
        match self {
            EqualizerKind::Le => "LE",
            EqualizerKind::Dfe => "DFE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerDesign {
    pub kind: EqualizerKind,
    pub k1: usize,
    pub k2: usize,
    /// `c_{-K1} ..` up to `c_{K2}` (LE) or `c_0` (DFE).
    pub feedforward: Vec<f64>,
    /// `b_1 .. b_{K2}`; empty for the LE.
    pub feedback: Vec<f64>,
    pub j_min: f64,
    pub sigma_d2: f64,
}

impl EqualizerDesign {
    /// Largest feed-forward lag.
    pub fn ff_max_lag(&self) -> i64 {
        match self.kind {
            EqualizerKind::Le => self.k2 as i64,
            EqualizerKind::Dfe => 0,
        }
    }

    pub fn ff_lags(&self) -> impl Iterator<Item = i64> {
        -(self.k1 as i64)..=self.ff_max_lag()
    }

    /// `c_r`, zero for lags outside the feed-forward section.
    pub fn ff_at(&self, r: i64) -> f64 {
        usize::try_from(r + self.k1 as i64)
            .ok()
            .and_then(|i| self.feedforward.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// Single tap of unit gain; decisions are then `sign(y)`.
    pub fn passthrough() -> Self {
        EqualizerDesign {
            kind: EqualizerKind::Le,
            k1: 0,
            k2: 0,
            feedforward: vec![1.0],
            feedback: Vec::new(),
            j_min: f64::NAN,
            sigma_d2: 1.0,
        }
    }

    /// `# jmin=<f> kind=<LE|DFE>` header, then `lag,coefficient` rows. For
    /// a DFE, positive lags are the feedback taps `b_i`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# jmin={} kind={}\n", self.j_min, self.kind.label());
        for (r, c) in self.ff_lags().zip(&self.feedforward) {
            writeln!(out, "{r},{c}").expect("writing to a String");
        }
        for (i, b) in self.feedback.iter().enumerate() {
            writeln!(out, "{},{b}", i + 1).expect("writing to a String");
        }
        out
    }
}

fn sigma2(noise_scale: f64, n0: f64) -> Result<f64> {
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(Error::param(format!("noise scale must be >= 0, got {noise_scale}")));
    }
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::param(format!("N0 must be >= 0, got {n0}")));
    }
    Ok(noise_scale * n0 / 2.0)
}

/// Solves the symmetric positive definite system `a x = b`, retrying once
/// with diagonal loading of `1e-12 * trace / dim`.
fn spd_solve(mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let dim = a.nrows();
    let jitter = 1e-12 * a.trace() / dim as f64;
    for i in 0..dim {
        a[(i, i)] += jitter;
    }
    match a.cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::Numerical(format!(
            "{dim}x{dim} normal equations are singular even after diagonal loading"
        ))),
    }
}

/// `R + N` over the given lags.
fn correlation_matrix(comp: &CompositeChannel, lags: &[i64], s2: f64) -> DMatrix<f64> {
    let n = lags.len();
    DMatrix::from_fn(n, n, |i, j| {
        comp.autocorrelation(lags[j] - lags[i]) + if i == j { s2 } else { 0.0 }
    })
}

fn check_design_inputs(comp: &CompositeChannel) -> Result<()> {
    if !(comp.alpha0() > 0.0) {
        return Err(Error::param("alpha_0 must be positive"));
    }
    Ok(())
}

/// MMSE linear equalizer with lags `-K1 ..= K2`.
pub fn mmse_le_design(
    comp: &CompositeChannel,
    noise_scale: f64,
    n0: f64,
    k1: usize,
    k2: usize,
) -> Result<EqualizerDesign> {
    check_design_inputs(comp)?;
    let s2 = sigma2(noise_scale, n0)?;
    let lags: Vec<i64> = (-(k1 as i64)..=k2 as i64).collect();
    let r = correlation_matrix(comp, &lags, s2);
    let p = DVector::from_iterator(lags.len(), lags.iter().map(|&l| comp.at(-l)));
    let c = spd_solve(r, &p)?;
    let j_min = (1.0 - p.dot(&c)).max(0.0);
    Ok(EqualizerDesign {
        kind: EqualizerKind::Le,
        k1,
        k2,
        feedforward: c.iter().copied().collect(),
        feedback: Vec::new(),
        j_min,
        sigma_d2: 1.0,
    })
}

/// MMSE decision-feedback equalizer: feed-forward lags `-K1 ..= 0`, `K2`
/// feedback taps, assuming correct past decisions.
pub fn mmse_dfe_design(
    comp: &CompositeChannel,
    noise_scale: f64,
    n0: f64,
    k1: usize,
    k2: usize,
) -> Result<EqualizerDesign> {
    check_design_inputs(comp)?;
    let s2 = sigma2(noise_scale, n0)?;
    let lags: Vec<i64> = (-(k1 as i64)..=0).collect();
    let u = DMatrix::from_fn(k2, lags.len(), |i, j| comp.at(i as i64 + 1 - lags[j]));
    let r = correlation_matrix(comp, &lags, s2) - u.transpose() * &u;
    let p = DVector::from_iterator(lags.len(), lags.iter().map(|&l| comp.at(-l)));
    let c = spd_solve(r, &p)?;
    let b = &u * &c;
    let j_min = (1.0 - p.dot(&c)).max(0.0);
    Ok(EqualizerDesign {
        kind: EqualizerKind::Dfe,
        k1,
        k2,
        feedforward: c.iter().copied().collect(),
        feedback: b.iter().copied().collect(),
        j_min,
        sigma_d2: 1.0,
    })
}

/// Combined channel and equalizer response `q_m`, and the output noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct OverallResponse {
    /// `q[i]` is `q_{i - lead}`.
    pub q: Vec<f64>,
    pub lead: usize,
    pub sigma_w2: f64,
}

impl OverallResponse {
    pub fn q0(&self) -> f64 {
        self.q[self.lead]
    }

    pub fn at(&self, m: i64) -> f64 {
        usize::try_from(m + self.lead as i64)
            .ok()
            .and_then(|i| self.q.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// All `q_m` with `m != 0`.
    pub fn interference(&self) -> impl Iterator<Item = f64> + '_ {
        self.q
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.lead)
            .map(|(_, q)| *q)
    }
}

/// `q = c (x) alpha`, with `q_1 .. q_{K2}` forced to zero for a DFE (the
/// feedback removes them), and `sigma_w^2 = sum c^2 * noise_scale * N0 / 2`.
pub fn overall_response(
    design: &EqualizerDesign,
    comp: &CompositeChannel,
    noise_scale: f64,
    n0: f64,
) -> Result<OverallResponse> {
    let s2 = sigma2(noise_scale, n0)?;
    let lo = -(comp.n1 as i64) - design.k1 as i64;
    let hi = comp.n2 as i64 + design.ff_max_lag();
    let mut q: Vec<f64> = (lo..=hi)
        .map(|m| design.ff_lags().map(|r| design.ff_at(r) * comp.at(m - r)).sum())
        .collect();
    let lead = (-lo) as usize;
    if design.kind == EqualizerKind::Dfe {
        for m in 1..=design.k2 {
            if let Some(v) = q.get_mut(lead + m) {
                *v = 0.0;
            }
        }
    }
    let energy: f64 = design.feedforward.iter().map(|c| c * c).sum();
    Ok(OverallResponse {
        q,
        lead,
        sigma_w2: energy * s2,
    })
}

fn tap_input(y: &[f64], i: i64) -> f64 {
    usize::try_from(i).ok().and_then(|i| y.get(i)).copied().unwrap_or(0.0)
}

fn ff_output(design: &EqualizerDesign, y: &[f64], n: i64) -> f64 {
    design
        .ff_lags()
        .zip(&design.feedforward)
        .map(|(r, c)| c * tap_input(y, n - r))
        .sum()
}

/// Soft estimates `d_hat(n)` for `n` in `range`, with the feedback section
/// fed from `past` (true symbols or decisions, same indexing as `y`).
pub fn soft_outputs(
    y: &[f64],
    design: &EqualizerDesign,
    range: Range<usize>,
    past: &[f64],
) -> Vec<f64> {
    range
        .map(|n| {
            let n = n as i64;
            let fb: f64 = design
                .feedback
                .iter()
                .enumerate()
                .map(|(i, b)| b * tap_input(past, n - 1 - i as i64))
                .sum();
            ff_output(design, y, n) - fb
        })
        .collect()
}

fn slicer(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Hard decisions for every index of `y`.
pub fn detect(y: &[f64], design: &EqualizerDesign) -> Vec<f64> {
    detect_range(y, design, 0..y.len())
}

/// Hard decisions for `n` in `range`. The DFE feeds back its own
/// decisions; symbols before `range` count as zero.
pub fn detect_range(y: &[f64], design: &EqualizerDesign, range: Range<usize>) -> Vec<f64> {
    let start = range.start;
    let mut out: Vec<f64> = Vec::with_capacity(range.len());
    for n in range {
        let mut v = ff_output(design, y, n as i64);
        for (i, b) in design.feedback.iter().enumerate() {
            let past = n as i64 - 1 - i as i64;
            if past >= start as i64 {
                v -= b * out[past as usize - start];
            }
        }
        out.push(slicer(v));
    }
    out
}

/// Mean of `(d(n) - d_hat(n))^2` over `range`, feedback fed from the true
/// symbols.
pub fn empirical_mse(y: &[f64], symbols: &[f64], design: &EqualizerDesign, range: Range<usize>) -> f64 {
    let count = range.len();
    let soft = soft_outputs(y, design, range.clone(), symbols);
    soft.iter()
        .zip(&symbols[range])
        .map(|(s, d)| (d - s).powi(2))
        .sum::<f64>()
        / count as f64
}

/// Result of one LMS training pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsOutcome {
    /// Trained taps; `j_min` holds `final_mse`.
    pub design: EqualizerDesign,
    /// A priori squared error over the first 20% of training.
    pub initial_mse: f64,
    /// A priori squared error over the last 20% of training.
    pub final_mse: f64,
}

/// One pass of normalized LMS from zero taps over the training prefix.
///
/// `y[n]` and `training[n]` are aligned (`y` may extend past the training
/// so that pre-cursor taps see real data). The step is `mu / P_y`, with `P_y`
/// the mean power of `y` over the training span. The DFE feedback uses the
/// known training symbols.
pub fn lms_train(
    y: &[f64],
    training: &[f64],
    k1: usize,
    k2: usize,
    mu: f64,
    kind: EqualizerKind,
) -> Result<LmsOutcome> {
    let mut design = EqualizerDesign {
        kind,
        k1,
        k2,
        feedforward: vec![0.0; k1 + 1 + if kind == EqualizerKind::Le { k2 } else { 0 }],
        feedback: vec![0.0; if kind == EqualizerKind::Dfe { k2 } else { 0 }],
        j_min: f64::NAN,
        sigma_d2: 1.0,
    };
    let taps = design.feedforward.len() + design.feedback.len();
    let n = training.len();
    if n < 10 * (k1 + k2 + 1) {
        return Err(Error::param(format!(
            "training length {n} is below 10 x (K1 + K2 + 1) = {}",
            10 * (k1 + k2 + 1)
        )));
    }
    if !(mu >= 0.0) || mu * taps as f64 >= 2.0 {
        return Err(Error::param(format!(
            "LMS step {mu} must satisfy 0 <= mu < 2 / {taps} taps"
        )));
    }
    if y.len() < n {
        return Err(Error::param("received sequence shorter than the training prefix"));
    }
    let power = y[..n].iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(power > 0.0) {
        return Err(Error::Numerical("received sequence has zero power".into()));
    }
    let step = mu / power;
    let window = (n / 5).max(1);
    let mut errors = Vec::with_capacity(n);
    let lags: Vec<i64> = design.ff_lags().collect();
    for t in 0..n {
        let ti = t as i64;
        let est = soft_outputs(y, &design, t..t + 1, training)[0];
        let e = training[t] - est;
        errors.push(e * e);
        for (c, &r) in design.feedforward.iter_mut().zip(&lags) {
            *c += step * e * tap_input(y, ti - r);
        }
        for (i, b) in design.feedback.iter_mut().enumerate() {
            *b -= step * e * tap_input(training, ti - 1 - i as i64);
        }
    }
    let initial_mse = errors[..window].iter().sum::<f64>() / window as f64;
    let final_mse = errors[n - window..].iter().sum::<f64>() / window as f64;
    if !final_mse.is_finite() || final_mse > 10.0 * initial_mse {
        return Err(Error::Numerical(format!(
            "LMS diverged (MSE {final_mse:.3e} vs initial {initial_mse:.3e}); use a smaller step"
        )));
    }
    design.j_min = final_mse;
    Ok(LmsOutcome {
        design,
        initial_mse,
        final_mse,
    })
}
