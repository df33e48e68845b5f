//! Reference implementations used as test oracles. None of these share code
//! with the library beyond its data types.

#![allow(dead_code)]

use rand::Rng;
use uwbsim::equalizer::{EqualizerDesign, EqualizerKind, OverallResponse};
use uwbsim::txrx::CompositeChannel;

pub const CM3_MEDIAN_RMS_NS: f64 = 7.596;
pub const CM4_MEDIAN_RMS_NS: f64 = 11.392;
pub const CM3_MEDIAN_SPAN: usize = 9;
pub const CM4_MEDIAN_SPAN: usize = 12;

pub fn q_ref(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Random symbol-rate channel: `alpha_0 = 1`, up to `max_taps` taps in
/// total, the rest uniform in +-0.5 on either side of the cursor.
pub fn random_channel<R: Rng>(rng: &mut R, max_taps: usize) -> CompositeChannel {
    let taps = rng.random_range(1..=max_taps);
    let n1 = rng.random_range(0..taps);
    let alpha: Vec<f64> = (0..taps)
        .map(|i| if i == n1 { 1.0 } else { rng.random_range(-0.5..0.5) })
        .collect();
    CompositeChannel::new(alpha, n1).unwrap()
}

/// Log-uniform noise variance per symbol-rate sample in `[lo, hi]`.
pub fn random_variance<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// `E[(d(n) - d_hat(n))^2]` written out directly for i.i.d. +-1 symbols:
/// `x` holds the feed-forward taps for lags `lags`, then `k2` feedback taps
/// that cancel `d(n-1) .. d(n-k2)`.
pub fn mse_objective(alpha: &CompositeChannel, lags: &[i64], k2: usize, s2: f64, x: &[f64]) -> f64 {
    let (c, b) = x.split_at(lags.len());
    let min_lag = lags.iter().copied().min().unwrap_or(0);
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let lo = (min_lag - alpha.n1 as i64).min(0);
    let hi = (max_lag + alpha.n2 as i64).max(k2 as i64);
    let mut j = s2 * c.iter().map(|v| v * v).sum::<f64>();
    for m in lo..=hi {
        let mut q: f64 = lags.iter().zip(c).map(|(&r, cr)| cr * alpha.at(m - r)).sum();
        if m >= 1 && (m as usize) <= k2 {
            q -= b[m as usize - 1];
        }
        let target = if m == 0 { 1.0 } else { 0.0 };
        j += (target - q).powi(2);
    }
    j
}

/// Conjugate gradients with central-difference gradients and exact line
/// search, for a quadratic `f` of `n` variables. Restarts every `n` steps.
pub fn minimize_quadratic(f: &dyn Fn(&[f64]) -> f64, n: usize) -> Vec<f64> {
    let grad = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += 1.0;
                b[i] -= 1.0;
                (f(&a) - f(&b)) / 2.0
            })
            .collect()
    };
    let along = |x: &[f64], d: &[f64], t: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + t * b).collect() };
    let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();

    let mut x = vec![0.0; n];
    for _round in 0..50 {
        let mut g = grad(&x);
        if norm2(&g).sqrt() < 1e-14 {
            break;
        }
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        for _ in 0..n {
            let scale = 1.0 / norm2(&d).sqrt();
            let dn: Vec<f64> = d.iter().map(|v| v * scale).collect();
            let f0 = f(&x);
            let fp = f(&along(&x, &dn, 1.0));
            let fm = f(&along(&x, &dn, -1.0));
            let curv = (fp + fm - 2.0 * f0) / 2.0;
            if !(curv > 0.0) {
                break;
            }
            let t = -(fp - fm) / 2.0 / (2.0 * curv);
            x = along(&x, &dn, t);
            let g_new = grad(&x);
            let gn = norm2(&g_new);
            if gn.sqrt() < 1e-14 {
                g = g_new;
                break;
            }
            let beta = (gn - g_new.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()) / norm2(&g);
            d = g_new.iter().zip(&d).map(|(gi, di)| -gi + beta.max(0.0) * di).collect();
            g = g_new;
        }
    }
    x
}

/// Minimizes the MSE over feed-forward lags `lags` and `k2` free feedback
/// taps. Returns `(feedforward, feedback, j_min)`.
pub fn oracle_design(alpha: &CompositeChannel, lags: &[i64], k2: usize, s2: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let n = lags.len() + k2;
    let f = |x: &[f64]| mse_objective(alpha, lags, k2, s2, x);
    let x = minimize_quadratic(&f, n);
    let j = f(&x);
    let (c, b) = x.split_at(lags.len());
    (c.to_vec(), b.to_vec(), j)
}

/// Feed-forward lags used by a design of `kind`: `-K1 ..= K2` for the LE,
/// `-K1 ..= 0` for the DFE.
pub fn lags_of(kind: EqualizerKind, k1: usize, k2: usize) -> Vec<i64> {
    match kind {
        EqualizerKind::Le => (-(k1 as i64)..=k2 as i64).collect(),
        EqualizerKind::Dfe => (-(k1 as i64)..=0).collect(),
    }
}

pub fn feedback_count(design: &EqualizerDesign) -> usize {
    match design.kind {
        EqualizerKind::Le => 0,
        EqualizerKind::Dfe => design.k2,
    }
}

/// Exact BER by averaging `Q` over every sign pattern of the nonzero ISI
/// terms. Panics beyond 20 terms.
pub fn enumerated_ber(resp: &OverallResponse) -> f64 {
    let isi: Vec<f64> = resp.interference().filter(|q| *q != 0.0).collect();
    assert!(isi.len() <= 20, "{} ISI terms is too many to enumerate", isi.len());
    let sigma = resp.sigma_w2.sqrt();
    let q0 = resp.q0();
    let patterns = 1u64 << isi.len();
    let mut total = 0.0;
    for bits in 0..patterns {
        let s: f64 = isi
            .iter()
            .enumerate()
            .map(|(i, q)| if bits >> i & 1 == 1 { *q } else { -*q })
            .sum();
        total += q_ref((q0 + s) / sigma);
    }
    total / patterns as f64
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
