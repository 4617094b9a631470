//! SNR, phase alignment, energy splitting and the max-min effective rate.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_at, ChannelRealization, ElementChannels};
use crate::error::{Error, Result};
use crate::geometry::{Placement, SurfaceGeometry};

/// Energy split and per-element phases of both surface modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub beta_r: f64,
    pub beta_t: f64,
    pub phases_r: Vec<f64>,
    pub phases_t: Vec<f64>,
}

/// Per-user rates in bits/s/Hz and the resulting effective rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rate_r: f64,
    pub rate_t: f64,
    pub effective: f64,
    pub snr_r: f64,
    pub snr_t: f64,
    pub beta_r: f64,
}

impl RateReport {
    pub fn sum_rate(&self) -> f64 {
        self.rate_r + self.rate_t
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// `P |h_uᴴ Φ_u h_f|² / σ²` with `Φ_u = diag(√β e^{jφ})`.
pub fn snr(
    h_f: &[Complex64],
    h_u: &[Complex64],
    phases: &[f64],
    beta: f64,
    power: f64,
    noise: f64,
) -> Result<f64> {
    check_len(h_f.len(), h_u.len())?;
    check_len(h_f.len(), phases.len())?;
    let amp = beta.sqrt();
    let sum: Complex64 = h_f
        .iter()
        .zip(h_u)
        .zip(phases)
        .map(|((f, u), &phi)| u.conj() * Complex64::from_polar(amp, phi) * f)
        .sum();
    Ok(power * sum.norm_sqr() / noise)
}

/// Phases `∠h_u − ∠h_f`, wrapped into `[0, 2π)`, that make every term of
/// the received sum real and non-negative.
pub fn optimal_phases(h_f: &[Complex64], h_u: &[Complex64]) -> Vec<f64> {
    h_f.iter()
        .zip(h_u)
        .map(|(f, u)| {
            let phi = (u.arg() - f.arg()).rem_euclid(TAU);
            // rem_euclid can round up to exactly TAU
            if phi >= TAU {
                0.0
            } else {
                phi
            }
        })
        .collect()
}

/// Beamforming gain `P (Σ |h_f,m| |h_u,m|)² / σ²` at full energy.
pub fn aligned_gain(h_f: &[Complex64], h_u: &[Complex64], power: f64, noise: f64) -> Result<f64> {
    check_len(h_f.len(), h_u.len())?;
    let s: f64 = h_f.iter().zip(h_u).map(|(f, u)| f.norm() * u.norm()).sum();
    Ok(coherent_gain(s, power, noise))
}

/// `P s² / σ²` for a coherent amplitude sum `s`.
pub fn coherent_gain(amplitude_sum: f64, power: f64, noise: f64) -> f64 {
    power * amplitude_sum * amplitude_sum / noise
}

/// `log2(1 + β P (Σ |h_f,m| |h_u,m|)² / σ²)`.
pub fn aligned_rate(
    h_f: &[Complex64],
    h_u: &[Complex64],
    beta: f64,
    power: f64,
    noise: f64,
) -> Result<f64> {
    Ok((beta * aligned_gain(h_f, h_u, power, noise)?).ln_1p() / std::f64::consts::LN_2)
}

/// Reflection share maximizing `min(β g_r, (1 − β) g_t)`.
///
/// With both gains positive this is the crossing point `g_t / (g_r + g_t)`.
/// If only one gain is positive, all energy goes to that user; with both
/// zero the split is 0.5.
pub fn optimal_split(g_r: f64, g_t: f64) -> f64 {
    match (g_r > 0.0, g_t > 0.0) {
        (true, true) => g_t / (g_r + g_t),
        (true, false) => 1.0,
        (false, true) => 0.0,
        (false, false) => 0.5,
    }
}

fn rate_of(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Optimal split and phases for channels already looked up at the elements.
pub fn design_split(ch: &ElementChannels, power: f64, noise: f64) -> Result<SplitConfig> {
    let g_r = aligned_gain(&ch.h_f, &ch.h_r, power, noise)?;
    let g_t = aligned_gain(&ch.h_f, &ch.h_t, power, noise)?;
    let beta_r = optimal_split(g_r, g_t);
    Ok(SplitConfig {
        beta_r,
        beta_t: 1.0 - beta_r,
        phases_r: optimal_phases(&ch.h_f, &ch.h_r),
        phases_t: optimal_phases(&ch.h_f, &ch.h_t),
    })
}

/// Rates of both users with a given reflection share and aligned phases.
pub fn rates_with_split(
    ch: &ElementChannels,
    beta_r: f64,
    power: f64,
    noise: f64,
) -> Result<RateReport> {
    let g_r = aligned_gain(&ch.h_f, &ch.h_r, power, noise)?;
    let g_t = aligned_gain(&ch.h_f, &ch.h_t, power, noise)?;
    let snr_r = beta_r * g_r;
    let snr_t = (1.0 - beta_r) * g_t;
    let (rate_r, rate_t) = (rate_of(snr_r), rate_of(snr_t));
    Ok(RateReport {
        rate_r,
        rate_t,
        effective: rate_r.min(rate_t),
        snr_r,
        snr_t,
        beta_r,
    })
}

/// Rates under the optimal split for full-energy gains `g_r`, `g_t`.
pub fn report_from_gains(g_r: f64, g_t: f64) -> RateReport {
    let beta_r = optimal_split(g_r, g_t);
    // β g_r and (1−β) g_t are both g_r g_t / (g_r + g_t) in exact arithmetic;
    // computing them from one expression keeps the two rates bit-equal
    let (snr_r, snr_t) = if g_r > 0.0 && g_t > 0.0 {
        let s = g_r * g_t / (g_r + g_t);
        (s, s)
    } else {
        (beta_r * g_r, (1.0 - beta_r) * g_t)
    };
    let (rate_r, rate_t) = (rate_of(snr_r), rate_of(snr_t));
    RateReport {
        rate_r,
        rate_t,
        effective: rate_r.min(rate_t),
        snr_r,
        snr_t,
        beta_r,
    }
}

/// Optimal phases and split for the element channels, and the rates they give.
pub fn evaluate_channels(ch: &ElementChannels, power: f64, noise: f64) -> Result<RateReport> {
    let g_r = aligned_gain(&ch.h_f, &ch.h_r, power, noise)?;
    let g_t = aligned_gain(&ch.h_f, &ch.h_t, power, noise)?;
    Ok(report_from_gains(g_r, g_t))
}

/// Looks up the placement's channels and applies [`evaluate_channels`].
pub fn evaluate(
    realization: &ChannelRealization,
    placement: &Placement,
    geom: &SurfaceGeometry,
    power: f64,
    noise: f64,
) -> Result<RateReport> {
    evaluate_channels(&channel_at(realization, placement, geom)?, power, noise)
}
