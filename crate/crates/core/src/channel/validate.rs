//! Statistical checks of the fading generators against their target
//! distribution, power profile, Doppler spectrum and autocorrelation.

use super::fading::{synthesize_tap, SumOfSinusoids, TapGenerator, TapKind, TapProfile};
use super::ChannelError;
use crate::rng;
use crate::stats;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub const KS_ALPHA: f64 = 0.01;
pub const MEAN_POWER_TOL: f64 = 0.01;
pub const POWER_RATIO_TOL_DB: f64 = 0.2;
pub const FORBIDDEN_MASS_MAX: f64 = 0.01;
pub const ACF_RMS_TOL: f64 = 0.05;
/// Lags up to this value enter the autocorrelation check.
pub const ACF_MAX_LAG: f64 = 5e-3;

/// Spacing of the samples used for the envelope and power statistics. It
/// spans several coherence times of the slowest tap, so samples are close
/// to independent.
const SAMPLE_SPACING: f64 = 0.037_3;
const SPECTRUM_FS: f64 = 2048.0;
const SPECTRUM_NFFT: usize = 2048;
const SPECTRUM_SEGMENTS: usize = 64;
const ACF_FS: f64 = 20_000.0;
const ACF_LAGS: usize = 100;
const ACF_SAMPLES: usize = 400_000;

#[derive(Clone, Debug, Serialize)]
pub struct TapCheck {
    pub tap: usize,
    pub doppler_hz: f64,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub mean_power: f64,
    pub power_ratio_db: f64,
    pub expected_ratio_db: f64,
    pub forbidden_mass: f64,
    pub acf_rms_error: f64,
}

impl TapCheck {
    pub fn ks_ok(&self) -> bool {
        self.ks_pvalue >= KS_ALPHA
    }
    pub fn power_ok(&self) -> bool {
        (self.mean_power - 1.0).abs() <= MEAN_POWER_TOL
    }
    pub fn ratio_ok(&self) -> bool {
        (self.power_ratio_db - self.expected_ratio_db).abs() <= POWER_RATIO_TOL_DB
    }
    pub fn spectrum_ok(&self) -> bool {
        self.forbidden_mass < FORBIDDEN_MASS_MAX
    }
    pub fn acf_ok(&self) -> bool {
        self.acf_rms_error <= ACF_RMS_TOL
    }
    pub fn passed(&self) -> bool {
        self.ks_ok() && self.power_ok() && self.ratio_ok() && self.spectrum_ok() && self.acf_ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumPoint {
    pub tap: usize,
    pub freq_hz: f64,
    /// Fraction of the tap's total power in this bin.
    pub power_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileValidation {
    pub profile: String,
    pub samples: usize,
    pub static_tap_exact: bool,
    pub taps: Vec<TapCheck>,
    pub spectra: Vec<SpectrumPoint>,
}

impl ProfileValidation {
    pub fn passed(&self) -> bool {
        self.static_tap_exact && self.taps.iter().all(TapCheck::passed)
    }

    /// Human-readable pass/fail report.
    pub fn report(&self) -> String {
        let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out = format!("profile {} ({} samples per tap)\n", self.profile, self.samples);
        out += &format!("  tap 1 static, |h| == 1: {}\n", mark(self.static_tap_exact));
        for t in &self.taps {
            out += &format!(
                "  tap {} (f_D = {} Hz)\n    KS vs Rayleigh: D = {:.5}, p = {:.4} [{}]\n    mean power: {:.4} [{}]\n    power vs tap 1: {:.3} dB (table {:.1} dB) [{}]\n    forbidden-side spectral mass: {:.5} [{}]\n    autocorrelation RMS error: {:.4} [{}]\n",
                t.tap,
                t.doppler_hz,
                t.ks_statistic,
                t.ks_pvalue,
                mark(t.ks_ok()),
                t.mean_power,
                mark(t.power_ok()),
                t.power_ratio_db,
                t.expected_ratio_db,
                mark(t.ratio_ok()),
                t.forbidden_mass,
                mark(t.spectrum_ok()),
                t.acf_rms_error,
                mark(t.acf_ok()),
            );
        }
        out += &format!("overall: {}\n", mark(self.passed()));
        out
    }
}

/// Autocorrelation of a unit-power process with the one-sided Jakes
/// spectrum, `R(τ) = (2/π)∫₀^{π/2} exp(j2π f_D τ sin θ) dθ`, by composite
/// Simpson quadrature.
pub fn half_bathtub_acf(doppler_hz: f64, lag: f64) -> Complex64 {
    const PANELS: usize = 2000;
    let h = FRAC_PI_2 / PANELS as f64;
    let f = |theta: f64| Complex64::from_polar(1.0, TAU * doppler_hz * lag * theta.sin());
    let mut acc = f(0.0) + f(FRAC_PI_2);
    for k in 1..PANELS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(k as f64 * h) * w;
    }
    acc * (h / 3.0) * (2.0 / PI)
}

fn rayleigh_cdf(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        1.0 - (-r * r).exp()
    }
}

fn forbidden_mass_and_spectrum(sos: &SumOfSinusoids, tap: usize) -> (f64, Vec<SpectrumPoint>) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(SPECTRUM_NFFT);
    let window: Vec<f64> = (0..SPECTRUM_NFFT)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / SPECTRUM_NFFT as f64).cos())
        .collect();
    let mut psd = vec![0.0; SPECTRUM_NFFT];
    let mut trace = sos.trace(0.0, 1.0 / SPECTRUM_FS);
    let mut buf = vec![Complex64::new(0.0, 0.0); SPECTRUM_NFFT];
    for _ in 0..SPECTRUM_SEGMENTS {
        for (b, w) in buf.iter_mut().zip(&window) {
            *b = trace.next().unwrap() * *w;
        }
        fft.process(&mut buf);
        for (p, b) in psd.iter_mut().zip(&buf) {
            *p += b.norm_sqr();
        }
    }
    let total: f64 = psd.iter().sum();
    let bin = SPECTRUM_FS / SPECTRUM_NFFT as f64;
    let mut forbidden = 0.0;
    let mut points = Vec::with_capacity(SPECTRUM_NFFT);
    for (k, &p) in psd.iter().enumerate() {
        let f = if k <= SPECTRUM_NFFT / 2 {
            k as f64 * bin
        } else {
            (k as f64 - SPECTRUM_NFFT as f64) * bin
        };
        let wrong_side = if sos.doppler_hz() > 0.0 { f < 0.0 } else { f > 0.0 };
        if wrong_side {
            forbidden += p;
        }
        points.push(SpectrumPoint {
            tap,
            freq_hz: f,
            power_fraction: p / total,
        });
    }
    points.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    (forbidden / total, points)
}

fn acf_rms_error(sos: &SumOfSinusoids) -> f64 {
    let samples: Vec<Complex64> = sos.trace(0.0, 1.0 / ACF_FS).take(ACF_SAMPLES + ACF_LAGS).collect();
    let max_lag = ((ACF_MAX_LAG * ACF_FS).round() as usize).min(ACF_LAGS);
    let mut sq = 0.0;
    for lag in 0..=max_lag {
        let est: Complex64 = (0..ACF_SAMPLES)
            .map(|i| samples[i + lag] * samples[i].conj())
            .sum::<Complex64>()
            / ACF_SAMPLES as f64;
        let theory = half_bathtub_acf(sos.doppler_hz(), lag as f64 / ACF_FS);
        sq += (est - theory).norm_sqr();
    }
    (sq / (max_lag + 1) as f64).sqrt()
}

/// Run every check on one freshly drawn realisation of `profile`.
pub fn validate_profile(
    profile: &TapProfile,
    samples: usize,
    sinusoids: usize,
    seed: u64,
) -> Result<ProfileValidation, ChannelError> {
    profile.validate()?;
    let mut r = rng::stream(seed, "validate", &[]);
    let mut taps = Vec::new();
    let mut spectra = Vec::new();
    let mut static_tap_exact = true;
    for (i, spec) in profile.taps.iter().enumerate() {
        let g = synthesize_tap(spec.kind, spec.doppler_hz, sinusoids, &mut r)?;
        let sos = match (&g, spec.kind) {
            (TapGenerator::Static, TapKind::Static) => {
                static_tap_exact &= (0..1000).all(|k| g.eval(k as f64 * 0.013) == Complex64::new(1.0, 0.0));
                continue;
            }
            (TapGenerator::Rayleigh(sos), _) => sos,
            _ => unreachable!(),
        };
        let mut envelope = Vec::with_capacity(samples);
        let mut power = 0.0;
        for h in sos.trace(0.0, SAMPLE_SPACING).take(samples) {
            let p = h.norm_sqr();
            power += p;
            envelope.push(p.sqrt());
        }
        let mean_power = power / samples as f64;
        let d = stats::ks_statistic(&mut envelope, rayleigh_cdf);
        let (forbidden_mass, spec_points) = forbidden_mass_and_spectrum(sos, i + 1);
        spectra.extend(spec_points);
        taps.push(TapCheck {
            tap: i + 1,
            doppler_hz: spec.doppler_hz,
            ks_statistic: d,
            ks_pvalue: stats::ks_pvalue(d, samples),
            mean_power,
            power_ratio_db: spec.power_db - profile.taps[0].power_db + 10.0 * mean_power.log10(),
            expected_ratio_db: spec.power_db - profile.taps[0].power_db,
            forbidden_mass,
            acf_rms_error: acf_rms_error(sos),
        });
    }
    Ok(ProfileValidation {
        profile: profile.name.clone(),
        samples,
        static_tap_exact,
        taps,
        spectra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acf_at_zero_lag_is_one() {
        let r = half_bathtub_acf(236.0, 0.0);
        assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn acf_matches_bessel_real_part() {
        // Re R(τ) = J0(2π f_D τ); J0(2.404825557695773) = 0
        let lag = 2.404_825_557_695_773 / (TAU * 100.0);
        assert!(half_bathtub_acf(100.0, lag).re.abs() < 1e-9);
        // J0(1) = 0.7651976865579666
        let lag = 1.0 / (TAU * 100.0);
        assert!((half_bathtub_acf(100.0, lag).re - 0.765_197_686_557_966_6).abs() < 1e-9);
    }

    #[test]
    fn negative_doppler_conjugates_the_acf() {
        let a = half_bathtub_acf(157.0, 1e-3);
        let b = half_bathtub_acf(-157.0, 1e-3);
        assert!((a.conj() - b).norm() < 1e-12);
    }

    #[test]
    fn small_validation_run_passes_power_and_spectrum() {
        let v = validate_profile(&TapProfile::urban_nlos(), 50_000, 256, 3).unwrap();
        assert!(v.static_tap_exact);
        assert_eq!(v.taps.len(), 3);
        for t in &v.taps {
            assert!((t.mean_power - 1.0).abs() < 0.05, "{t:?}");
            assert!(t.spectrum_ok(), "{t:?}");
            assert!(t.acf_ok(), "{t:?}");
        }
    }
}
