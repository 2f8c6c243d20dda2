//! Small-scale fading taps.
//!
//! Rayleigh taps are sums of complex exponentials whose frequencies follow a
//! one-sided (half-bathtub) Jakes density:
//!
//! ```text
//! h(t) = N^-1/2 · Σ_n exp(j(2π f_n t + φ_n)),   p(f) ∝ 1 / sqrt(1 - (f/f_D)²)
//! ```
//!
//! with `f` restricted to `[0, f_D]` for positive `f_D` and to `[f_D, 0]` for
//! negative `f_D`. Frequencies are drawn by jittered stratification of the
//! inverse CDF `f = f_D · sin(π u / 2)`, so every generator has exactly unit
//! time-average power and an autocorrelation close to the continuous
//! spectrum's even for one realisation. The generator is a pure function of
//! time, so a link can be evaluated at any instant without stored traces.

use super::ChannelError;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

/// Sinusoids per Rayleigh tap.
pub const DEFAULT_SINUSOIDS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TapKind {
    Static,
    HalfBathtub,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapSpec {
    /// Mean tap power relative to the first tap, dB.
    pub power_db: f64,
    pub delay_ns: f64,
    /// Signed maximum Doppler shift; the sign selects the non-zero half.
    pub doppler_hz: f64,
    pub kind: TapKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapProfile {
    pub name: String,
    pub taps: Vec<TapSpec>,
}

const fn tap(power_db: f64, delay_ns: f64, doppler_hz: f64, kind: TapKind) -> TapSpec {
    TapSpec {
        power_db,
        delay_ns,
        doppler_hz,
        kind,
    }
}

impl TapProfile {
    pub fn urban_los() -> Self {
        use TapKind::*;
        Self {
            name: "urban-los".into(),
            taps: vec![
                tap(0.0, 0.0, 0.0, Static),
                tap(-8.0, 117.0, 236.0, HalfBathtub),
                tap(-10.0, 183.0, -157.0, HalfBathtub),
                tap(-15.0, 333.0, 492.0, HalfBathtub),
            ],
        }
    }

    pub fn urban_nlos() -> Self {
        use TapKind::*;
        Self {
            name: "urban-nlos".into(),
            taps: vec![
                tap(0.0, 0.0, 0.0, Static),
                tap(-3.0, 267.0, 295.0, HalfBathtub),
                tap(-4.0, 400.0, -98.0, HalfBathtub),
                tap(-10.0, 533.0, 591.0, HalfBathtub),
            ],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "urban-los" => Some(Self::urban_los()),
            "urban-nlos" => Some(Self::urban_nlos()),
            _ => None,
        }
    }

    /// Power weights `10^(η²/10)` normalised to unit sum.
    pub fn power_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = self.taps.iter().map(|t| 10f64.powf(t.power_db / 10.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: &str| Err(ChannelError::InvalidProfile(format!("{}: {msg}", self.name)));
        let Some(first) = self.taps.first() else {
            return bad("no taps");
        };
        if first.kind != TapKind::Static || first.power_db != 0.0 || first.delay_ns != 0.0 {
            return bad("first tap must be static with 0 dB power and zero delay");
        }
        if self.taps.windows(2).any(|w| w[1].delay_ns <= w[0].delay_ns) {
            return bad("tap delays must be strictly increasing");
        }
        if self
            .taps
            .iter()
            .any(|t| t.kind == TapKind::HalfBathtub && t.doppler_hz == 0.0)
        {
            return bad("half-bathtub taps need a non-zero Doppler");
        }
        Ok(())
    }
}

/// Sum-of-sinusoids Rayleigh process with a one-sided Doppler spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SumOfSinusoids {
    doppler_hz: f64,
    freqs: Vec<f64>,
    phases: Vec<f64>,
    amp: f64,
}

impl SumOfSinusoids {
    pub fn doppler_hz(&self) -> f64 {
        self.doppler_hz
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (&f, &p) in self.freqs.iter().zip(&self.phases) {
            let (s, c) = (TAU * f * t + p).sin_cos();
            re += c;
            im += s;
        }
        Complex64::new(re * self.amp, im * self.amp)
    }

    /// Samples at `t0, t0 + dt, t0 + 2·dt, …` by phasor rotation.
    pub fn trace(&self, t0: f64, dt: f64) -> SosTrace {
        SosTrace::new(self, t0, dt)
    }
}

/// Incremental evaluator of a [`SumOfSinusoids`] on a uniform time lattice.
#[derive(Clone, Debug)]
pub struct SosTrace {
    re: Vec<f64>,
    im: Vec<f64>,
    rot_re: Vec<f64>,
    rot_im: Vec<f64>,
    amp: f64,
    since_resync: u32,
    t0: f64,
    step: u64,
    dt: f64,
    freqs: Vec<f64>,
    phases: Vec<f64>,
}

const RESYNC_EVERY: u32 = 4096;

impl SosTrace {
    fn new(sos: &SumOfSinusoids, t0: f64, dt: f64) -> Self {
        let n = sos.freqs.len();
        let mut trace = Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
            rot_re: Vec::with_capacity(n),
            rot_im: Vec::with_capacity(n),
            amp: sos.amp,
            since_resync: 0,
            t0,
            step: 0,
            dt,
            freqs: sos.freqs.clone(),
            phases: sos.phases.clone(),
        };
        for &f in &sos.freqs {
            let (s, c) = (TAU * f * dt).sin_cos();
            trace.rot_re.push(c);
            trace.rot_im.push(s);
        }
        trace.resync();
        trace
    }

    fn resync(&mut self) {
        let t = self.time();
        for i in 0..self.freqs.len() {
            let (s, c) = (TAU * self.freqs[i] * t + self.phases[i]).sin_cos();
            self.re[i] = c;
            self.im[i] = s;
        }
        self.since_resync = 0;
    }

    /// Value at the current lattice point.
    pub fn value(&self) -> Complex64 {
        let re: f64 = self.re.iter().sum();
        let im: f64 = self.im.iter().sum();
        Complex64::new(re * self.amp, im * self.amp)
    }

    /// Move one lattice step forward.
    pub fn advance(&mut self) {
        self.step += 1;
        self.since_resync += 1;
        if self.since_resync >= RESYNC_EVERY {
            self.resync();
            return;
        }
        for i in 0..self.re.len() {
            let (r, m) = (self.re[i], self.im[i]);
            self.re[i] = r * self.rot_re[i] - m * self.rot_im[i];
            self.im[i] = r * self.rot_im[i] + m * self.rot_re[i];
        }
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }
}

impl Iterator for SosTrace {
    type Item = Complex64;

    fn next(&mut self) -> Option<Complex64> {
        let v = self.value();
        self.advance();
        Some(v)
    }
}

/// One tap's time-varying complex gain.
#[derive(Clone, Debug, PartialEq)]
pub enum TapGenerator {
    /// Constant `1 + 0j`.
    Static,
    Rayleigh(SumOfSinusoids),
}

impl TapGenerator {
    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            TapGenerator::Static => Complex64::new(1.0, 0.0),
            TapGenerator::Rayleigh(sos) => sos.eval(t),
        }
    }
}

/// Build a tap generator. Half-bathtub taps need a non-zero Doppler shift and
/// at least one sinusoid.
pub fn synthesize_tap<R: Rng + ?Sized>(
    kind: TapKind,
    doppler_hz: f64,
    n_sinusoids: usize,
    rng: &mut R,
) -> Result<TapGenerator, ChannelError> {
    match kind {
        TapKind::Static => Ok(TapGenerator::Static),
        TapKind::HalfBathtub => {
            if doppler_hz == 0.0 || !doppler_hz.is_finite() {
                return Err(ChannelError::InvalidDoppler(doppler_hz));
            }
            if n_sinusoids == 0 {
                return Err(ChannelError::InvalidProfile("zero sinusoids".into()));
            }
            let n = n_sinusoids as f64;
            let mut freqs = Vec::with_capacity(n_sinusoids);
            let mut phases = Vec::with_capacity(n_sinusoids);
            for k in 0..n_sinusoids {
                let u = (k as f64 + rng.random::<f64>()) / n;
                freqs.push(doppler_hz * (FRAC_PI_2 * u).sin());
                phases.push(TAU * rng.random::<f64>());
            }
            Ok(TapGenerator::Rayleigh(SumOfSinusoids {
                doppler_hz,
                freqs,
                phases,
                amp: 1.0 / n.sqrt(),
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rayleigh(fd: f64, seed: u64) -> SumOfSinusoids {
        match synthesize_tap(TapKind::HalfBathtub, fd, DEFAULT_SINUSOIDS, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap() {
            TapGenerator::Rayleigh(s) => s,
            TapGenerator::Static => unreachable!(),
        }
    }

    #[test]
    fn static_tap_is_unity() {
        let g = synthesize_tap(TapKind::Static, 0.0, 64, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for t in [0.0, 0.37, 1234.5] {
            assert_eq!(g.eval(t), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn zero_doppler_half_bathtub_is_rejected() {
        let r = synthesize_tap(TapKind::HalfBathtub, 0.0, 64, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(ChannelError::InvalidDoppler(_))));
    }

    #[test]
    fn frequencies_stay_on_the_signed_side() {
        let pos = rayleigh(236.0, 1);
        assert!(pos.freqs().iter().all(|&f| (0.0..=236.0).contains(&f)));
        let neg = rayleigh(-157.0, 2);
        assert!(neg.freqs().iter().all(|&f| (-157.0..=0.0).contains(&f)));
    }

    #[test]
    fn trace_matches_direct_evaluation() {
        let sos = rayleigh(492.0, 3);
        let dt = 1e-4;
        let mut trace = sos.trace(10.0, dt);
        for k in 0..10_000 {
            let direct = sos.eval(10.0 + k as f64 * dt);
            let stepped = trace.next().unwrap();
            assert!((direct - stepped).norm() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn profiles_validate() {
        TapProfile::urban_los().validate().unwrap();
        TapProfile::urban_nlos().validate().unwrap();
    }

    #[test]
    fn los_weights_match_profile_powers() {
        // 10^(η²/10) for 0, -8, -10, -15 dB
        let raw = [1.0, 0.158_489_3, 0.1, 0.031_622_78];
        let total: f64 = raw.iter().sum();
        let w = TapProfile::urban_los().power_weights();
        for (a, b) in w.iter().zip(raw.iter().map(|r| r / total)) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
