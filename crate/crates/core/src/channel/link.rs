use super::fading::{synthesize_tap, SosTrace, TapGenerator, TapProfile};
use super::los::LinkClass;
use super::ChannelError;
use crate::mobility::VehicleId;
use rand::Rng;

/// Unordered vehicle pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey(pub VehicleId, pub VehicleId);

impl PairKey {
    pub fn new(a: VehicleId, b: VehicleId) -> Self {
        if a <= b {
            PairKey(a, b)
        } else {
            PairKey(b, a)
        }
    }
}

/// Tapped-delay-line fading state of one vehicle pair.
///
/// The narrowband gain aggregates tap powers:
/// `G(t) = 10·log10(Σ_i w_i |h_i(t)|²)` with weights normalised to unit sum,
/// so the long-run mean of `10^(G/10)` is one.
#[derive(Clone, Debug)]
pub struct FadingLink {
    pub key: PairKey,
    pub class: LinkClass,
    pub created_at: f64,
    weights: Vec<f64>,
    taps: Vec<TapGenerator>,
    static_weight: f64,
    lattice: Option<LatticeCache>,
}

/// Longest forward jump still cheaper to step through than to resynthesise.
const MAX_STRIDE: u64 = 16;

#[derive(Clone, Debug)]
struct LatticeCache {
    dt: f64,
    step: u64,
    traces: Vec<SosTrace>,
}

impl FadingLink {
    pub fn new<R: Rng + ?Sized>(
        key: PairKey,
        class: LinkClass,
        profile: &TapProfile,
        n_sinusoids: usize,
        created_at: f64,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        profile.validate()?;
        let weights = profile.power_weights();
        let mut taps = Vec::with_capacity(profile.taps.len());
        let mut static_weight = 0.0;
        for (spec, &w) in profile.taps.iter().zip(&weights) {
            let g = synthesize_tap(spec.kind, spec.doppler_hz, n_sinusoids, rng)?;
            if g == TapGenerator::Static {
                static_weight += w;
            }
            taps.push(g);
        }
        Ok(Self {
            key,
            class,
            created_at,
            weights,
            taps,
            static_weight,
            lattice: None,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn taps(&self) -> &[TapGenerator] {
        &self.taps
    }

    /// Aggregate linear power gain at time `t`.
    pub fn gain_linear(&self, t: f64) -> f64 {
        self.taps
            .iter()
            .zip(&self.weights)
            .map(|(g, &w)| w * g.eval(t).norm_sqr())
            .sum()
    }

    pub fn gain_db(&self, t: f64) -> f64 {
        10.0 * self.gain_linear(t).log10()
    }

    /// Lower bound on `gain_linear`, from the static taps alone.
    pub fn min_gain_linear(&self) -> f64 {
        self.static_weight
    }

    /// Gain at `step · dt`. Short forward strides are computed incrementally;
    /// any other access pattern falls back to direct evaluation.
    pub fn gain_linear_at_step(&mut self, step: u64, dt: f64) -> f64 {
        let t = step as f64 * dt;
        let gap = match &self.lattice {
            Some(c) if c.dt == dt && step > c.step => step - c.step,
            _ => u64::MAX,
        };
        if gap <= MAX_STRIDE {
            let cache = self.lattice.as_mut().unwrap();
            for tr in &mut cache.traces {
                for _ in 0..gap {
                    tr.advance();
                }
            }
            cache.step = step;
        } else if !matches!(&self.lattice, Some(c) if c.dt == dt && c.step == step) {
            let traces = self
                .taps
                .iter()
                .filter_map(|g| match g {
                    TapGenerator::Rayleigh(sos) => Some(sos.trace(t, dt)),
                    TapGenerator::Static => None,
                })
                .collect();
            self.lattice = Some(LatticeCache { dt, step, traces });
        }
        let cache = self.lattice.as_ref().unwrap();
        let mut g = self.static_weight;
        let mut k = 0;
        for (tap, &w) in self.taps.iter().zip(&self.weights) {
            if let TapGenerator::Rayleigh(_) = tap {
                g += w * cache.traces[k].value().norm_sqr();
                k += 1;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::fading::{TapKind, TapSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn link(profile: &TapProfile, seed: u64) -> FadingLink {
        FadingLink::new(
            PairKey::new(VehicleId(1), VehicleId(2)),
            LinkClass::Los,
            profile,
            256,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn static_only_profile_is_flat() {
        let p = TapProfile {
            name: "flat".into(),
            taps: vec![TapSpec {
                power_db: 0.0,
                delay_ns: 0.0,
                doppler_hz: 0.0,
                kind: TapKind::Static,
            }],
        };
        let l = link(&p, 0);
        for t in [0.0, 1.5, 99.0] {
            assert!(l.gain_db(t).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_taps_give_zero_db() {
        // sum of normalised weights with |h_i| = 1
        let w = TapProfile::urban_nlos().power_weights();
        let g: f64 = w.iter().sum();
        assert!((10.0 * g.log10()).abs() < 1e-12);
    }

    #[test]
    fn lattice_matches_direct() {
        let mut l = link(&TapProfile::urban_nlos(), 4);
        let strided = [910, 917, 933, 950, 950, 940];
        for step in (500..700).chain(900..905).chain(strided) {
            let a = l.gain_linear_at_step(step, 0.1);
            let b = l.gain_linear(step as f64 * 0.1);
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn gain_never_drops_below_static_floor() {
        let l = link(&TapProfile::urban_los(), 9);
        let floor = l.min_gain_linear();
        assert!((floor - TapProfile::urban_los().power_weights()[0]).abs() < 1e-15);
        for k in 0..10_000 {
            assert!(l.gain_linear(k as f64 * 1.3e-3) >= floor);
        }
    }

    #[test]
    fn pair_key_is_unordered() {
        assert_eq!(PairKey::new(VehicleId(5), VehicleId(2)), PairKey::new(VehicleId(2), VehicleId(5)));
    }
}
