//! Propagation: power-law path loss, LoS probabilities for ground and
//! air-to-ground links, Rician small-scale fading and the sectored
//! beamforming gains.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

/// The three links of the relay network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    /// Direct link, TBS to user (ground to ground).
    Sd,
    /// First hop, TBS to relay (air to ground).
    Sr,
    /// Second hop, relay to user (air to ground).
    Rd,
}

impl LinkKind {
    pub const ALL: [LinkKind; 3] = [LinkKind::Sd, LinkKind::Sr, LinkKind::Rd];

    pub fn class(self) -> PropagationClass {
        match self {
            LinkKind::Sd => PropagationClass::GroundToGround,
            LinkKind::Sr | LinkKind::Rd => PropagationClass::AirToGround,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Sd => "SD",
            LinkKind::Sr => "SR",
            LinkKind::Rd => "RD",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropagationClass {
    AirToGround,
    GroundToGround,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LosState {
    Los,
    Nlos,
}

impl LosState {
    pub const BOTH: [LosState; 2] = [LosState::Los, LosState::Nlos];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainRole {
    Target,
    Interference,
}

/// Linear-scale power law `L(d) = intercept · d^exponent`.
///
/// The intercept is linear: `0.01` is a `-20 dB` floating intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub intercept: f64,
    pub exponent: f64,
}

impl PowerLaw {
    #[inline]
    pub fn loss(&self, d: f64) -> f64 {
        let e = self.exponent;
        if e.fract() == 0.0 && e.abs() <= 16.0 {
            self.intercept * d.powi(e as i32)
        } else {
            self.intercept * d.powf(e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub g2g_los: PowerLaw,
    pub g2g_nlos: PowerLaw,
    pub a2g_los: PowerLaw,
    pub a2g_nlos: PowerLaw,
}

impl PathLossParams {
    pub fn law(&self, class: PropagationClass, state: LosState) -> &PowerLaw {
        match (class, state) {
            (PropagationClass::GroundToGround, LosState::Los) => &self.g2g_los,
            (PropagationClass::GroundToGround, LosState::Nlos) => &self.g2g_nlos,
            (PropagationClass::AirToGround, LosState::Los) => &self.a2g_los,
            (PropagationClass::AirToGround, LosState::Nlos) => &self.a2g_nlos,
        }
    }

    /// Sanity warnings (not errors): exponents below free space, or NLoS
    /// decaying slower than LoS.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, los, nlos) in [
            ("g2g", &self.g2g_los, &self.g2g_nlos),
            ("a2g", &self.a2g_los, &self.a2g_nlos),
        ] {
            if los.exponent < 2.0 || nlos.exponent < 2.0 {
                out.push(format!("{name}: path-loss exponent below 2"));
            }
            if nlos.exponent < los.exponent {
                out.push(format!("{name}: NLoS exponent smaller than LoS exponent"));
            }
        }
        out
    }
}

/// LoS probability model parameters: 3GPP `d1/d2` for ground links and the
/// elevation-angle sigmoid `(a, b)` for air-to-ground links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosModelParams {
    pub d1: f64,
    pub d2: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamformingGains {
    pub tbs_main: f64,
    pub tbs_side: f64,
    pub rn_main: f64,
    pub rn_side: f64,
}

/// Rician K-factor as a function of ground distance.
#[derive(Clone)]
pub enum KFactor {
    Constant(f64),
    Distance(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl KFactor {
    #[inline]
    pub fn at(&self, r: f64) -> f64 {
        match self {
            KFactor::Constant(k) => *k,
            KFactor::Distance(f) => f(r),
        }
    }
}

impl fmt::Debug for KFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KFactor::Constant(k) => write!(f, "Constant({k})"),
            KFactor::Distance(_) => f.write_str("Distance(<fn>)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RicianKModel {
    pub g2g_los: KFactor,
    pub g2g_nlos: KFactor,
    pub a2g_los: KFactor,
    pub a2g_nlos: KFactor,
}

impl RicianKModel {
    pub fn factor(&self, class: PropagationClass, state: LosState) -> &KFactor {
        match (class, state) {
            (PropagationClass::GroundToGround, LosState::Los) => &self.g2g_los,
            (PropagationClass::GroundToGround, LosState::Nlos) => &self.g2g_nlos,
            (PropagationClass::AirToGround, LosState::Los) => &self.a2g_los,
            (PropagationClass::AirToGround, LosState::Nlos) => &self.a2g_nlos,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelParams {
    pub path_loss: PathLossParams,
    pub los: LosModelParams,
    pub k_factor: RicianKModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPair {
    pub los: f64,
    pub nlos: f64,
}

impl LossPair {
    pub fn get(&self, state: LosState) -> f64 {
        match state {
            LosState::Los => self.los,
            LosState::Nlos => self.nlos,
        }
    }
}

/// Distance entering the path-loss law for a ground distance `r`:
/// `1 + r` on the direct link, the 3-D distance on the air-to-ground hops.
#[inline]
pub fn effective_distance(link: LinkKind, h_r: f64, r: f64) -> f64 {
    match link {
        LinkKind::Sd => 1.0 + r,
        LinkKind::Sr | LinkKind::Rd => (r * r + h_r * h_r).sqrt(),
    }
}

#[inline]
pub fn path_loss_state(
    link: LinkKind,
    params: &PathLossParams,
    h_r: f64,
    state: LosState,
    r: f64,
) -> f64 {
    params
        .law(link.class(), state)
        .loss(effective_distance(link, h_r, r))
}

/// Linear path loss of `link` at ground distance `r`, for both LoS states.
pub fn path_loss(link: LinkKind, params: &PathLossParams, h_r: f64, r: f64) -> LossPair {
    LossPair {
        los: path_loss_state(link, params, h_r, LosState::Los, r),
        nlos: path_loss_state(link, params, h_r, LosState::Nlos, r),
    }
}

/// Ground-to-ground LoS probability of the 3GPP `d1/d2` model.
#[inline]
pub fn los_probability_g2g(params: &LosModelParams, r: f64) -> f64 {
    let near = if r <= params.d1 { 1.0 } else { params.d1 / r };
    let far = (-r / params.d2).exp();
    near * (1.0 - far) + far
}

/// Air-to-ground LoS probability as a sigmoid of the elevation angle in
/// degrees; `r = 0` is straight overhead.
#[inline]
pub fn los_probability_a2g(params: &LosModelParams, h_r: f64, r: f64) -> f64 {
    let elevation = h_r.atan2(r).to_degrees();
    1.0 / (1.0 + params.a * (-params.b * (elevation - params.a)).exp())
}

pub fn los_probability(link: LinkKind, params: &LosModelParams, h_r: f64, r: f64) -> f64 {
    match link.class() {
        PropagationClass::GroundToGround => los_probability_g2g(params, r),
        PropagationClass::AirToGround => los_probability_a2g(params, h_r, r),
    }
}

/// Probability of `state` (the NLoS value is `1 - p_LoS`).
#[inline]
pub fn state_probability(p_los: f64, state: LosState) -> f64 {
    match state {
        LosState::Los => p_los,
        LosState::Nlos => 1.0 - p_los,
    }
}

/// Laplace transform `E[e^{-s|h|²}]` of a unit-power Rician fading gain:
/// `(K+1)/(K+1+s) · exp(-K s/(K+1+s))`.
#[inline]
pub fn rician_power_lt(k: f64, s: Complex64) -> Complex64 {
    let denom = s + (k + 1.0);
    let ratio = (k + 1.0) / denom;
    if k == 0.0 {
        ratio
    } else {
        ratio * (-k * s / denom).exp()
    }
}

/// `1 - E[e^{-s|h|²}]` without the cancellation of the direct form when
/// `|s|` is small, which is the regime of far interferers.
pub fn rician_power_lt_complement(k: f64, s: Complex64) -> Complex64 {
    // With q = s/(K+1+s): L = (1 - q)e^{-Kq}, so 1 - L = -expm1(-Kq) + q·e^{-Kq}.
    let q = s / (s + (k + 1.0));
    let z = -k * q;
    q * z.exp() - expm1(z)
}

fn expm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))))
    } else {
        z.exp() - 1.0
    }
}

/// Sectored-antenna gain: target links see main lobes on both ends,
/// interferers only side lobes.
pub fn beamforming_gain(link: LinkKind, role: GainRole, gains: &BeamformingGains) -> f64 {
    match (link, role) {
        (LinkKind::Sd, GainRole::Target) => gains.tbs_main,
        (LinkKind::Sd, GainRole::Interference) => gains.tbs_side,
        (LinkKind::Sr, GainRole::Target) => gains.tbs_main * gains.rn_main,
        (LinkKind::Sr, GainRole::Interference) => gains.tbs_side * gains.rn_side,
        (LinkKind::Rd, GainRole::Target) => gains.rn_main,
        (LinkKind::Rd, GainRole::Interference) => gains.rn_side,
    }
}
