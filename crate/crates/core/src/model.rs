//! Network geometry: nearest-neighbour association, serving distances,
//! relay mobility and the densities of the interfering point processes.

use std::f64::consts::PI;

use crate::bessel::exp_neg_i0;
use crate::channel::LinkKind;
use crate::error::{Error, Result};
use crate::params::NetworkParams;
use crate::quad::{integrate_semi_infinite, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MobilityScheme {
    /// Relays keep their initial position.
    Hover,
    /// Every relay flies in an independent uniformly random direction and
    /// the user hands over instantly to its nearest relay.
    RandomDirection,
    /// The serving relay flies straight to the user and then hovers above
    /// it; all other relays fly in random directions.
    TowardUser,
}

impl MobilityScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            MobilityScheme::Hover => "hover",
            MobilityScheme::RandomDirection => "random_direction",
            MobilityScheme::TowardUser => "toward_user",
        }
    }
}

impl std::str::FromStr for MobilityScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hover" => Ok(MobilityScheme::Hover),
            "random_direction" | "scheme1" => Ok(MobilityScheme::RandomDirection),
            "toward_user" | "scheme2" => Ok(MobilityScheme::TowardUser),
            other => Err(Error::invalid(
                "mobility.scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub scheme: MobilityScheme,
    /// UAV speed [m/s].
    pub v: f64,
    /// Elapsed time [s].
    pub t: f64,
}

impl MobilityState {
    pub fn hover() -> Self {
        Self {
            scheme: MobilityScheme::Hover,
            v: 0.0,
            t: 0.0,
        }
    }

    pub fn random_direction(v: f64, t: f64) -> Self {
        Self {
            scheme: MobilityScheme::RandomDirection,
            v,
            t,
        }
    }

    pub fn toward_user(v: f64, t: f64) -> Self {
        Self {
            scheme: MobilityScheme::TowardUser,
            v,
            t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(Error::invalid(
                "mobility.v",
                format!("must be >= 0, got {}", self.v),
            ));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(
                "mobility.t",
                format!("must be >= 0, got {}", self.t),
            ));
        }
        Ok(())
    }

    /// Time seen by the analytic expressions. Hovering and random-direction
    /// relays are statistically frozen at `t = 0`, so they share the
    /// toward-user code path at time zero.
    pub fn analytic_time(&self) -> f64 {
        match self.scheme {
            MobilityScheme::TowardUser => self.t,
            MobilityScheme::Hover | MobilityScheme::RandomDirection => 0.0,
        }
    }

    /// Distance flown by the serving relay, `v·t` on the analytic path.
    pub fn displacement(&self) -> f64 {
        self.v * self.analytic_time()
    }

    /// The equivalent toward-user state used by the analytic engine.
    pub fn canonical(&self) -> MobilityState {
        MobilityState::toward_user(self.v, self.analytic_time())
    }
}

/// Distance between the user and the serving relay after flying `v·t`
/// towards it: `(r₀ - vt)·u(r₀ - vt)`.
#[inline]
pub fn serving_rn_distance(r_rd0: f64, v: f64, t: f64) -> f64 {
    (r_rd0 - v * t).max(0.0)
}

/// Density of the distance from the origin to the nearest point of a PPP
/// of density `lambda`: `2πλ r e^{-πλr²}`.
#[inline]
pub fn nearest_pdf(lambda: f64, r: f64) -> f64 {
    2.0 * PI * lambda * r * (-PI * lambda * r * r).exp()
}

/// Void probability of the disk of radius `r`.
#[inline]
pub fn nearest_ccdf(lambda: f64, r: f64) -> f64 {
    (-PI * lambda * r * r).exp()
}

/// Initial serving-distance density of `link`.
pub fn nearest_distance_pdf(link: LinkKind, params: &NetworkParams, r: f64) -> f64 {
    nearest_pdf(params.density(link), r)
}

/// Slack allowed on the arccos argument before it is treated as a bug.
const ARCCOS_SLACK: f64 = 1e-9;

/// Density at distance `r` from the user of the interferers of `link`,
/// given the initial serving distance.
///
/// Direct link and first hop: `λ_T` outside the serving disk. Second hop:
/// relays outside the initial serving disk that have each moved `v·t` in a
/// uniform random direction; the fraction of the circle of radius `v·t`
/// around `r` that lies outside that disk gives the arccos branch.
pub fn interferer_density(
    link: LinkKind,
    params: &NetworkParams,
    mobility: &MobilityState,
    serving_dist_0: f64,
    r: f64,
) -> Result<f64> {
    match link {
        LinkKind::Sd | LinkKind::Sr => Ok(if r >= serving_dist_0 {
            params.lambda_t
        } else {
            0.0
        }),
        LinkKind::Rd => {
            moving_relay_density(params.lambda_r, serving_dist_0, mobility.displacement(), r)
        }
    }
}

/// Interfering-relay density around the user when the serving relay
/// started at `r0` and every relay has moved `d`.
pub fn moving_relay_density(lambda_r: f64, r0: f64, d: f64, r: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(if r >= r0 { lambda_r } else { 0.0 });
    }
    if r >= r0 + d {
        return Ok(lambda_r);
    }
    let inner = (r0 - d).abs();
    if r < inner {
        return Ok(if r0 < d { lambda_r } else { 0.0 });
    }
    arccos_branch(lambda_r, r0, d, r)
}

fn arccos_branch(lambda_r: f64, r0: f64, d: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        // Only reachable when r0 == d; the limit of the argument is 0.
        return Ok(lambda_r / 2.0);
    }
    // arccos((r0² − r² − d²)/(2rd)) is π minus the triangle angle between
    // sides r and d. Kahan's formula keeps it accurate near the degenerate
    // triangles at both branch ends, where the plain cosine cancels.
    let (a, b) = if r >= d { (r, d) } else { (d, r) };
    let c = r0;
    let slack = ARCCOS_SLACK * (a + b + c);
    if c > a + b + slack || c + slack < a - b {
        return Err(Error::Internal(format!(
            "arccos argument out of range (r0={r0}, d={d}, r={r})"
        )));
    }
    let mu = if b >= c { c - (a - b) } else { b - (a - c) };
    let num = ((a - b) + c) * mu;
    let den = (a + (b + c)) * ((a - c) + b);
    let angle = if den <= 0.0 {
        PI
    } else {
        2.0 * (num.max(0.0) / den).sqrt().atan()
    };
    Ok(lambda_r / PI * (PI - angle).clamp(0.0, PI))
}

/// Probability that the user and its serving relay share their nearest
/// TBS, given the user's TBS distance and the relay's current distance.
pub fn same_tbs_probability(params: &NetworkParams, r_sd: f64, r_rd_t: f64) -> f64 {
    let k = PI * params.lambda_t;
    exp_neg_i0(k * (r_sd * r_sd + r_rd_t * r_rd_t), 2.0 * k * r_sd * r_rd_t).clamp(0.0, 1.0)
}

/// Regions of initial distances `(r_SD, r_RD,0)` for which the user picks
/// the direct link or the relay link at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationRegions {
    pub h_r: f64,
    /// Distance flown by the serving relay, `v·t`.
    pub displacement: f64,
}

impl AssociationRegions {
    pub fn new(params: &NetworkParams, mobility: &MobilityState) -> Self {
        Self {
            h_r: params.h_r,
            displacement: mobility.displacement(),
        }
    }

    /// Largest `r_SD` still served directly for a given `r_RD,0`.
    pub fn boundary(&self, r_rd0: f64) -> f64 {
        (r_rd0 - self.displacement).max(0.0).hypot(self.h_r)
    }

    pub fn is_direct(&self, r_sd: f64, r_rd0: f64) -> bool {
        r_sd <= self.boundary(r_rd0)
    }
}

/// Probability that the user is served through a relay.
pub fn relay_association_probability(
    params: &NetworkParams,
    mobility: &MobilityState,
    spec: &QuadratureSpec,
) -> Result<f64> {
    mobility.validate()?;
    let (lt, lr, h) = (params.lambda_t, params.lambda_r, params.h_r);
    let d = mobility.displacement();
    // Serving relay already overhead: only the TBS void of radius H matters.
    let arrived = (-PI * lt * h * h).exp() * -(-PI * lr * d * d).exp_m1();
    let integrand = |r: f64| {
        let shifted = r - d;
        2.0 * PI * lr * r * (-PI * lr * r * r - PI * lt * (shifted * shifted + h * h)).exp()
    };
    let scale = 1.0 / (PI * (lr + lt)).sqrt();
    let tail = integrate_semi_infinite(integrand, d, scale, spec)?;
    Ok((arrived + tail.value).clamp(0.0, 1.0))
}

/// Mean travel time of the serving relay, `E[r_RD,0] / v = 1/(2√λ_R v)`.
pub fn expected_travel_time(params: &NetworkParams, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!(
            "expected travel time needs v > 0, got {v}"
        )));
    }
    Ok(1.0 / (2.0 * params.lambda_r.sqrt() * v))
}

/// Mean of the same-TBS probability over the relay association region,
/// i.e. how often the independence assumption between the user's and the
/// relay's serving TBS is violated. Returns 0 when the relay region has
/// negligible mass.
pub fn same_tbs_diagnostic(
    params: &NetworkParams,
    mobility: &MobilityState,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let regions = AssociationRegions::new(params, mobility);
    let relay_mass = relay_association_probability(params, mobility, spec)?;
    if relay_mass < 1e-12 {
        return Ok(0.0);
    }
    let (lt, lr) = (params.lambda_t, params.lambda_r);
    let scale_t = 1.0 / (PI * lt).sqrt();
    let scale_r = 1.0 / (PI * lr).sqrt();
    let d = regions.displacement;
    let mut failure = None;
    let outer = |r0: f64| {
        let r_t = serving_rn_distance(r0, d, 1.0);
        let lower = regions.boundary(r0);
        let inner = |r_sd: f64| same_tbs_probability(params, r_sd, r_t) * nearest_pdf(lt, r_sd);
        match integrate_semi_infinite(inner, lower, scale_t, spec) {
            Ok(v) => v.value * nearest_pdf(lr, r0),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let mass = integrate_semi_infinite(outer, 0.0, scale_r, spec)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok((mass.value / relay_mass).clamp(0.0, 1.0))
}
