//! Analytic coverage engine.
//!
//! Three nested integration layers: the radial PGFL integral of the
//! aggregate interference (innermost), the Gil-Pelaez inversion of each
//! link's conditional SINR distribution, and the distance integrals over
//! the association regions (outermost).

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::channel::{
    los_probability, path_loss_state, rician_power_lt, rician_power_lt_complement,
    state_probability, GainRole, LinkKind, LosState, PropagationClass,
};
use crate::error::{Error, Result};
use crate::model::{
    moving_relay_density, nearest_pdf, relay_association_probability, serving_rn_distance,
    MobilityState,
};
use crate::params::NetworkParams;
use crate::quad::{
    gil_pelaez_integral, integrate, integrate_breakpoints, integrate_mapped_tail, GilPelaezOptions,
    QuadratureSpec,
};

/// SINR threshold. Constructed from dB at the public boundary; the engine
/// only ever sees the linear value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn from_db(db: f64) -> Result<Self> {
        Self::from_linear(10f64.powf(db / 10.0))
    }

    pub fn from_linear(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Threshold(beta))
        } else {
            Err(Error::invalid(
                "beta",
                format!("must be > 0 and finite, got {beta}"),
            ))
        }
    }

    /// Stand-in for `β → 0⁺`.
    pub fn vanishing() -> Self {
        Threshold(1e-9)
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

/// What a coverage query asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    /// Coverage of the typical user with direct/relay selection.
    Total,
    /// Standalone direct link.
    DirectLink,
    /// Standalone TBS-to-relay hop.
    FirstHop,
    /// Standalone relay-to-user hop.
    SecondHop,
    /// Two-hop decode-and-forward link, product of both hops.
    RelayLink,
    /// Probability of being served through a relay (threshold-free).
    Association,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Total,
        Quantity::DirectLink,
        Quantity::FirstHop,
        Quantity::SecondHop,
        Quantity::RelayLink,
        Quantity::Association,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Total => "total",
            Quantity::DirectLink => "direct_link",
            Quantity::FirstHop => "first_hop",
            Quantity::SecondHop => "second_hop",
            Quantity::RelayLink => "relay_link",
            Quantity::Association => "association",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| Error::invalid("quantity", format!("unknown quantity `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageQuery {
    pub beta: Threshold,
    pub quantity: Quantity,
}

/// Tolerances of the three integration layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineTolerances {
    /// PGFL radial integral (absolute error on the exponent).
    pub inner: QuadratureSpec,
    /// Gil-Pelaez inversion (absolute error on a probability).
    pub gil_pelaez: QuadratureSpec,
    /// Distance integrals over the association regions.
    pub outer: QuadratureSpec,
}

impl Default for EngineTolerances {
    fn default() -> Self {
        Self {
            inner: QuadratureSpec::new(1e-7, 1e-7),
            gil_pelaez: QuadratureSpec::new(1e-6, 1e-6),
            outer: QuadratureSpec::new(1e-5, 1e-6),
        }
    }
}

impl EngineTolerances {
    /// All three layers tightened by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            inner: self.inner.scaled(factor),
            gil_pelaez: self.gil_pelaez.scaled(factor),
            outer: self.outer.scaled(factor),
        }
    }
}

/// The four terms of the total coverage, split by association region and
/// by whether the serving relay has already reached the user's vertical.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegionTerms {
    /// Direct link, `r_SD ≤ H_R`: always direct.
    pub sd_a: f64,
    /// Direct link, `r_SD > H_R`.
    pub sd_b: f64,
    /// Relay link with the serving relay already overhead (`r_RD,0 ≤ vt`).
    pub srd_a: f64,
    /// Relay link with the serving relay still en route.
    pub srd_b: f64,
}

impl RegionTerms {
    pub fn total(&self) -> f64 {
        self.sd_a + self.sd_b + self.srd_a + self.srd_b
    }

    pub fn direct(&self) -> f64 {
        self.sd_a + self.sd_b
    }

    pub fn relay(&self) -> f64 {
        self.srd_a + self.srd_b
    }
}

/// Unconditional hop coverages of the relay link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayCp {
    pub first_hop: f64,
    pub second_hop: f64,
    pub two_hop: f64,
}

/// The fading transform varies on the scale `u ~ 1`; finer first panels
/// only add evaluations.
const GP_OPTIONS: GilPelaezOptions = GilPelaezOptions {
    initial_width: 0.5,
    cap: 1e15,
};

/// Tail mass left out by the truncated outer integrals, relative to the
/// outer absolute tolerance.
const OUTER_TAIL_FRACTION: f64 = 1e-3;

/// Memo key of a conditional coverage: link, LoS state, serving distance,
/// threshold and displacement, the floats by bit pattern.
type CpKey = (LinkKind, LosState, u64, u64, u64);

/// Analytic coverage evaluator for one network configuration.
///
/// Conditional coverages are memoized: sweeps over time or altitude revisit
/// the same outer quadrature nodes. Clones share the memo.
#[derive(Debug, Clone)]
pub struct CoverageEngine {
    params: NetworkParams,
    tol: EngineTolerances,
    memo: Arc<Mutex<HashMap<CpKey, f64>>>,
}

impl CoverageEngine {
    pub fn new(params: NetworkParams) -> Result<Self> {
        Self::with_tolerances(params, EngineTolerances::default())
    }

    pub fn with_tolerances(params: NetworkParams, tol: EngineTolerances) -> Result<Self> {
        params.validate()?;
        for spec in [&tol.inner, &tol.gil_pelaez, &tol.outer] {
            spec.validate()?;
        }
        Ok(Self {
            params,
            tol,
            memo: Arc::default(),
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn tolerances(&self) -> &EngineTolerances {
        &self.tol
    }

    /// Laplace transform of the aggregate interference of `link` at `s`,
    /// given the (initial) serving distance.
    pub fn interference_lt(
        &self,
        link: LinkKind,
        mobility: &MobilityState,
        serving_dist: f64,
        s: Complex64,
    ) -> Result<Complex64> {
        mobility.validate()?;
        check_distance(serving_dist)?;
        if s.re < 0.0 {
            return Err(Error::Domain(format!(
                "interference LT needs Re(s) >= 0, got {s}"
            )));
        }
        let exponent = self.pgfl_exponent(link, mobility.displacement(), serving_dist, s)?;
        Ok((-exponent).exp())
    }

    /// `2π ∫ (1 - Σ_n p_n(r) L_h(s·P·G_m/L_n(r))) λ_I(r) r dr`.
    fn pgfl_exponent(
        &self,
        link: LinkKind,
        d: f64,
        serving: f64,
        s: Complex64,
    ) -> Result<Complex64> {
        let p = &self.params;
        let lambda = p.density(link);
        let pg = p.tx_power(link) * p.gain(link, GainRole::Interference);
        if lambda == 0.0 || pg == 0.0 || s.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let h = p.h_r;
        let class = link.class();

        // Where the interferer's Laplace argument crosses one: inside it
        // the integrand saturates at λr, outside it decays as a power law.
        let mut marks = Vec::with_capacity(3);
        for state in LosState::BOTH {
            let law = p.channel.path_loss.law(class, state);
            let eff = (s.norm() * pg / law.intercept).powf(1.0 / law.exponent);
            marks.push(match link {
                LinkKind::Sd => eff - 1.0,
                LinkKind::Sr | LinkKind::Rd => (eff * eff - h * h).max(0.0).sqrt(),
            });
        }
        if class == PropagationClass::GroundToGround {
            marks.push(p.channel.los.d1);
        }
        let panel = |lo: f64, hi: f64| -> Vec<f64> {
            let mut pts: Vec<f64> = marks
                .iter()
                .copied()
                .filter(|&x| x > lo && x < hi && x.is_finite())
                .collect();
            pts.push(lo);
            if hi.is_finite() {
                pts.push(hi);
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts
        };

        let failure = RefCell::new(None);
        let integrand = |r: f64| -> Complex64 {
            let density = match link {
                LinkKind::Rd => match moving_relay_density(lambda, serving, d, r) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                },
                _ => lambda,
            };
            if density == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let p_los = los_probability(link, &p.channel.los, h, r);
            let mut acc = Complex64::new(0.0, 0.0);
            for state in LosState::BOTH {
                let w = state_probability(p_los, state);
                if w == 0.0 {
                    continue;
                }
                let k = p.channel.k_factor.factor(class, state).at(r);
                let arg = s * (pg / path_loss_state(link, &p.channel.path_loss, h, state, r));
                acc += rician_power_lt_complement(k, arg) * w;
            }
            acc * (density * r)
        };

        let moving = link == LinkKind::Rd && d > 0.0;
        let tail_start = if moving { serving + d } else { serving };
        let mut tail_points = panel(tail_start, f64::INFINITY);
        if tail_points.len() == 1 {
            // The reciprocal map needs a positive base.
            tail_points.push(tail_start + tail_start.max(h).max(0.5 / lambda.sqrt()));
        }
        let share = if moving {
            self.tol.inner.scaled(0.5)
        } else {
            self.tol.inner
        };
        let mut total = integrate_mapped_tail(integrand, &tail_points, &share).map(|r| r.value);
        if moving && total.is_ok() {
            let (a, b) = ((serving - d).abs(), serving + d);
            // The density has square-root edges at both ends of the annulus;
            // r = a + (b − a)(1 − cos φ)/2 smooths them.
            let half = 0.5 * (b - a);
            let annulus = integrate(
                |phi: f64| integrand(a + half * (1.0 - phi.cos())) * (half * phi.sin()),
                0.0,
                PI,
                &share.scaled(0.5),
            );
            // When vt > r0 the disk r < vt − r0 is fully repopulated.
            let inner = if serving < d && a > 0.0 {
                integrate_breakpoints(integrand, &panel(0.0, a), &share.scaled(0.5))
                    .map(|r| r.value)
            } else {
                Ok(Complex64::new(0.0, 0.0))
            };
            total = match (total, annulus, inner) {
                (Ok(t), Ok(an), Ok(i)) => Ok(t + an.value + i),
                (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(e),
            };
        }
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(total? * (2.0 * PI))
    }

    /// Coverage of `link` in LoS state `state`, conditioned on the serving
    /// distance `r`. For the second hop `r` is the initial distance of the
    /// serving relay.
    pub fn conditional_cp(
        &self,
        link: LinkKind,
        state: LosState,
        r: f64,
        beta: Threshold,
        mobility: &MobilityState,
    ) -> Result<f64> {
        mobility.validate()?;
        check_distance(r)?;
        let mobility = mobility.canonical();
        let d = match link {
            LinkKind::Rd => mobility.displacement(),
            LinkKind::Sd | LinkKind::Sr => 0.0,
        };
        let key = (
            link,
            state,
            r.to_bits(),
            beta.linear().to_bits(),
            d.to_bits(),
        );
        if let Some(&v) = self.memo.lock().expect("memo poisoned").get(&key) {
            return Ok(v);
        }
        let v = self.compute_conditional_cp(link, state, r, beta, d)?;
        self.memo.lock().expect("memo poisoned").insert(key, v);
        Ok(v)
    }

    fn compute_conditional_cp(
        &self,
        link: LinkKind,
        state: LosState,
        r: f64,
        beta: Threshold,
        d: f64,
    ) -> Result<f64> {
        let p = &self.params;
        let r_now = match link {
            LinkKind::Rd => (r - d).max(0.0),
            _ => r,
        };
        let signal = p.tx_power(link) * p.gain(link, GainRole::Target)
            / path_loss_state(link, &p.channel.path_loss, p.h_r, state, r_now);
        let k = p.channel.k_factor.factor(link.class(), state).at(r_now);
        let b = beta.linear();
        let noise = b * p.sigma2 / signal;
        let interference_scale = b / signal;

        // In units u = τ·S the signal term is L_h(-ju).
        let failure = RefCell::new(None);
        let g = |u: f64| -> Complex64 {
            let lt =
                match self.pgfl_exponent(link, d, r, Complex64::new(0.0, u * interference_scale)) {
                    Ok(e) => (-e).exp(),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                };
            rician_power_lt(k, Complex64::new(0.0, -u))
                * lt
                * Complex64::from_polar(1.0, -u * noise)
        };
        let result = gil_pelaez_integral(g, &self.tol.gil_pelaez, &GP_OPTIONS);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let value = 0.5 + result?.value;
        clamp_probability(
            "conditional coverage",
            value,
            10.0 * self.tol.gil_pelaez.abs_tol,
        )
    }

    /// Coverage of `link` conditioned on the serving distance, mixed over
    /// the LoS state at the current distance.
    pub fn link_cp(
        &self,
        link: LinkKind,
        r: f64,
        beta: Threshold,
        mobility: &MobilityState,
    ) -> Result<f64> {
        mobility.validate()?;
        check_distance(r)?;
        let mobility = mobility.canonical();
        let p = &self.params;
        let r_now = match link {
            LinkKind::Rd => serving_rn_distance(r, mobility.v, mobility.t),
            _ => r,
        };
        let p_los = los_probability(link, &p.channel.los, p.h_r, r_now);
        let mut total = 0.0;
        for state in LosState::BOTH {
            let w = state_probability(p_los, state);
            if w > 0.0 {
                total += w * self.conditional_cp(link, state, r, beta, &mobility)?;
            }
        }
        Ok(total)
    }

    /// Standalone direct-link coverage.
    pub fn direct_cp(&self, beta: Threshold) -> Result<f64> {
        let hover = MobilityState::hover();
        let lt = self.params.lambda_t;
        let value = self.outer_integral(
            |r| Ok(self.link_cp(LinkKind::Sd, r, beta, &hover)? * nearest_pdf(lt, r)),
            0.0,
            self.reach(lt, 0.0),
            &[self.params.channel.los.d1],
        )?;
        clamp_probability("direct-link coverage", value, self.outer_slack())
    }

    /// First-hop coverage, independent of time.
    pub fn first_hop_cp(&self, beta: Threshold) -> Result<f64> {
        let hover = MobilityState::hover();
        let lt = self.params.lambda_t;
        let value = self.outer_integral(
            |r| Ok(self.link_cp(LinkKind::Sr, r, beta, &hover)? * nearest_pdf(lt, r)),
            0.0,
            self.reach(lt, 0.0),
            &[self.params.h_r],
        )?;
        clamp_probability("first-hop coverage", value, self.outer_slack())
    }

    /// Second-hop coverage at the mobility state's time.
    pub fn second_hop_cp(&self, beta: Threshold, mobility: &MobilityState) -> Result<f64> {
        mobility.validate()?;
        let mobility = mobility.canonical();
        let lr = self.params.lambda_r;
        let d = mobility.displacement();
        let value = self.outer_integral(
            |r| Ok(self.link_cp(LinkKind::Rd, r, beta, &mobility)? * nearest_pdf(lr, r)),
            0.0,
            self.reach(lr, 0.0),
            &[d, d + self.params.h_r],
        )?;
        clamp_probability("second-hop coverage", value, self.outer_slack())
    }

    pub fn relay_cp(&self, beta: Threshold, mobility: &MobilityState) -> Result<RelayCp> {
        let first_hop = self.first_hop_cp(beta)?;
        let second_hop = self.second_hop_cp(beta, mobility)?;
        Ok(RelayCp {
            first_hop,
            second_hop,
            two_hop: first_hop * second_hop,
        })
    }

    /// The four region terms of the total coverage.
    pub fn region_terms(&self, beta: Threshold, mobility: &MobilityState) -> Result<RegionTerms> {
        mobility.validate()?;
        let mobility = mobility.canonical();
        let p = &self.params;
        let (lt, lr, h) = (p.lambda_t, p.lambda_r, p.h_r);
        let d = mobility.displacement();
        let hover = MobilityState::hover();

        let sd_cp = |r: f64| self.link_cp(LinkKind::Sd, r, beta, &hover);
        let rd_cp = |r: f64| self.link_cp(LinkKind::Rd, r, beta, &mobility);

        let sd_a = if h > 0.0 {
            self.outer_integral(
                |r| Ok(sd_cp(r)? * nearest_pdf(lt, r)),
                0.0,
                h,
                &[p.channel.los.d1],
            )?
        } else {
            0.0
        };
        // The relay must be farther than the user's TBS allows:
        // r_RD,0 > √(r² − H²) + vt.
        let sd_b = self.outer_integral(
            |r| {
                let gap = (r * r - h * h).max(0.0).sqrt() + d;
                let w = 2.0 * PI * lt * r * (-PI * lt * r * r - PI * lr * gap * gap).exp();
                if w == 0.0 {
                    return Ok(0.0);
                }
                Ok(sd_cp(r)? * w)
            },
            h,
            // gap² ≥ r² − H² bounds the weight by 2πλ_T r e^{-π(λ_T+λ_R)r² + πλ_R H²}.
            self.reach(lt + lr, lr * h * h / (lt + lr)).max(h),
            &[p.channel.los.d1],
        )?;

        let first_hop = self.first_hop_cp(beta)?;
        let srd_a = if d > 0.0 && first_hop > 0.0 {
            let void = (-PI * lt * h * h).exp();
            void * first_hop
                * self.outer_integral(|r| Ok(rd_cp(r)? * nearest_pdf(lr, r)), 0.0, d, &[])?
        } else {
            0.0
        };
        let srd_b = if first_hop > 0.0 {
            let mass = self.outer_integral(
                |r| {
                    let shifted = r - d;
                    let w = 2.0
                        * PI
                        * lr
                        * r
                        * (-PI * lr * r * r - PI * lt * (shifted * shifted + h * h)).exp();
                    if w == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(rd_cp(r)? * w)
                },
                d,
                d + self.reach(lt + lr, 0.0),
                &[d + h],
            )?;
            first_hop * mass
        } else {
            0.0
        };

        let terms = RegionTerms {
            sd_a: clamp_probability("direct region term", sd_a, self.outer_slack())?,
            sd_b: clamp_probability("direct region term", sd_b, self.outer_slack())?,
            srd_a: clamp_probability("relay region term", srd_a, self.outer_slack())?,
            srd_b: clamp_probability("relay region term", srd_b, self.outer_slack())?,
        };
        if terms.total() > 1.0 + 1e-4 {
            return Err(Error::Integrity {
                what: "sum of region terms",
                value: terms.total(),
                tolerance: 1e-4,
            });
        }
        Ok(terms)
    }

    /// Coverage of the typical user with direct/relay selection.
    pub fn total_cp(&self, beta: Threshold, mobility: &MobilityState) -> Result<f64> {
        Ok(self.region_terms(beta, mobility)?.total().min(1.0))
    }

    pub fn evaluate(&self, query: &CoverageQuery, mobility: &MobilityState) -> Result<f64> {
        match query.quantity {
            Quantity::Total => self.total_cp(query.beta, mobility),
            Quantity::DirectLink => self.direct_cp(query.beta),
            Quantity::FirstHop => self.first_hop_cp(query.beta),
            Quantity::SecondHop => self.second_hop_cp(query.beta, mobility),
            Quantity::RelayLink => Ok(self.relay_cp(query.beta, mobility)?.two_hop),
            Quantity::Association => {
                relay_association_probability(&self.params, &mobility.canonical(), &self.tol.outer)
            }
        }
    }

    /// Radius beyond which the weight `2πλr e^{-πλ(r² - c)}` carries less
    /// than a small fraction of the outer tolerance.
    fn reach(&self, lambda: f64, c: f64) -> f64 {
        let eps = OUTER_TAIL_FRACTION * self.tol.outer.abs_tol;
        ((-eps.ln()) / (PI * lambda) + c).sqrt()
    }

    fn outer_slack(&self) -> f64 {
        10.0 * self.tol.outer.abs_tol
    }

    /// `∫_lo^hi f` for an outer integrand whose weight makes the mass beyond
    /// `hi` negligible; `kinks` inside the range become breakpoints.
    fn outer_integral<F>(&self, mut f: F, lo: f64, hi: f64, kinks: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(hi > lo) {
            return Ok(0.0);
        }
        let mut points: Vec<f64> = kinks
            .iter()
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        points.push(lo);
        points.push(hi);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut failure = None;
        let result = integrate_breakpoints(
            |r: f64| match f(r) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            &points,
            &self.tol.outer,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(result?.value)
    }
}

fn check_distance(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "distance must be finite and >= 0, got {r}"
        )))
    }
}

/// Clamps `value` into `[0, 1]` when it is off by at most `slack`.
fn clamp_probability(what: &'static str, value: f64, slack: f64) -> Result<f64> {
    if value >= -slack && value <= 1.0 + slack {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(Error::Integrity {
            what,
            value,
            tolerance: slack,
        })
    }
}
