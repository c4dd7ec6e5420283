//! Monte-Carlo simulator of the full network model in a finite disk.
//!
//! Each drop samples both point processes, moves the relays, resolves the
//! nearest-neighbour association and computes the SINR of every link with
//! independent LoS draws and Rician fading per transmitter. Drops use
//! independent ChaCha8 streams derived from one root seed, so results do
//! not depend on scheduling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::channel::{
    effective_distance, los_probability, path_loss_state, GainRole, LinkKind, LosState,
};
use crate::coverage::{Quantity, Threshold};
use crate::error::{Error, Result};
use crate::model::{same_tbs_probability, MobilityScheme, MobilityState};
use crate::params::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_drops: usize,
    pub seed: u64,
    /// Radius of the simulated disk around the user [m].
    pub disk_radius: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_drops: 50_000,
            seed: 1,
            disk_radius: 100_000.0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_drops == 0 {
            return Err(Error::invalid("mc.n_drops", "must be >= 1"));
        }
        if !(self.disk_radius > 0.0 && self.disk_radius.is_finite()) {
            return Err(Error::invalid("mc.disk_radius", "must be > 0"));
        }
        Ok(())
    }

    fn rng(&self, drop: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(drop as u64);
        rng
    }
}

/// Empirical probability with its 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub half_width: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_counts(hits: usize, n: usize, seed: u64) -> Self {
        let value = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let half_width = if n == 0 {
            f64::INFINITY
        } else {
            1.96 * (value * (1.0 - value) / n as f64).sqrt()
        };
        Self {
            value,
            half_width,
            n,
            seed,
        }
    }

    /// Whether `x` lies within `k` half-widths of the estimate.
    pub fn agrees(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    Direct,
    Relay,
}

/// LoS state and fading power of every transmitter towards one receiver.
#[derive(Debug, Clone, Default)]
pub struct LinkDraws {
    pub los: Vec<bool>,
    pub power: Vec<f64>,
    /// Path loss towards the receiver under the drawn state.
    pub loss: Vec<f64>,
}

/// One sampled network snapshot.
#[derive(Debug, Clone)]
pub struct DropRealization {
    pub tbs: Vec<[f64; 2]>,
    /// Relay positions at `t = 0`.
    pub relays_initial: Vec<[f64; 2]>,
    /// Relay positions at time `t`.
    pub relays: Vec<[f64; 2]>,
    /// TBS → user.
    pub sd: LinkDraws,
    /// TBS → serving relay.
    pub sr: LinkDraws,
    /// Relay → user.
    pub rd: LinkDraws,
    pub serving_tbs: usize,
    pub serving_relay: Option<usize>,
    /// Nearest TBS of the serving relay at time `t`.
    pub relay_tbs: Option<usize>,
    pub association: Association,
    /// Drops discarded because no TBS was sampled.
    pub resamples: u32,
}

/// Per-drop summary from which every estimate is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropOutcome {
    pub r_sd: f64,
    /// Initial ground distance of the serving relay (∞ without relays).
    pub r_rd0: f64,
    /// Ground distance of the serving relay at time `t`.
    pub r_rd: f64,
    /// Ground distance between the serving relay and its TBS.
    pub r_sr: f64,
    pub association: Association,
    pub same_tbs: bool,
    pub sinr_sd: f64,
    pub sinr_sr: f64,
    pub sinr_rd: f64,
    pub resamples: u32,
}

impl DropOutcome {
    /// SINR that decides coverage for `quantity`; `None` for the
    /// threshold-free association indicator.
    pub fn sinr(&self, quantity: Quantity) -> Option<f64> {
        match quantity {
            Quantity::Total => Some(match self.association {
                Association::Direct => self.sinr_sd,
                Association::Relay => self.sinr_sr.min(self.sinr_rd),
            }),
            Quantity::DirectLink => Some(self.sinr_sd),
            Quantity::FirstHop => Some(self.sinr_sr),
            Quantity::SecondHop => Some(self.sinr_rd),
            Quantity::RelayLink => Some(self.sinr_sr.min(self.sinr_rd)),
            Quantity::Association => None,
        }
    }

    pub fn success(&self, quantity: Quantity, beta: Threshold) -> bool {
        match self.sinr(quantity) {
            Some(s) => s >= beta.linear(),
            None => self.association == Association::Relay,
        }
    }
}

/// Unit-power Rician fading power from two standard normals.
#[inline]
fn rician_power(k: f64, n1: f64, n2: f64) -> f64 {
    let sigma = (0.5 / (k + 1.0)).sqrt();
    let x = (k / (k + 1.0)).sqrt() + sigma * n1;
    let y = sigma * n2;
    x * x + y * y
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        if x * x + y * y <= 1.0 {
            return [radius * x, radius * y];
        }
    }
}

/// Uniformly oriented vector of length `len`.
fn random_step(rng: &mut ChaCha8Rng, len: f64) -> [f64; 2] {
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        let n2 = x * x + y * y;
        if n2 <= 1.0 && n2 > 1e-12 {
            let k = len / n2.sqrt();
            return [k * x, k * y];
        }
    }
}

fn sample_ppp(rng: &mut ChaCha8Rng, lambda: f64, radius: f64) -> Result<Vec<[f64; 2]>> {
    let mean = lambda * PI * radius * radius;
    let n = if mean > 0.0 {
        let poisson = Poisson::new(mean)
            .map_err(|e| Error::Domain(format!("cannot sample Poisson({mean}): {e}")))?;
        let n: f64 = poisson.sample(rng);
        n as usize
    } else {
        0
    };
    Ok((0..n).map(|_| uniform_in_disk(rng, radius)).collect())
}

#[inline]
fn norm(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

fn nearest(points: &[[f64; 2]], from: [f64; 2]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in points.iter().enumerate() {
        let d2 = (p[0] - from[0]).powi(2) + (p[1] - from[1]).powi(2);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, d2)| (i, d2.sqrt()))
}

/// Draws LoS states and fading powers of `link` for transmitters at the
/// given ground distances, together with the resulting path losses.
fn draw_link(
    rng: &mut ChaCha8Rng,
    params: &NetworkParams,
    link: LinkKind,
    distances: impl Iterator<Item = f64>,
) -> LinkDraws {
    let class = link.class();
    let law_los = params.channel.path_loss.law(class, LosState::Los);
    let law_nlos = params.channel.path_loss.law(class, LosState::Nlos);
    let k_los = params.channel.k_factor.factor(class, LosState::Los);
    let k_nlos = params.channel.k_factor.factor(class, LosState::Nlos);
    let mut out = LinkDraws::default();
    for r in distances {
        let u: f64 = rng.random();
        let n1: f64 = StandardNormal.sample(rng);
        let n2: f64 = StandardNormal.sample(rng);
        let los = u < los_probability(link, &params.channel.los, params.h_r, r);
        let (law, k) = if los {
            (law_los, &k_los)
        } else {
            (law_nlos, &k_nlos)
        };
        out.los.push(los);
        out.power.push(rician_power(k.at(r), n1, n2));
        out.loss
            .push(law.loss(effective_distance(link, params.h_r, r)));
    }
    out
}

/// Samples one drop.
pub fn simulate_drop(
    params: &NetworkParams,
    mobility: &MobilityState,
    cfg: &McConfig,
    drop: usize,
) -> Result<DropRealization> {
    let mut rng = cfg.rng(drop);
    let radius = cfg.disk_radius;
    let mut resamples = 0u32;
    let tbs = loop {
        let tbs = sample_ppp(&mut rng, params.lambda_t, radius)?;
        if !tbs.is_empty() {
            break tbs;
        }
        resamples += 1;
        if resamples > 1000 {
            return Err(Error::Domain(
                "no TBS in the simulation disk after 1000 attempts".into(),
            ));
        }
    };
    let relays_initial = sample_ppp(&mut rng, params.lambda_r, radius)?;

    let d = mobility.v * mobility.t;
    let steps: Vec<[f64; 2]> = if d > 0.0 && mobility.scheme != MobilityScheme::Hover {
        relays_initial
            .iter()
            .map(|_| random_step(&mut rng, d))
            .collect()
    } else {
        vec![[0.0; 2]; relays_initial.len()]
    };
    let wander = |p: [f64; 2], s: &[f64; 2]| [p[0] + s[0], p[1] + s[1]];
    let origin = [0.0, 0.0];
    let (relays, serving_relay) = match mobility.scheme {
        MobilityScheme::Hover => {
            let s = nearest(&relays_initial, origin).map(|x| x.0);
            (relays_initial.clone(), s)
        }
        MobilityScheme::RandomDirection => {
            let moved: Vec<[f64; 2]> = relays_initial
                .iter()
                .zip(&steps)
                .map(|(&p, s)| wander(p, s))
                .collect();
            let s = nearest(&moved, origin).map(|x| x.0);
            (moved, s)
        }
        MobilityScheme::TowardUser => {
            let s = nearest(&relays_initial, origin).map(|x| x.0);
            let moved = relays_initial
                .iter()
                .zip(&steps)
                .enumerate()
                .map(|(i, (&p, st))| {
                    if Some(i) == s {
                        let r = norm(p);
                        let keep = if r > 0.0 { (1.0 - d / r).max(0.0) } else { 0.0 };
                        [p[0] * keep, p[1] * keep]
                    } else {
                        wander(p, st)
                    }
                })
                .collect();
            (moved, s)
        }
    };

    let (serving_tbs, r_sd) = nearest(&tbs, origin).expect("non-empty");
    let relay_pos = serving_relay.map(|i| relays[i]);
    let relay_tbs = relay_pos.and_then(|q| nearest(&tbs, q)).map(|x| x.0);
    let association = match relay_pos {
        Some(q) if r_sd > norm(q).hypot(params.h_r) => Association::Relay,
        _ => Association::Direct,
    };

    let sd = draw_link(&mut rng, params, LinkKind::Sd, tbs.iter().map(|&x| norm(x)));
    let sr = match relay_pos {
        Some(q) => draw_link(
            &mut rng,
            params,
            LinkKind::Sr,
            tbs.iter().map(|&x| dist(x, q)),
        ),
        None => LinkDraws::default(),
    };
    let rd = draw_link(
        &mut rng,
        params,
        LinkKind::Rd,
        relays.iter().map(|&x| norm(x)),
    );

    Ok(DropRealization {
        tbs,
        relays_initial,
        relays,
        sd,
        sr,
        rd,
        serving_tbs,
        serving_relay,
        relay_tbs,
        association,
        resamples,
    })
}

impl DropRealization {
    /// Link SINRs counting only interferers whose (initial) position lies
    /// within `keep_radius` of the user.
    pub fn outcome_within(&self, params: &NetworkParams, keep_radius: f64) -> DropOutcome {
        let sinr = |link: LinkKind, anchors: &[[f64; 2]], draws: &LinkDraws, serving: usize| {
            let p = params.tx_power(link);
            let signal = p * params.gain(link, GainRole::Target) * draws.power[serving]
                / draws.loss[serving];
            let g_int = p * params.gain(link, GainRole::Interference);
            let mut interference = 0.0;
            if g_int > 0.0 {
                let r2 = keep_radius * keep_radius;
                for i in 0..anchors.len() {
                    let a = anchors[i];
                    if i != serving && a[0] * a[0] + a[1] * a[1] <= r2 {
                        interference += draws.power[i] / draws.loss[i];
                    }
                }
            }
            signal / (g_int * interference + params.sigma2)
        };

        let r_sd = norm(self.tbs[self.serving_tbs]);
        let sinr_sd = sinr(LinkKind::Sd, &self.tbs, &self.sd, self.serving_tbs);
        let (r_rd0, r_rd, r_sr, sinr_sr, sinr_rd, same_tbs) =
            match (self.serving_relay, self.relay_tbs) {
                (Some(s), Some(st)) => {
                    let q = self.relays[s];
                    (
                        norm(self.relays_initial[s]),
                        norm(q),
                        dist(self.tbs[st], q),
                        sinr(LinkKind::Sr, &self.tbs, &self.sr, st),
                        sinr(LinkKind::Rd, &self.relays_initial, &self.rd, s),
                        st == self.serving_tbs,
                    )
                }
                _ => (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0, 0.0, false),
            };
        DropOutcome {
            r_sd,
            r_rd0,
            r_rd,
            r_sr,
            association: self.association,
            same_tbs,
            sinr_sd,
            sinr_sr,
            sinr_rd,
            resamples: self.resamples,
        }
    }

    pub fn outcome(&self, params: &NetworkParams) -> DropOutcome {
        self.outcome_within(params, f64::INFINITY)
    }
}

/// Outcomes of a batch of drops for one scenario, in drop order.
#[derive(Debug, Clone)]
pub struct McRun {
    pub config: McConfig,
    pub outcomes: Vec<DropOutcome>,
}

impl McRun {
    pub fn resamples(&self) -> u64 {
        self.outcomes.iter().map(|o| o.resamples as u64).sum()
    }

    pub fn estimate(&self, quantity: Quantity, beta: Threshold) -> McEstimate {
        let hits = self
            .outcomes
            .iter()
            .filter(|o| o.success(quantity, beta))
            .count();
        McEstimate::from_counts(hits, self.outcomes.len(), self.config.seed)
    }

    /// Fraction of relay-equipped drops whose relay shares the user's TBS.
    pub fn same_tbs_rate(&self) -> McEstimate {
        let with_relay = self.outcomes.iter().filter(|o| o.r_rd.is_finite());
        let (hits, n) = with_relay.fold((0, 0), |(h, n), o| (h + o.same_tbs as usize, n + 1));
        McEstimate::from_counts(hits, n, self.config.seed)
    }

    /// Same-TBS rate among the drops served through the relay.
    pub fn same_tbs_rate_associated(&self) -> McEstimate {
        let relayed = self
            .outcomes
            .iter()
            .filter(|o| o.association == Association::Relay);
        let (hits, n) = relayed.fold((0, 0), |(h, n), o| (h + o.same_tbs as usize, n + 1));
        McEstimate::from_counts(hits, n, self.config.seed)
    }

    /// Same-TBS rates binned by `(r_SD, r_RD(t))`, each with the mean model
    /// prediction over the drops in the bin.
    pub fn same_tbs_bins(
        &self,
        params: &NetworkParams,
        sd_edges: &[f64],
        rd_edges: &[f64],
    ) -> Vec<SameTbsBin> {
        let mut bins = Vec::new();
        for sd in sd_edges.windows(2) {
            for rd in rd_edges.windows(2) {
                let inside: Vec<&DropOutcome> = self
                    .outcomes
                    .iter()
                    .filter(|o| {
                        o.r_sd >= sd[0] && o.r_sd < sd[1] && o.r_rd >= rd[0] && o.r_rd < rd[1]
                    })
                    .collect();
                let hits = inside.iter().filter(|o| o.same_tbs).count();
                let model: f64 = inside
                    .iter()
                    .map(|o| same_tbs_probability(params, o.r_sd, o.r_rd))
                    .sum::<f64>()
                    / inside.len().max(1) as f64;
                bins.push(SameTbsBin {
                    r_sd: (sd[0], sd[1]),
                    r_rd: (rd[0], rd[1]),
                    observed: McEstimate::from_counts(hits, inside.len(), self.config.seed),
                    model,
                });
            }
        }
        bins
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SameTbsBin {
    pub r_sd: (f64, f64),
    pub r_rd: (f64, f64),
    pub observed: McEstimate,
    /// Mean of the closed-form same-TBS probability over the bin's drops.
    pub model: f64,
}

/// Runs `cfg.n_drops` drops in parallel, keeping interferers within
/// `keep_radius` of the user.
pub fn run_drops_within(
    params: &NetworkParams,
    mobility: &MobilityState,
    cfg: &McConfig,
    keep_radius: f64,
) -> Result<McRun> {
    params.validate()?;
    mobility.validate()?;
    cfg.validate()?;
    let outcomes = (0..cfg.n_drops)
        .into_par_iter()
        .map(|i| {
            simulate_drop(params, mobility, cfg, i).map(|d| d.outcome_within(params, keep_radius))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McRun {
        config: *cfg,
        outcomes,
    })
}

pub fn run_drops(
    params: &NetworkParams,
    mobility: &MobilityState,
    cfg: &McConfig,
) -> Result<McRun> {
    run_drops_within(params, mobility, cfg, f64::INFINITY)
}

pub fn estimate(
    params: &NetworkParams,
    quantity: Quantity,
    beta: Threshold,
    mobility: &MobilityState,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(run_drops(params, mobility, cfg)?.estimate(quantity, beta))
}

pub fn measure_same_tbs_rate(
    params: &NetworkParams,
    mobility: &MobilityState,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(run_drops(params, mobility, cfg)?.same_tbs_rate())
}

/// Ground distance from the user to the nearest point of a PPP of density
/// `lambda`, one sample per drop.
pub fn sample_nearest_distances(lambda: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..cfg.n_drops)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i);
            loop {
                let pts = sample_ppp(&mut rng, lambda, cfg.disk_radius)?;
                if let Some((_, r)) = nearest(&pts, [0.0, 0.0]) {
                    return Ok(r);
                }
            }
        })
        .collect()
}

/// Interfering-relay counts per annulus around the user, over the drops
/// whose serving relay started in `r0_range`, against the expected counts
/// under the model density.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialHistogram {
    pub edges: Vec<f64>,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    pub drops: usize,
}

impl RadialHistogram {
    /// Poisson 95% half-width of each bin count.
    pub fn half_width(&self, bin: usize) -> f64 {
        1.96 * self.expected[bin].sqrt()
    }
}

/// Counts interfering relays per annulus; `expected(r0, lo, hi)` gives the
/// model count of interferers in `[lo, hi)` given the serving relay's
/// initial distance.
pub fn interferer_histogram<F>(
    params: &NetworkParams,
    mobility: &MobilityState,
    cfg: &McConfig,
    r0_range: (f64, f64),
    edges: &[f64],
    expected: F,
) -> Result<RadialHistogram>
where
    F: Fn(f64, f64, f64) -> Result<f64> + Sync,
{
    params.validate()?;
    mobility.validate()?;
    cfg.validate()?;
    let bins = edges.len().saturating_sub(1);
    let per_drop = (0..cfg.n_drops)
        .into_par_iter()
        .map(|i| -> Result<Option<(Vec<u64>, Vec<f64>)>> {
            let drop = simulate_drop(params, mobility, cfg, i)?;
            let Some(s) = drop.serving_relay else {
                return Ok(None);
            };
            let r0 = norm(drop.relays_initial[s]);
            if r0 < r0_range.0 || r0 >= r0_range.1 {
                return Ok(None);
            }
            let mut counts = vec![0u64; bins];
            for (j, &p) in drop.relays.iter().enumerate() {
                if j == s {
                    continue;
                }
                let r = norm(p);
                if let Some(b) = edges.windows(2).position(|w| r >= w[0] && r < w[1]) {
                    counts[b] += 1;
                }
            }
            let exp = edges
                .windows(2)
                .map(|w| expected(r0, w[0], w[1]))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Some((counts, exp)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hist = RadialHistogram {
        edges: edges.to_vec(),
        observed: vec![0; bins],
        expected: vec![0.0; bins],
        drops: 0,
    };
    for (counts, exp) in per_drop.into_iter().flatten() {
        hist.drops += 1;
        for b in 0..bins {
            hist.observed[b] += counts[b];
            hist.expected[b] += exp[b];
        }
    }
    Ok(hist)
}

/// Coverage of one link with its serving transmitter pinned at ground
/// distance `r` (initial distance for the second hop), interferers drawn
/// from the model's conditional point process and the LoS state of the
/// serving link forced to `state`.
pub fn estimate_conditional_cp(
    params: &NetworkParams,
    link: LinkKind,
    state: LosState,
    r: f64,
    beta: Threshold,
    mobility: &MobilityState,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let samples = conditional_samples(params, link, state, r, mobility, cfg)?;
    let hits = samples
        .iter()
        .filter(|(signal, interference)| signal / (interference + params.sigma2) >= beta.linear())
        .count();
    Ok(McEstimate::from_counts(hits, samples.len(), cfg.seed))
}

/// Aggregate interference samples of `link` given the serving distance.
pub fn conditional_interference(
    params: &NetworkParams,
    link: LinkKind,
    r: f64,
    mobility: &MobilityState,
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    Ok(
        conditional_samples(params, link, LosState::Los, r, mobility, cfg)?
            .into_iter()
            .map(|(_, i)| i)
            .collect(),
    )
}

/// `(signal power, interference power)` pairs at a receiver in the origin.
fn conditional_samples(
    params: &NetworkParams,
    link: LinkKind,
    state: LosState,
    r: f64,
    mobility: &MobilityState,
    cfg: &McConfig,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    mobility.validate()?;
    cfg.validate()?;
    let mobility = mobility.canonical();
    let d = match link {
        LinkKind::Rd => mobility.displacement(),
        LinkKind::Sd | LinkKind::Sr => 0.0,
    };
    let lambda = params.density(link);
    let p = params.tx_power(link);
    let g_int = p * params.gain(link, GainRole::Interference);
    let h = params.h_r;
    let class = link.class();
    let r_now = (r - d).max(0.0);
    let s_state = params.channel.k_factor.factor(class, state).at(r_now);
    let s_loss = path_loss_state(link, &params.channel.path_loss, h, state, r_now);
    let signal_gain = p * params.gain(link, GainRole::Target) / s_loss;
    (0..cfg.n_drops)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i);
            let n1: f64 = StandardNormal.sample(&mut rng);
            let n2: f64 = StandardNormal.sample(&mut rng);
            let signal = signal_gain * rician_power(s_state, n1, n2);
            // Initial interferers: the PPP outside the serving disk.
            let pts: Vec<[f64; 2]> = sample_ppp(&mut rng, lambda, cfg.disk_radius)?
                .into_iter()
                .filter(|&x| norm(x) > r)
                .collect();
            let mut interference = 0.0;
            for x in pts {
                let step = random_step(&mut rng, d.max(f64::MIN_POSITIVE));
                let pos = [x[0] + step[0], x[1] + step[1]];
                let rr = norm(pos);
                let draws = draw_link(&mut rng, params, link, std::iter::once(rr));
                let st = if draws.los[0] {
                    LosState::Los
                } else {
                    LosState::Nlos
                };
                interference +=
                    draws.power[0] / path_loss_state(link, &params.channel.path_loss, h, st, rr);
            }
            Ok((signal, g_int * interference))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> McConfig {
        McConfig {
            n_drops: n,
            seed: 7,
            disk_radius: 30_000.0,
        }
    }

    #[test]
    fn rician_power_has_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [0.0, 1.0, 10.0] {
            let n = 200_000;
            let mean: f64 = (0..n)
                .map(|_| {
                    rician_power(
                        k,
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    )
                })
                .sum::<f64>()
                / n as f64;
            assert!((mean - 1.0).abs() < 0.01, "K={k}: {mean}");
        }
    }

    #[test]
    fn half_width_formula() {
        let e = McEstimate::from_counts(250, 1000, 0);
        assert_eq!(e.value, 0.25);
        assert!((e.half_width - 1.96 * (0.25f64 * 0.75 / 1000.0).sqrt()).abs() < 1e-15);
        assert!(e.agrees(0.26, 1.0));
    }

    #[test]
    fn drops_are_reproducible() {
        let p = NetworkParams::default();
        let m = MobilityState::toward_user(20.0, 30.0);
        let a = run_drops(&p, &m, &cfg(40)).unwrap();
        let b = run_drops(&p, &m, &cfg(40)).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        let mut other = cfg(40);
        other.seed = 8;
        assert_ne!(run_drops(&p, &m, &other).unwrap().outcomes, a.outcomes);
    }

    #[test]
    fn serving_nodes_are_nearest() {
        let p = NetworkParams::default();
        let m = MobilityState::toward_user(20.0, 0.0);
        for i in 0..10 {
            let d = simulate_drop(&p, &m, &cfg(10), i).unwrap();
            let r_sd = norm(d.tbs[d.serving_tbs]);
            assert!(d.tbs.iter().all(|&x| norm(x) >= r_sd));
            let s = d.serving_relay.unwrap();
            assert!(d
                .relays_initial
                .iter()
                .all(|&x| norm(x) >= norm(d.relays_initial[s])));
            let q = d.relays[s];
            let st = d.relay_tbs.unwrap();
            assert!(d.tbs.iter().all(|&x| dist(x, q) >= dist(d.tbs[st], q)));
            assert_eq!(d.sd.power.len(), d.tbs.len());
            assert_eq!(d.rd.los.len(), d.relays.len());
        }
    }

    #[test]
    fn serving_relay_reaches_user() {
        let p = NetworkParams::default();
        let m = MobilityState::toward_user(40.0, 5.0 * 1581.0 / 40.0 * 4.0);
        let run = run_drops(&p, &m, &cfg(200)).unwrap();
        assert!(run.outcomes.iter().all(|o| o.r_rd == 0.0));
    }

    #[test]
    fn no_relays_means_direct() {
        let p = NetworkParams {
            lambda_r: 1e-30,
            ..Default::default()
        };
        let run = run_drops(&p, &MobilityState::hover(), &cfg(300)).unwrap();
        assert!(run
            .outcomes
            .iter()
            .all(|o| o.association == Association::Direct));
        let a = run.estimate(Quantity::Association, Threshold::vanishing());
        assert_eq!(a.value, 0.0);
    }

    #[test]
    fn trivial_thresholds() {
        let p = NetworkParams::default();
        let m = MobilityState::hover();
        let run = run_drops(&p, &m, &cfg(300)).unwrap();
        let tiny = Threshold::from_linear(1e-300).unwrap();
        assert_eq!(run.estimate(Quantity::Total, tiny).value, 1.0);

        let mut quiet = p.clone();
        quiet.sigma2 = 0.0;
        quiet.gains.tbs_side = 0.0;
        quiet.gains.rn_side = 0.0;
        let run = run_drops(&quiet, &m, &cfg(300)).unwrap();
        assert_eq!(
            run.estimate(Quantity::Total, Threshold::from_db(30.0).unwrap())
                .value,
            1.0
        );
    }

    #[test]
    fn ground_level_relays_split_by_density() {
        // H_R = 0, t = 0: the nearest node of the superposition is a relay
        // with probability λ_R / (λ_R + λ_T).
        let p = NetworkParams::default().with_altitude(0.0);
        let run = run_drops(&p, &MobilityState::hover(), &cfg(4000)).unwrap();
        let est = run.estimate(Quantity::Association, Threshold::vanishing());
        let expected = p.lambda_r / (p.lambda_r + p.lambda_t);
        assert!(est.agrees(expected, 3.0), "{est:?} vs {expected}");
    }

    #[test]
    fn dense_tbs_rarely_shared() {
        let p = NetworkParams {
            lambda_t: 1e-4,
            ..Default::default()
        };
        let c = McConfig {
            n_drops: 200,
            seed: 1,
            disk_radius: 1_000.0,
        };
        let rate = measure_same_tbs_rate(&p, &MobilityState::hover(), &c).unwrap();
        assert!(rate.value < 0.05, "{rate:?}");
    }

    #[test]
    fn truncation_only_removes_interference() {
        let p = NetworkParams::default();
        let m = MobilityState::toward_user(20.0, 40.0);
        let d = simulate_drop(&p, &m, &cfg(1), 0).unwrap();
        let full = d.outcome(&p);
        let cut = d.outcome_within(&p, 5_000.0);
        assert!(cut.sinr_sd >= full.sinr_sd);
        assert!(cut.sinr_rd >= full.sinr_rd);
        assert_eq!(cut.association, full.association);
    }
}
