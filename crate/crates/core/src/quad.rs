//! Numerical integration: adaptive Gauss-Kronrod on finite intervals,
//! semi-infinite intervals through a reciprocal tail map, and the
//! oscillatory Gil-Pelaez inversion integral with its `1/τ` weight.
//!
//! Everything here is deterministic: node placement only depends on the
//! integrand values and the [`QuadratureSpec`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Kronrod abscissae of the 21-point rule, positive half, descending.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_923_479,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Weights of the embedded 10-point Gauss rule (nodes are `XGK[1], XGK[3], ..`).
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values the integrator can accumulate: real or complex.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Tolerances and limits for one integration layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of interval bisections.
    pub max_subdivisions: usize,
    /// Relative envelope level (w.r.t. the scanned peak) below which a
    /// semi-infinite integrand is handed over to the mapped tail.
    pub envelope_threshold: f64,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_subdivisions >= 1
            && self.envelope_threshold > 0.0
            && self.envelope_threshold < 1.0;
        if ok {
            Ok(())
        } else {
            Err(QuadError::InvalidSpec(*self))
        }
    }

    /// Same spec with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-7,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            envelope_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub error: f64,
    pub subdivisions: usize,
    /// Split point between direct integration and the mapped tail, if any.
    pub truncation: Option<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("invalid quadrature spec: {0:?}")]
    InvalidSpec(QuadratureSpec),
    #[error("tolerance not reached after {subdivisions} subdivisions (estimate {best}, error {error:e})")]
    NoConvergence {
        best: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
    #[error("integrand envelope still {envelope:e} at the truncation cap {cap:e}")]
    NonDecaying { envelope: f64, cap: f64 },
}

/// How a segment's local coordinate maps onto the real line.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// Identity on `[lo, hi]`.
    Direct,
    /// `x = base / w` for `w ∈ (lo, hi] ⊂ (0, 1]`, Jacobian `base / w²`.
    Reciprocal { base: f64 },
}

impl Map {
    #[inline]
    fn apply(self, w: f64) -> (f64, f64) {
        match self {
            Map::Direct => (w, 1.0),
            Map::Reciprocal { base } => (base / w, base / (w * w)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    lo: f64,
    hi: f64,
    map: Map,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            // Ties broken by position so the refinement order is reproducible.
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// One 21-point Gauss-Kronrod panel; returns (value, error estimate).
fn gk21<T, F>(f: &mut F, lo: f64, hi: f64, map: Map) -> Result<(T, f64), QuadError>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut eval = |w: f64| -> Result<T, QuadError> {
        let (x, jac) = map.apply(w);
        let y = f(x) * jac;
        if y.is_finite_value() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };

    let mut values = [T::default(); 21];
    values[10] = eval(center)?;
    for j in 0..10 {
        let dx = half * XGK[j];
        values[j] = eval(center - dx)?;
        values[20 - j] = eval(center + dx)?;
    }

    let mut kronrod = values[10] * WGK[10];
    let mut gauss = T::default();
    let mut abs_sum = values[10].magnitude() * WGK[10];
    for j in 0..10 {
        let pair = values[j] + values[20 - j];
        kronrod = kronrod + pair * WGK[j];
        abs_sum += WGK[j] * (values[j].magnitude() + values[20 - j].magnitude());
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[10] * (values[10] - mean).magnitude();
    for j in 0..10 {
        asc += WGK[j] * ((values[j] - mean).magnitude() + (values[20 - j] - mean).magnitude());
    }

    let width = half.abs();
    let res_abs = abs_sum * width;
    let res_asc = asc * width;
    let mut err = (kronrod - gauss).magnitude() * half.abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((kronrod * half, err))
}

fn run_adaptive<T, F>(
    f: &mut F,
    initial: Vec<(f64, f64, Map)>,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult<T>, QuadError>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    spec.validate()?;
    let mut heap = BinaryHeap::with_capacity(initial.len() + 16);
    // Segments too narrow to split further; their error stays in the budget.
    let mut frozen: Vec<Segment<T>> = Vec::new();
    for (lo, hi, map) in initial {
        if hi <= lo {
            continue;
        }
        let (value, error) = gk21(f, lo, hi, map)?;
        heap.push(Segment {
            lo,
            hi,
            map,
            value,
            error,
        });
    }

    let mut subdivisions = 0;
    loop {
        let (value, error) = heap
            .iter()
            .chain(frozen.iter())
            .fold((T::default(), 0.0), |(v, e), s| (v + s.value, e + s.error));
        if error <= spec.target(value.magnitude()) {
            return Ok(QuadratureResult {
                value,
                error,
                subdivisions,
                truncation: None,
            });
        }
        let Some(worst) = heap.pop() else {
            return Err(QuadError::NoConvergence {
                best: value.magnitude(),
                error,
                subdivisions,
            });
        };
        if subdivisions >= spec.max_subdivisions {
            return Err(QuadError::NoConvergence {
                best: value.magnitude(),
                error,
                subdivisions,
            });
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let scale = worst.lo.abs().max(worst.hi.abs()).max(f64::MIN_POSITIVE);
        if worst.hi - worst.lo <= 1e-13 * scale || mid <= worst.lo || mid >= worst.hi {
            frozen.push(worst);
            continue;
        }
        subdivisions += 1;
        for (lo, hi) in [(worst.lo, mid), (mid, worst.hi)] {
            let (value, error) = gk21(f, lo, hi, worst.map)?;
            heap.push(Segment {
                lo,
                hi,
                map: worst.map,
                value,
                error,
            });
        }
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult<T>, QuadError>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if b < a {
        let r = integrate(f, b, a, spec)?;
        return Ok(QuadratureResult {
            value: r.value * -1.0,
            ..r
        });
    }
    run_adaptive(&mut f, vec![(a, b, Map::Direct)], spec)
}

/// Adaptive integral over consecutive `points` (sorted ascending); each
/// gap is an initial panel, so kinks should be listed as points.
pub fn integrate_breakpoints<T, F>(
    mut f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadratureResult<T>, QuadError>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let initial = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], Map::Direct))
        .collect();
    run_adaptive(&mut f, initial, spec)
}

/// Integral over `[points[0], ∞)`: the gaps between `points` are integrated
/// directly and `[last, ∞)` through `x = last / w`. For power-law tails
/// decaying like `x⁻²` or faster the mapped integrand stays bounded.
pub fn integrate_mapped_tail<T, F>(
    mut f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadratureResult<T>, QuadError>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let last = *points.last().expect("at least one point");
    assert!(last > 0.0, "tail base must be positive");
    let mut initial: Vec<(f64, f64, Map)> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], Map::Direct))
        .collect();
    initial.push((0.0, 0.5, Map::Reciprocal { base: last }));
    initial.push((0.5, 1.0, Map::Reciprocal { base: last }));
    let mut r = run_adaptive(&mut f, initial, spec)?;
    r.truncation = Some(last);
    Ok(r)
}

/// Integral of `f` over `[lower, ∞)`.
///
/// A logarithmic warm scan starting at `lower + scale·2⁻⁸` locates the
/// envelope peak; the truncation point is the first scanned abscissa past
/// the peak after which every scanned value stays below
/// `spec.envelope_threshold · peak`. The remainder beyond it is not dropped
/// but integrated through the reciprocal map.
pub fn integrate_semi_infinite<T, F>(
    mut f: F,
    lower: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult<T>, QuadError>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    spec.validate()?;
    assert!(scale > 0.0, "scale must be positive");
    let grid: Vec<f64> = (-16..=120)
        .map(|k| lower + scale * 2f64.powf(k as f64 * 0.5))
        .collect();
    let env: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let v = f(x).magnitude();
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if let Some(i) = env.iter().position(|v| v.is_infinite()) {
        return Err(QuadError::NonFinite { at: grid[i] });
    }
    let (peak_idx, peak) = env
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let cut = peak * spec.envelope_threshold;
    // Last scanned index that is still above the threshold.
    let last_above = env.iter().rposition(|&v| v > cut).unwrap_or(peak_idx);
    let split_idx = (last_above + 1).max(peak_idx + 1).min(grid.len() - 1);
    let split = grid[split_idx];

    // Initial panels along the geometric grid, coarsened to factors of 4.
    let mut points = vec![lower];
    points.extend(grid.iter().take(split_idx + 1).step_by(4).copied());
    if *points.last().unwrap() < split {
        points.push(split);
    }
    points.dedup_by(|a, b| a <= b);
    if split <= 0.0 {
        return Err(QuadError::NonDecaying {
            envelope: peak,
            cap: split,
        });
    }
    integrate_mapped_tail(f, &points, spec)
}

/// Tuning for [`gil_pelaez_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilPelaezOptions {
    /// Width of the first panel `[0, w₀]`; later panels double.
    pub initial_width: f64,
    /// Panels stop with an error once they would pass this abscissa.
    pub cap: f64,
}

impl Default for GilPelaezOptions {
    fn default() -> Self {
        Self {
            initial_width: 1.0 / 16.0,
            cap: 2f64.powi(48),
        }
    }
}

/// Below this abscissa `Im g(τ)/τ` is extrapolated instead of evaluated.
const TAU_SMALL: f64 = 1e-9;

/// `(1/π) ∫₀^∞ Im[g(τ)] / τ dτ` for a characteristic-function-like `g`
/// with `g(0) = 1` and `|g| ≤ 1`.
///
/// The axis is covered by doubling panels. After each panel the remaining
/// tail is estimated from the local phase rate ω of `g`: when the tail
/// oscillates (`ωτ ≥ 4`) a two-term integration-by-parts expansion is
/// added, otherwise the residual is bounded by `|g(τ)|`. Integration stops
/// when two consecutive panel ends have a residual below a quarter of the
/// absolute tolerance.
pub fn gil_pelaez_integral<F>(
    mut g: F,
    spec: &QuadratureSpec,
    options: &GilPelaezOptions,
) -> Result<QuadratureResult<f64>, QuadError>
where
    F: FnMut(f64) -> Complex64,
{
    spec.validate()?;
    let mut small_cache: Option<f64> = None;
    let mut weighted = |tau: f64, g: &mut F| -> f64 {
        if tau >= TAU_SMALL {
            return g(tau).im / tau;
        }
        // Quadratic extrapolation of h(τ) = Im g(τ)/τ from τ₀, 2τ₀, 3τ₀.
        let limit = *small_cache.get_or_insert_with(|| {
            let h = |k: f64, g: &mut F| g(k * TAU_SMALL).im / (k * TAU_SMALL);
            let (h1, h2, h3) = (h(1.0, g), h(2.0, g), h(3.0, g));
            3.0 * h1 - 3.0 * h2 + h3
        });
        limit
    };

    let mut total = 0.0;
    let mut error = 0.0;
    let mut subdivisions = 0;
    // A fast initial phase (e.g. a large deterministic offset) would pack
    // many periods into the first panel; shrink it to about one radian.
    let probe = options.initial_width * 1e-6;
    let omega0 = (g(probe).arg() / probe).abs();
    let mut lo = 0.0;
    let mut hi = if omega0 * options.initial_width > 1.0 {
        1.0 / omega0
    } else {
        options.initial_width
    };
    let mut settled = 0;
    loop {
        let panel = {
            let mut fw = |tau: f64| weighted(tau, &mut g);
            integrate(&mut fw, lo, hi, &spec.scaled(0.25))?
        };
        total += panel.value;
        error += panel.error;
        subdivisions += panel.subdivisions + 1;

        let (tail, residual) = oscillatory_tail(&mut g, hi);
        if residual < 0.25 * spec.abs_tol {
            settled += 1;
        } else {
            settled = 0;
        }
        if settled >= 2 {
            total += tail;
            error += residual;
            break;
        }
        if hi * 2.0 > options.cap {
            return Err(QuadError::NonDecaying {
                envelope: g(hi).norm(),
                cap: options.cap,
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    Ok(QuadratureResult {
        value: total / std::f64::consts::PI,
        error: error / std::f64::consts::PI,
        subdivisions,
        truncation: Some(hi),
    })
}

/// Tail estimate of `∫_τ^∞ Im g(u)/u du` and its residual error bound.
///
/// Writes `g(u)/u = B(u)·e^{jωu}` with the local phase rate `ω` and
/// integrates by parts twice: `∫ ≈ e^{jωτ}(jB/ω − B'/ω²)`, leaving the
/// `|B''|/ω³` term as the residual. A chirp or fast amplitude change shows
/// up in `B''` and keeps the residual honest.
fn oscillatory_tail<F>(g: &mut F, tau: f64) -> (f64, f64)
where
    F: FnMut(f64) -> Complex64,
{
    let f0 = g(tau) / tau;
    let amp = f0.norm() * tau;
    if amp == 0.0 {
        return (0.0, 0.0);
    }
    let h = tau * 2f64.powi(-12);
    let f1 = g(tau + h) / (tau + h);
    let f2 = g(tau + 2.0 * h) / (tau + 2.0 * h);
    let omega = (f1 / f0).arg() / h;
    if !omega.is_finite() || omega.abs() * tau < 4.0 {
        return (0.0, amp);
    }
    let rot = |k: f64| Complex64::from_polar(1.0, -omega * k * h);
    let (b0, b1, b2) = (f0, f1 * rot(1.0), f2 * rot(2.0));
    let d1 = (-3.0 * b0 + 4.0 * b1 - b2) / (2.0 * h);
    let d2 = (b0 - 2.0 * b1 + b2) / (h * h);
    let lead = Complex64::i() * f0 / omega - d1 / (omega * omega);
    (lead.im, d2.norm() / omega.abs().powi(3))
}
