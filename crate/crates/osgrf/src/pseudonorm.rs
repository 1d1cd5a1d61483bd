//! E-homogeneous pseudo-norms, anisotropic polar coordinates, and the
//! empirical comparison constants between pseudo-norms.
//!
//! A pseudo-norm here is a continuous gauge rho with rho(a^E x) = a rho(x)
//! for all a > 0 and rho > 0 off the origin. Two constructions are
//! provided: the diagonal power sum (exactly homogeneous, cheap) and the
//! radial-profile integral (homogeneous to quadrature tolerance, valid for
//! any anisotropy).

use std::fmt;

use crate::linalg::{self, AnisotropyMatrix, LinalgError};
use crate::rng::CounterRng;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub enum PseudoNormError {
    /// Diagonal exponents must be strictly positive.
    NonPositiveLambda(f64),
    /// Radial profile must satisfy 0 < r_in < r_out (the integral diverges
    /// when the support touches the origin).
    InvalidProfile { r_in: f64, r_out: f64 },
    /// Polar decomposition of the origin is undefined.
    ZeroVector,
    /// Dimension of the input does not match the homogeneity matrix.
    DimensionMismatch { expected: usize, got: usize },
    /// Root bracketing for the radial part failed.
    BracketingFailure,
    /// Quadrature did not converge to the requested tolerance.
    QuadratureFailure,
    /// Support scan for the integral construction ran away.
    SupportScanFailure,
    /// Comparison requested between norms with different real
    /// diagonalizable parts.
    MismatchedHomogeneity { max_diff: f64 },
    /// Too few samples for an empirical comparison.
    TooFewSamples { got: usize, min: usize },
    Linalg(LinalgError),
}

impl fmt::Display for PseudoNormError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveLambda(l) => write!(f, "diagonal exponent must be > 0, got {l}"),
            Self::InvalidProfile { r_in, r_out } => write!(
                f,
                "radial profile requires 0 < r_in < r_out, got [{r_in}, {r_out}]"
            ),
            Self::ZeroVector => write!(f, "polar decomposition is undefined at the origin"),
            Self::DimensionMismatch { expected, got } => {
                write!(f, "expected a point of R^{expected}, got R^{got}")
            }
            Self::BracketingFailure => write!(f, "failed to bracket the radial root"),
            Self::QuadratureFailure => write!(f, "quadrature did not converge"),
            Self::SupportScanFailure => write!(f, "could not locate the integral support"),
            Self::MismatchedHomogeneity { max_diff } => write!(
                f,
                "pseudo-norms have different real diagonalizable parts (max diff {max_diff})"
            ),
            Self::TooFewSamples { got, min } => {
                write!(f, "need at least {min} samples, got {got}")
            }
            Self::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PseudoNormError {}

impl From<LinalgError> for PseudoNormError {
    fn from(e: LinalgError) -> Self {
        Self::Linalg(e)
    }
}

/// Radial bump supported on the annulus r_in <= |x| <= r_out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// exp(-1 / ((t - r_in)(r_out - t))) inside the annulus, 0 outside.
    SmoothBump,
    /// Indicator of the annulus (discontinuous; handled by exact
    /// breakpoint integration).
    Indicator,
}

impl RadialProfile {
    pub fn smooth_bump(r_in: f64, r_out: f64) -> Result<Self, PseudoNormError> {
        Self::new(ProfileKind::SmoothBump, r_in, r_out)
    }

    pub fn indicator(r_in: f64, r_out: f64) -> Result<Self, PseudoNormError> {
        Self::new(ProfileKind::Indicator, r_in, r_out)
    }

    pub fn new(kind: ProfileKind, r_in: f64, r_out: f64) -> Result<Self, PseudoNormError> {
        if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
            return Err(PseudoNormError::InvalidProfile { r_in, r_out });
        }
        Ok(Self { kind, r_in, r_out })
    }

    /// Profile value at Euclidean radius t.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.r_in || t >= self.r_out {
            return 0.0;
        }
        match self.kind {
            ProfileKind::SmoothBump => (-1.0 / ((t - self.r_in) * (self.r_out - t))).exp(),
            ProfileKind::Indicator => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PseudoNormKind {
    /// rho(x) = scale * (sum_l weight_l |x_l|^{power/lambda_l})^{1/power}.
    ///
    /// power = 1 is the plain per-axis power sum; power = 2 with unit
    /// lambda recovers the Euclidean norm. Per-axis weights set where the
    /// axis terms cross over without touching homogeneity. Exactly
    /// diag(lambda)-homogeneous for every power.
    DiagonalSum {
        lambda: Vec<f64>,
        power: f64,
        scale: f64,
        weights: Vec<f64>,
    },
    /// rho(x) = integral_0^inf profile(a^{-E} x) da, evaluated by adaptive
    /// panel quadrature over the compact support in a.
    Integral { profile: RadialProfile, quad_tol: f64 },
}

/// An evaluable E-homogeneous gauge together with its homogeneity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoNorm {
    homogeneity: AnisotropyMatrix,
    kind: PseudoNormKind,
}

/// Builds the per-axis power-sum pseudo-norm for diag(lambda).
pub fn diagonal_pseudonorm(lambda: &[f64]) -> Result<PseudoNorm, PseudoNormError> {
    PseudoNorm::diagonal_sum(lambda, 1.0, 1.0)
}

/// Builds the integral pseudo-norm for an arbitrary anisotropy.
pub fn integral_pseudonorm(
    e: AnisotropyMatrix,
    profile: RadialProfile,
) -> Result<PseudoNorm, PseudoNormError> {
    PseudoNorm::integral(e, profile, 1e-8)
}

impl PseudoNorm {
    pub fn diagonal_sum(lambda: &[f64], power: f64, scale: f64) -> Result<Self, PseudoNormError> {
        Self::diagonal_sum_weighted(lambda, power, scale, &vec![1.0; lambda.len()])
    }

    /// Diagonal power sum with per-axis term weights (all positive).
    pub fn diagonal_sum_weighted(
        lambda: &[f64],
        power: f64,
        scale: f64,
        weights: &[f64],
    ) -> Result<Self, PseudoNormError> {
        for &l in lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(PseudoNormError::NonPositiveLambda(l));
            }
        }
        for &w in weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(PseudoNormError::NonPositiveLambda(w));
            }
        }
        let homogeneity = AnisotropyMatrix::diagonal(lambda)?;
        Ok(Self {
            homogeneity,
            kind: PseudoNormKind::DiagonalSum {
                lambda: lambda.to_vec(),
                power,
                scale,
                weights: weights.to_vec(),
            },
        })
    }

    /// The Euclidean norm viewed as an Id-homogeneous pseudo-norm.
    pub fn euclidean(d: usize) -> Self {
        Self::diagonal_sum(&vec![1.0; d], 2.0, 1.0).expect("unit exponents are valid")
    }

    pub fn integral(
        e: AnisotropyMatrix,
        profile: RadialProfile,
        quad_tol: f64,
    ) -> Result<Self, PseudoNormError> {
        RadialProfile::new(profile.kind, profile.r_in, profile.r_out)?;
        Ok(Self {
            homogeneity: e,
            kind: PseudoNormKind::Integral { profile, quad_tol },
        })
    }

    pub fn homogeneity(&self) -> &AnisotropyMatrix {
        &self.homogeneity
    }

    pub fn kind(&self) -> &PseudoNormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.homogeneity.dim()
    }

    /// Multiplies the gauge by a positive constant (still E-homogeneous).
    /// Only supported for the diagonal-sum kind, where the scale is a
    /// stored parameter.
    pub fn rescaled(&self, c: f64) -> Option<Self> {
        let mut out = self.clone();
        match &mut out.kind {
            PseudoNormKind::DiagonalSum { scale, .. } => {
                *scale *= c;
                Some(out)
            }
            PseudoNormKind::Integral { .. } => None,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PseudoNormKind::DiagonalSum {
                lambda,
                power,
                scale,
                weights,
            } => {
                let mut acc = 0.0;
                for ((v, l), w) in x.iter().zip(lambda).zip(weights) {
                    acc += w * v.abs().powf(power / l);
                }
                scale * acc.powf(1.0 / power)
            }
            PseudoNormKind::Integral { profile, quad_tol } => {
                self.integral_value(x, profile, *quad_tol)
            }
        }
    }

    /// |a^{-E} x| as a function of s = ln a.
    fn scaled_radius(&self, x: &[f64], s: f64) -> f64 {
        let y = self
            .homogeneity
            .power_apply((-s).exp(), x)
            .expect("positive scale");
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn integral_value(&self, x: &[f64], profile: &RadialProfile, quad_tol: f64) -> f64 {
        if x.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let (s_lo, s_hi) = match self.support_bracket(x, profile) {
            Ok(b) => b,
            Err(_) => return f64::NAN,
        };
        // Breakpoints where |a^{-E}x| crosses the annulus boundaries. The
        // smooth profile only needs them as panel hints; the indicator
        // needs them refined, its integral being exact between crossings.
        let mut points = vec![s_lo];
        let refine = profile.kind == ProfileKind::Indicator;
        let n_scan = if refine { 256 } else { 96 };
        let h = (s_hi - s_lo) / n_scan as f64;
        let mut prev = self.scaled_radius(x, s_lo);
        for i in 1..=n_scan {
            let s = s_lo + i as f64 * h;
            let cur = self.scaled_radius(x, s);
            for bound in [profile.r_in, profile.r_out] {
                if (prev - bound).signum() != (cur - bound).signum() {
                    points.push(if refine {
                        self.bisect_crossing(x, s - h, s, bound)
                    } else {
                        s - 0.5 * h
                    });
                }
            }
            prev = cur;
        }
        points.push(s_hi);
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a < 1e-300 {
                continue;
            }
            match profile.kind {
                ProfileKind::Indicator => {
                    // Constant inside each panel: integrate e^s exactly.
                    let mid = self.scaled_radius(x, 0.5 * (a + b));
                    if profile.value(mid) > 0.0 {
                        total += b.exp() - a.exp();
                    }
                }
                ProfileKind::SmoothBump => {
                    total += self.adaptive_panel(x, profile, a, b, quad_tol, 0);
                }
            }
        }
        total
    }

    fn bisect_crossing(&self, x: &[f64], mut lo: f64, mut hi: f64, bound: f64) -> f64 {
        let f_lo = self.scaled_radius(x, lo) - bound;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let f_mid = self.scaled_radius(x, mid) - bound;
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Finds [s_lo, s_hi] in s = ln a that safely contains the support of
    /// a -> profile(a^{-E} x). The radius tends to infinity as s -> -inf
    /// and to zero as s -> +inf because the spectrum is positive.
    fn support_bracket(
        &self,
        x: &[f64],
        profile: &RadialProfile,
    ) -> Result<(f64, f64), PseudoNormError> {
        let rho_min = self.homogeneity.rho_min();
        let max_span = 400.0 / rho_min.max(0.01);
        let start = self.scaled_radius(x, 0.0).max(1e-300).ln() / rho_min.max(0.1);
        let step = 0.5;
        let mut s_hi = start;
        let mut below = 0;
        let mut span = 0.0;
        while below < 4 {
            s_hi += step;
            if self.scaled_radius(x, s_hi) < 0.25 * profile.r_in {
                below += 1;
            } else {
                below = 0;
            }
            span += step;
            if span > max_span {
                return Err(PseudoNormError::SupportScanFailure);
            }
        }
        let mut s_lo = start;
        let mut above = 0;
        span = 0.0;
        while above < 4 {
            s_lo -= step;
            if self.scaled_radius(x, s_lo) > 4.0 * profile.r_out {
                above += 1;
            } else {
                above = 0;
            }
            span += step;
            if span > max_span {
                return Err(PseudoNormError::SupportScanFailure);
            }
        }
        Ok((s_lo, s_hi))
    }

    fn adaptive_panel(
        &self,
        x: &[f64],
        profile: &RadialProfile,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let coarse = self.gauss_panel(x, profile, a, b);
        let mid = 0.5 * (a + b);
        let fine = self.gauss_panel(x, profile, a, mid) + self.gauss_panel(x, profile, mid, b);
        if (coarse - fine).abs() <= tol.max(1e-12 * fine.abs()) || depth >= 14 {
            fine
        } else {
            self.adaptive_panel(x, profile, a, mid, tol / 2.0, depth + 1)
                + self.adaptive_panel(x, profile, mid, b, tol / 2.0, depth + 1)
        }
    }

    /// 10-point Gauss-Legendre of profile(|a^{-E}x|) e^s ds over [a, b].
    fn gauss_panel(&self, x: &[f64], profile: &RadialProfile, a: f64, b: f64) -> f64 {
        const NODES: [f64; 5] = [
            0.148874338981631211,
            0.433395394129247191,
            0.679409568299024406,
            0.865063366688984511,
            0.973906528517171720,
        ];
        const WEIGHTS: [f64; 5] = [
            0.295524224714752870,
            0.269266719309996355,
            0.219086362515982044,
            0.149451349150580593,
            0.066671344308688138,
        ];
        let c = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        let mut acc = 0.0;
        for i in 0..5 {
            for sign in [-1.0, 1.0] {
                let s = c + sign * hw * NODES[i];
                acc += WEIGHTS[i] * profile.value(self.scaled_radius(x, s)) * s.exp();
            }
        }
        acc * hw
    }
}

/// The anisotropic polar factorization x = r^E theta with rho(theta) = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: Vec<f64>,
}

/// Solves rho(r^{-E} x) = 1 for the unique radial part and returns the
/// angular point theta = r^{-E} x on the anisotropic sphere.
pub fn polar_decompose(rho: &PseudoNorm, x: &[f64]) -> Result<PolarPoint, PseudoNormError> {
    if x.len() != rho.dim() {
        return Err(PseudoNormError::DimensionMismatch {
            expected: rho.dim(),
            got: x.len(),
        });
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(PseudoNormError::ZeroVector);
    }
    let e = rho.homogeneity();
    let g = |r: f64| -> f64 {
        let y = e.power_apply(1.0 / r, x).expect("positive scale");
        rho.evaluate(&y)
    };
    // g is strictly decreasing in r; rho(x) is the exact root when the
    // gauge is exactly homogeneous and a near-root otherwise, so the
    // bracket starts tight and widens only if needed.
    let r0 = rho.evaluate(x);
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(PseudoNormError::BracketingFailure);
    }
    if (g(r0) - 1.0).abs() <= 1e-12 {
        let theta = e.power_apply(1.0 / r0, x)?;
        return Ok(PolarPoint { r: r0, theta });
    }
    let mut width = 2e-5;
    let (mut lo, mut hi);
    loop {
        lo = r0 * (1.0 - width);
        hi = r0 * (1.0 + width);
        if g(lo) >= 1.0 && g(hi) <= 1.0 {
            break;
        }
        width *= 8.0;
        if width > 1e6 {
            return Err(PseudoNormError::BracketingFailure);
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    let theta = e.power_apply(1.0 / r, x)?;
    Ok(PolarPoint { r, theta })
}

/// Empirical comparison constants between two pseudo-norms sharing a real
/// diagonalizable part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// Smallest sampled ratio rho1/rho2.
    pub c_low: f64,
    /// Largest sampled ratio rho1/rho2.
    pub c_high: f64,
    /// Fitted growth exponent of the ratio envelope against
    /// ln(1 + |ln rho2|); zero for genuinely equivalent norms.
    pub log_exponent_fit: f64,
}

pub fn equivalence_constants(
    rho1: &PseudoNorm,
    rho2: &PseudoNorm,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport, PseudoNormError> {
    const MIN_SAMPLES: usize = 100;
    if samples < MIN_SAMPLES {
        return Err(PseudoNormError::TooFewSamples {
            got: samples,
            min: MIN_SAMPLES,
        });
    }
    let d1 = &rho1.homogeneity().jordan().d;
    let d2 = &rho2.homogeneity().jordan().d;
    let diff = linalg::max_abs_diff(d1, d2);
    if diff > 1e-8 {
        return Err(PseudoNormError::MismatchedHomogeneity { max_diff: diff });
    }
    let d = rho1.dim();
    let rng = CounterRng::new(seed).substream(0x70a7);
    let mut c_low = f64::INFINITY;
    let mut c_high = 0.0f64;
    let mut ts = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    for i in 0..samples {
        let sub = rng.substream(i as u64);
        let mut x = vec![0.0; d];
        let mut norm2 = 0.0;
        for (k, v) in x.iter_mut().enumerate() {
            *v = sub.std_normal_at(k as u64 + 1);
            norm2 += *v * *v;
        }
        let radius = 10f64.powf(-4.0 + 8.0 * sub.f64_at(0));
        let scale = radius / norm2.sqrt().max(1e-300);
        for v in &mut x {
            *v *= scale;
        }
        let v1 = rho1.evaluate(&x);
        let v2 = rho2.evaluate(&x);
        if !(v1 > 0.0 && v2 > 0.0) {
            continue;
        }
        let ratio = v1 / v2;
        c_low = c_low.min(ratio);
        c_high = c_high.max(ratio);
        ts.push((1.0 + v2.ln().abs()).ln());
        ys.push(ratio.ln().abs());
    }
    // Envelope regression: bin by the log-log regressor, keep per-bin maxima.
    let log_exponent_fit = envelope_slope(&ts, &ys);
    Ok(EquivalenceReport {
        c_low,
        c_high,
        log_exponent_fit,
    })
}

fn envelope_slope(ts: &[f64], ys: &[f64]) -> f64 {
    if ts.len() < 4 {
        return 0.0;
    }
    let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(t_max > t_min) {
        return 0.0;
    }
    const BINS: usize = 12;
    let mut env = vec![f64::NEG_INFINITY; BINS];
    for (&t, &y) in ts.iter().zip(ys) {
        let b = (((t - t_min) / (t_max - t_min)) * BINS as f64).min(BINS as f64 - 1.0) as usize;
        env[b] = env[b].max(y);
    }
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for (b, &y) in env.iter().enumerate() {
        if y.is_finite() {
            xs.push(t_min + (b as f64 + 0.5) * (t_max - t_min) / BINS as f64);
            zs.push(y);
        }
    }
    stats::ols_fit(&xs, &zs).map(|f| f.slope).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_sum_examples() {
        let rho = diagonal_pseudonorm(&[1.0, 1.0]).unwrap();
        assert!((rho.evaluate(&[3.0, 4.0]) - 7.0).abs() < 1e-12);
        let rho = diagonal_pseudonorm(&[1.5, 0.5]).unwrap();
        assert!((rho.evaluate(&[8.0, 2.0]) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_sum_homogeneity_is_exact() {
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).unwrap();
        // Forced by homogeneity: rho(16^1.2, 16^0.8) = 16 * rho(1, 1).
        let a: f64 = 16.0;
        let x = [a.powf(1.2), a.powf(0.8)];
        assert!((rho.evaluate(&x) - 32.0).abs() < 1e-12 * 32.0);
        let rng = CounterRng::new(3).substream(9);
        for i in 0..200u64 {
            let sub = rng.substream(i);
            let a = 0.1 + 9.9 * sub.f64_at(0);
            let x = [2.0 * sub.f64_at(1) - 1.0, 2.0 * sub.f64_at(2) - 1.0];
            let ax = rho.homogeneity().power_apply(a, &x).unwrap();
            let lhs = rho.evaluate(&ax);
            let rhs = a * rho.evaluate(&x);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }
    }

    #[test]
    fn rejects_non_positive_lambda() {
        assert!(diagonal_pseudonorm(&[1.0, 0.0]).is_err());
        assert!(diagonal_pseudonorm(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn indicator_integral_matches_closed_form() {
        // E = Id, indicator of 1 <= |x| <= 2: the support in a is exactly
        // [|x|/2, |x|], so rho(x) = |x|/2 = |x| * int_1^2 s^-2 ds.
        let e = AnisotropyMatrix::diagonal(&[1.0, 1.0]).unwrap();
        let rho = integral_pseudonorm(e, RadialProfile::indicator(1.0, 2.0).unwrap()).unwrap();
        for x in [[1.0, 0.0], [0.6, 0.8], [-0.28, 0.96]] {
            let v = rho.evaluate(&x);
            assert!((v - 0.5).abs() < 1e-9, "got {v}");
        }
        let v = rho.evaluate(&[3.0, 4.0]);
        assert!((v - 2.5).abs() < 5e-9, "got {v}");
    }

    #[test]
    fn integral_profile_rejects_origin_support() {
        assert!(RadialProfile::indicator(0.0, 2.0).is_err());
        assert!(RadialProfile::smooth_bump(-1.0, 2.0).is_err());
        assert!(RadialProfile::smooth_bump(2.0, 2.0).is_err());
    }

    #[test]
    fn integral_homogeneity_within_quadrature_tolerance() {
        let e = AnisotropyMatrix::diagonal(&[1.2, 0.8]).unwrap();
        let rho = integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap()).unwrap();
        let rng = CounterRng::new(11).substream(2);
        for i in 0..100u64 {
            let sub = rng.substream(i);
            let a = 0.1 + 9.9 * sub.f64_at(0);
            let angle = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [angle.cos(), angle.sin()];
            let ax = rho.homogeneity().power_apply(a, &x).unwrap();
            let lhs = rho.evaluate(&ax);
            let rhs = a * rho.evaluate(&x);
            assert!(
                (lhs - rhs).abs() <= 1e-3 * rhs.abs(),
                "homogeneity error {} at a={a}",
                (lhs - rhs).abs() / rhs.abs()
            );
        }
    }

    #[test]
    fn integral_homogeneity_non_diagonal_anisotropy() {
        // Rotation plus scaling: exercises the matrix-exponential path.
        let e = AnisotropyMatrix::from_rows(2, &[1.0, -0.4, 0.4, 1.0]).unwrap();
        let rho = integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap()).unwrap();
        let rng = CounterRng::new(13).substream(5);
        for i in 0..30u64 {
            let sub = rng.substream(i);
            let a = 4.0;
            let angle = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [angle.cos(), angle.sin()];
            let ax = rho.homogeneity().power_apply(a, &x).unwrap();
            let lhs = rho.evaluate(&ax);
            let rhs = a * rho.evaluate(&x);
            assert!(
                (lhs - rhs).abs() <= 2e-3 * rhs.abs(),
                "homogeneity error {}",
                (lhs - rhs).abs() / rhs.abs()
            );
        }
    }

    #[test]
    fn polar_isotropic_euclidean() {
        let rho = PseudoNorm::euclidean(2);
        let p = polar_decompose(&rho, &[3.0, 4.0]).unwrap();
        assert!((p.r - 5.0).abs() < 1e-10);
        assert!((p.theta[0] - 0.6).abs() < 1e-10);
        assert!((p.theta[1] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn polar_diagonal_case_with_closed_form() {
        let rho = diagonal_pseudonorm(&[1.5, 0.5]).unwrap();
        let p = polar_decompose(&rho, &[8.0, 2.0]).unwrap();
        assert!((p.r - 8.0).abs() < 1e-9);
        let t0 = 2f64.powf(-1.5);
        assert!((p.theta[0] - t0).abs() < 1e-9, "theta0 {}", p.theta[0]);
        assert!((p.theta[1] - 2.0 * t0).abs() < 1e-9);
        assert!((rho.evaluate(&p.theta) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polar_roundtrip_random() {
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).unwrap();
        let rng = CounterRng::new(21).substream(0);
        for i in 0..500u64 {
            let sub = rng.substream(i);
            let r = 10f64.powf(-3.0 + 6.0 * sub.f64_at(0));
            let ang = 2.0 * std::f64::consts::PI * sub.f64_at(1);
            let x = [r * ang.cos(), r * ang.sin()];
            if x == [0.0, 0.0] {
                continue;
            }
            let p = polar_decompose(&rho, &x).unwrap();
            let back = rho.homogeneity().power_apply(p.r, &p.theta).unwrap();
            let err = ((back[0] - x[0]).powi(2) + (back[1] - x[1]).powi(2)).sqrt()
                / (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!(err <= 1e-8, "roundtrip error {err}");
            assert!((rho.evaluate(&p.theta) - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn polar_rejects_origin() {
        let rho = PseudoNorm::euclidean(2);
        assert!(matches!(
            polar_decompose(&rho, &[0.0, 0.0]),
            Err(PseudoNormError::ZeroVector)
        ));
    }

    #[test]
    fn equivalence_of_identical_norms() {
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).unwrap();
        let rep = equivalence_constants(&rho, &rho, 500, 7).unwrap();
        assert!((rep.c_low - 1.0).abs() < 1e-12);
        assert!((rep.c_high - 1.0).abs() < 1e-12);
        assert!(rep.log_exponent_fit.abs() < 1e-9);
    }

    #[test]
    fn equivalence_of_rescaled_norm() {
        let rho = diagonal_pseudonorm(&[1.2, 0.8]).unwrap();
        let scaled = rho.rescaled(3.0).unwrap();
        let rep = equivalence_constants(&scaled, &rho, 500, 7).unwrap();
        assert!((rep.c_low - 3.0).abs() < 1e-10);
        assert!((rep.c_high - 3.0).abs() < 1e-10);
        assert!(rep.log_exponent_fit.abs() < 1e-8);
    }

    #[test]
    fn equivalence_diagonal_vs_integral() {
        let lambda = [1.2, 0.8];
        let rho1 = diagonal_pseudonorm(&lambda).unwrap();
        let e = AnisotropyMatrix::diagonal(&lambda).unwrap();
        let rho2 = integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap()).unwrap();
        let rep = equivalence_constants(&rho1, &rho2, 400, 99).unwrap();
        assert!(rep.c_low > 0.0 && rep.c_low.is_finite());
        assert!(rep.c_high.is_finite() && rep.c_high >= rep.c_low);
    }

    #[test]
    fn equivalence_rejects_mismatched_parts() {
        let rho1 = diagonal_pseudonorm(&[1.2, 0.8]).unwrap();
        let rho2 = diagonal_pseudonorm(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            equivalence_constants(&rho1, &rho2, 200, 1),
            Err(PseudoNormError::MismatchedHomogeneity { .. })
        ));
        assert!(matches!(
            equivalence_constants(&rho1, &rho1, 10, 1),
            Err(PseudoNormError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn no_nan_on_finite_inputs() {
        let rho = diagonal_pseudonorm(&[1.5, 0.5]).unwrap();
        for x in [[0.0, 0.0], [1e-200, 0.0], [1e100, -1e100], [-5.0, 1e-8]] {
            let v = rho.evaluate(&x);
            assert!(v.is_finite(), "rho({x:?}) = {v}");
        }
        let e = AnisotropyMatrix::diagonal(&[1.0, 1.0]).unwrap();
        let rho = integral_pseudonorm(e, RadialProfile::smooth_bump(1.0, 2.0).unwrap()).unwrap();
        for x in [[0.0, 0.0], [1e-6, 0.0], [100.0, -40.0]] {
            let v = rho.evaluate(&x);
            assert!(v.is_finite(), "rho({x:?}) = {v}");
        }
    }
}
