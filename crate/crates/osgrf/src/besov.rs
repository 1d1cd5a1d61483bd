//! Anisotropic Besov norms from wavelet coefficients and estimation of the
//! anisotropic local critical exponent.
//!
//! Norms are computed through the wavelet characterization: the scale-j
//! term aggregates |c|^p over every branch of the per-scale index set. The
//! critical exponent is estimated through the equivalent per-axis
//! finite-difference characterization of the same spaces: for a diagonal
//! anisotropy diag(lambda), the exponent is min_l lambda_l s_l where s_l
//! is the axis-l critical smoothness, estimated from the decay of per-axis
//! 1-D wavelet detail moments. The bundled per-scale statistic S_j is
//! computed and reported alongside as a diagnostic; its own log-linear fit
//! carries strong pre-asymptotic bias on mismatched anisotropies at the
//! grid sizes this crate targets, which is why it does not drive the point
//! estimate.

use std::fmt;

use crate::stats;
use crate::wavelet::{self, DiagonalAnisotropy, WaveletCoefficientSet, WaveletError};

#[derive(Debug, Clone, PartialEq)]
pub enum BesovError {
    /// p and q must lie in [1, inf].
    BadIntegrability { p: f64, q: f64 },
    /// The coefficient set lacks scales required by the request.
    MissingScales { requested: (u32, u32), available: u32 },
    /// Fewer than the minimum number of usable scales or levels.
    InsufficientData(String),
    /// Non-finite statistic encountered.
    Numeric(String),
    Wavelet(WaveletError),
}

impl fmt::Display for BesovError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadIntegrability { p, q } => {
                write!(f, "integrability indices must be in [1, inf], got p={p}, q={q}")
            }
            Self::MissingScales {
                requested,
                available,
            } => write!(
                f,
                "scales {}..={} requested but only 0..={available} available",
                requested.0, requested.1
            ),
            Self::InsufficientData(m) | Self::Numeric(m) => write!(f, "{m}"),
            Self::Wavelet(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BesovError {}

impl From<WaveletError> for BesovError {
    fn from(e: WaveletError) -> Self {
        Self::Wavelet(e)
    }
}

/// Parameters of an anisotropic Besov norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovSpec {
    /// Smoothness.
    pub s: f64,
    /// Integrability in [1, inf].
    pub p: f64,
    /// Summability in [1, inf].
    pub q: f64,
    /// Logarithmic correction exponent: scale weights j^{-beta q}.
    pub beta: f64,
    pub anisotropy: DiagonalAnisotropy,
}

impl BesovSpec {
    pub fn validate(&self) -> Result<(), BesovError> {
        if !(self.p >= 1.0) || !(self.q >= 1.0) {
            return Err(BesovError::BadIntegrability {
                p: self.p,
                q: self.q,
            });
        }
        Ok(())
    }
}

fn is_inf(x: f64) -> bool {
    x.is_infinite() && x > 0.0
}

/// Per-scale statistic S_j = (sum over branches of I^j and positions of
/// |c|^p)^{1/p}; sup over everything when p = inf. Only canonical
/// (unclipped) branches enter.
pub fn scale_statistic(coeffs: &WaveletCoefficientSet, j: u32, p: f64) -> Option<f64> {
    let mut acc: f64 = 0.0;
    let mut seen = false;
    for b in coeffs.branches_at(j) {
        if !b.canonical {
            continue;
        }
        seen = true;
        if is_inf(p) {
            for &c in b.values.data() {
                acc = acc.max(c.abs());
            }
        } else {
            for &c in b.values.data() {
                acc += c.abs().powf(p);
            }
        }
    }
    if !seen {
        return None;
    }
    Some(if is_inf(p) { acc } else { acc.powf(1.0 / p) })
}

/// Truncated discrete Besov norm
/// (sum_j j^{-beta q} 2^{j(s - d/p) q} S_j^q)^{1/q}, with sup forms at
/// p or q = inf. The scale-0 log weight is taken as 1.
pub fn besov_norm(coeffs: &WaveletCoefficientSet, spec: &BesovSpec) -> Result<f64, BesovError> {
    spec.validate()?;
    let d = coeffs.grid_dims.len() as f64;
    let d_over_p = if is_inf(spec.p) { 0.0 } else { d / spec.p };
    let j_max = coeffs.max_canonical_scale();
    let mut terms = Vec::new();
    for j in 0..=j_max {
        let sj = scale_statistic(coeffs, j, spec.p).ok_or(BesovError::MissingScales {
            requested: (0, j_max),
            available: j.saturating_sub(1),
        })?;
        if !sj.is_finite() {
            return Err(BesovError::Numeric(format!("S_{j} is not finite")));
        }
        let log_weight = if j == 0 { 1.0 } else { f64::from(j).powf(-spec.beta) };
        terms.push(log_weight * 2f64.powf(f64::from(j) * (spec.s - d_over_p)) * sj);
    }
    if is_inf(spec.q) {
        Ok(terms.into_iter().fold(0.0, f64::max))
    } else {
        Ok(terms
            .into_iter()
            .map(|t| t.powf(spec.q))
            .sum::<f64>()
            .powf(1.0 / spec.q))
    }
}

/// Critical-exponent estimate for one analysis anisotropy.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub anisotropy: DiagonalAnisotropy,
    pub p: f64,
    pub q: f64,
    /// Diagnostic table (j, S_j) over the fitted scale range.
    pub per_scale: Vec<(u32, f64)>,
    /// Point estimate of the critical exponent.
    pub alpha_hat: f64,
    /// Standard error propagated from the axis regression that attains
    /// the minimum.
    pub slope_stderr: f64,
    pub j_range: (u32, u32),
    /// Per-axis critical smoothness estimates s_l (exponent =
    /// min_l lambda_l s_l).
    pub axis_exponents: Vec<f64>,
    /// Exponent implied by the plain log2 S_j regression, kept as a
    /// diagnostic.
    pub sj_fit_alpha: f64,
}

/// Minimum number of scales in the S_j fit range.
const MIN_SCALES: u32 = 4;

/// Per-axis detail levels dropped at the coarse end (periodization wrap)
/// and at the fine end (sampling band limit).
const AXIS_LEVEL_LO: u32 = 3;
const AXIS_LEVEL_DROP_HI: u32 = 1;

/// Per-axis critical smoothness from the decay of 1-D detail moments.
///
/// For finite p, fits log2 mean(|d_t|^p) = -p (s + 1/2) t + const over the
/// clean interior levels; for p = inf the max replaces the mean.
pub fn axis_smoothness(
    grid: &crate::grid::GridNd,
    axis: usize,
    filter_order: usize,
    p: f64,
) -> Result<(f64, f64), BesovError> {
    let levels = wavelet::axis_detail_levels(grid, axis, filter_order)?;
    let j_axis = levels.len() as u32;
    let (mut lo, mut hi) = (AXIS_LEVEL_LO, j_axis.saturating_sub(AXIS_LEVEL_DROP_HI + 1));
    if hi < lo + 2 {
        // Small grids: widen toward both ends, still dropping the finest.
        lo = 2.min(lo);
        hi = j_axis.saturating_sub(2);
    }
    if hi < lo + 2 {
        return Err(BesovError::InsufficientData(format!(
            "axis {axis}: only levels {lo}..={hi} usable, need at least 3"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, coeffs) in &levels {
        if *t < lo || *t > hi || coeffs.is_empty() {
            continue;
        }
        let stat = if is_inf(p) {
            coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()))
        } else {
            coeffs.iter().map(|&c| c.abs().powf(p)).sum::<f64>() / coeffs.len() as f64
        };
        if !(stat > 0.0) || !stat.is_finite() {
            return Err(BesovError::Numeric(format!(
                "axis {axis} level {t}: degenerate detail moment {stat}"
            )));
        }
        xs.push(f64::from(*t));
        ys.push(stat.log2());
    }
    let fit = stats::ols_fit(&xs, &ys)
        .ok_or_else(|| BesovError::InsufficientData("degenerate axis regression".into()))?;
    let (s_hat, stderr) = if is_inf(p) {
        (-fit.slope - 0.5, fit.slope_stderr)
    } else {
        (-fit.slope / p - 0.5, fit.slope_stderr / p)
    };
    Ok((s_hat, stderr))
}

/// Estimates the anisotropic local critical exponent from a full
/// coefficient set.
///
/// The point estimate is alpha = min_l lambda_l s_l with the per-axis
/// smoothness s_l measured on the grid reconstructed from the set (the
/// finite-difference characterization of the same spaces); the bundled
/// log2 S_j regression over `j_range` is reported as a diagnostic.
pub fn critical_exponent_estimate(
    coeffs: &WaveletCoefficientSet,
    p: f64,
    q: f64,
    j_range: (u32, u32),
) -> Result<ExponentEstimate, BesovError> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(BesovError::BadIntegrability { p, q });
    }
    let (j_lo, j_hi) = j_range;
    if j_hi < j_lo || j_hi - j_lo + 1 < MIN_SCALES {
        return Err(BesovError::InsufficientData(format!(
            "need at least {MIN_SCALES} scales in the fit range, got {j_lo}..={j_hi}"
        )));
    }
    let available = coeffs.max_canonical_scale();
    if j_hi > available {
        return Err(BesovError::MissingScales {
            requested: j_range,
            available,
        });
    }
    let d = coeffs.grid_dims.len() as f64;
    let d_over_p = if is_inf(p) { 0.0 } else { d / p };
    // Diagnostic table and its plain regression.
    let mut per_scale = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in j_lo..=j_hi {
        let sj = scale_statistic(coeffs, j, p).ok_or(BesovError::MissingScales {
            requested: j_range,
            available,
        })?;
        if !sj.is_finite() {
            return Err(BesovError::Numeric(format!("S_{j} not finite")));
        }
        per_scale.push((j, sj));
        if sj > 0.0 {
            xs.push(f64::from(j));
            ys.push(sj.log2());
        }
    }
    let sj_fit = stats::ols_fit(&xs, &ys);
    let sj_fit_alpha = sj_fit.map(|f| d_over_p - f.slope).unwrap_or(f64::NAN);
    // Characterization estimate from per-axis detail chains.
    let grid = wavelet::reconstruct(coeffs, &coeffs.grid_dims)?;
    let lambda = coeffs.anisotropy.lambda().to_vec();
    let mut axis_exponents = Vec::with_capacity(lambda.len());
    let mut alpha_hat = f64::INFINITY;
    let mut slope_stderr = 0.0;
    for (axis, &lam) in lambda.iter().enumerate() {
        let (s_hat, stderr) = axis_smoothness(&grid, axis, coeffs.filter_order, p)?;
        axis_exponents.push(s_hat);
        let contribution = lam * s_hat;
        if contribution < alpha_hat {
            alpha_hat = contribution;
            slope_stderr = lam * stderr;
        }
    }
    if !alpha_hat.is_finite() {
        return Err(BesovError::Numeric("non-finite exponent estimate".into()));
    }
    Ok(ExponentEstimate {
        anisotropy: coeffs.anisotropy.clone(),
        p,
        q,
        per_scale,
        alpha_hat,
        slope_stderr,
        j_range,
        axis_exponents,
        sj_fit_alpha,
    })
}

/// Builds a synthetic coefficient set with prescribed per-scale magnitude
/// (every coefficient of scale j equals mag(j)); used by tests.
pub fn synthetic_coefficients(
    aniso: &DiagonalAnisotropy,
    grid_dims: &[usize],
    filter_order: usize,
    mag: impl Fn(u32) -> f64,
) -> WaveletCoefficientSet {
    let zero = crate::grid::GridNd::zeros(grid_dims);
    let mut set =
        wavelet::anisotropic_wavelet_transform(&zero, aniso, u32::MAX, filter_order)
            .expect("zero grid transforms");
    for i in 0..set.branches().len() {
        let b = set.branch_mut(i);
        let v = mag(b.j);
        for c in b.values.data_mut() {
            *c = v;
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::anisotropic_wavelet_transform;

    fn iso(d: usize) -> DiagonalAnisotropy {
        DiagonalAnisotropy::isotropic(d)
    }

    #[test]
    fn norm_of_zero_coefficients_is_zero() {
        let set = synthetic_coefficients(&iso(2), &[32, 32], 2, |_| 0.0);
        let spec = BesovSpec {
            s: 0.7,
            p: 2.0,
            q: 2.0,
            beta: 0.0,
            anisotropy: iso(2),
        };
        assert_eq!(besov_norm(&set, &spec).unwrap(), 0.0);
    }

    #[test]
    fn norm_single_coefficient_sup_form() {
        // One nonzero coefficient at scale 2, p = q = inf, s = 1, d = 2:
        // the single term 2^{2(1-0)} * 1 = 4.
        let mut set = synthetic_coefficients(&iso(2), &[32, 32], 2, |_| 0.0);
        let pos = set
            .branches()
            .iter()
            .position(|b| b.j == 2)
            .expect("scale 2 exists");
        set.branch_mut(pos).values.data_mut()[0] = 1.0;
        let spec = BesovSpec {
            s: 1.0,
            p: f64::INFINITY,
            q: f64::INFINITY,
            beta: 0.0,
            anisotropy: iso(2),
        };
        let v = besov_norm(&set, &spec).unwrap();
        assert!((v - 4.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn norm_matches_geometric_series_oracle() {
        // S_j = 2^{-j} exactly: with s = 1, p = q = 2, d = 2 the terms are
        // 4^{-j} and the norm tends to (sum_{j>=1} 4^{-j})^{1/2} = 3^{-1/2}.
        // Build a set with exactly one nonzero unit coefficient per scale,
        // rescaled so that S_j = 2^{-j} including scale 0.
        let mut set = synthetic_coefficients(&iso(2), &[256, 256], 2, |_| 0.0);
        let scales: Vec<u32> = (0..=set.max_canonical_scale()).collect();
        for &j in &scales {
            let pos = set
                .branches()
                .iter()
                .position(|b| b.j == j)
                .expect("scale exists");
            set.branch_mut(pos).values.data_mut()[0] = 2f64.powi(-(j as i32));
        }
        let spec = BesovSpec {
            s: 1.0,
            p: 2.0,
            q: 2.0,
            beta: 0.0,
            anisotropy: iso(2),
        };
        let v = besov_norm(&set, &spec).unwrap();
        // Truncated at j_max = 8: sum_{j=0}^{8} 4^{-j}; the oracle value
        // includes the j = 0 term 1.
        let oracle: f64 = (0..=8).map(|j| 4f64.powi(-j)).sum::<f64>().sqrt();
        assert!((v - oracle).abs() < 1e-12, "got {v}, oracle {oracle}");
        // Dropping scale 0 from the sum gives the classical limit.
        let tail: f64 = (1..=8).map(|j| 4f64.powi(-j)).sum::<f64>().sqrt();
        assert!((tail - (1.0f64 / 3.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn norm_monotone_in_s_when_statistics_small() {
        let set = synthetic_coefficients(&iso(2), &[64, 64], 2, |j| 4f64.powi(-(j as i32) - 1));
        let mut prev = 0.0;
        for k in 0..6 {
            let s = 0.2 + 0.15 * k as f64;
            let spec = BesovSpec {
                s,
                p: 2.0,
                q: 2.0,
                beta: 0.0,
                anisotropy: iso(2),
            };
            let v = besov_norm(&set, &spec).unwrap();
            assert!(v >= prev, "not monotone at s={s}");
            prev = v;
        }
    }

    #[test]
    fn norm_beta_ordering() {
        let set = synthetic_coefficients(&iso(2), &[64, 64], 2, |j| 2f64.powi(-(j as i32)));
        let norm_with_beta = |beta: f64| {
            besov_norm(
                &set,
                &BesovSpec {
                    s: 0.5,
                    p: 2.0,
                    q: 2.0,
                    beta,
                    anisotropy: iso(2),
                },
            )
            .unwrap()
        };
        let plus = norm_with_beta(1.0);
        let zero = norm_with_beta(0.0);
        let minus = norm_with_beta(-1.0);
        assert!(plus <= zero && zero <= minus, "{plus} {zero} {minus}");
    }

    #[test]
    fn estimator_recovers_constructed_log_linear_input() {
        // Synthetic field with exact per-axis smoothness: a 1-D fractional
        // profile is out of reach synthetically, so instead check the S_j
        // diagnostic on constructed coefficients: S_j = 2^{j(d/p - s0)}
        // exactly gives sj_fit_alpha = s0 with zero residual.
        let s0 = 0.7;
        let aniso = iso(2);
        let dims = [128usize, 128];
        let mut set = synthetic_coefficients(&aniso, &dims, 2, |_| 0.0);
        for j in 0..=set.max_canonical_scale() {
            // One nonzero coefficient per scale => S_j equals its value.
            let target = 2f64.powf(f64::from(j) * (1.0 - s0));
            let pos = set
                .branches()
                .iter()
                .position(|b| b.j == j)
                .expect("scale exists");
            set.branch_mut(pos).values.data_mut()[0] = target;
        }
        let est = critical_exponent_estimate(&set, 2.0, 2.0, (1, 6)).unwrap();
        assert!(
            (est.sj_fit_alpha - s0).abs() < 1e-10,
            "sj fit {}",
            est.sj_fit_alpha
        );
    }

    #[test]
    fn estimator_rejects_short_ranges_and_missing_scales() {
        let g = crate::grid::GridNd::zeros(&[64, 64]);
        let set = anisotropic_wavelet_transform(&g, &iso(2), u32::MAX, 2).unwrap();
        assert!(matches!(
            critical_exponent_estimate(&set, 2.0, 2.0, (2, 4)),
            Err(BesovError::InsufficientData(_))
        ));
        assert!(matches!(
            critical_exponent_estimate(&set, 2.0, 2.0, (2, 40)),
            Err(BesovError::MissingScales { .. })
        ));
        assert!(matches!(
            critical_exponent_estimate(&set, 0.5, 2.0, (2, 5)),
            Err(BesovError::BadIntegrability { .. })
        ));
    }

    #[test]
    fn axis_smoothness_of_white_noise_is_near_minus_half() {
        // White noise has flat detail moments across levels: s ~ -1/2.
        let rng = crate::rng::CounterRng::new(5).substream(1);
        let mut g = crate::grid::GridNd::zeros(&[256, 256]);
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            *v = rng.std_normal_at(i as u64);
        }
        for axis in 0..2 {
            let (s, _) = axis_smoothness(&g, axis, 4, 2.0).unwrap();
            assert!(s.abs() < 0.56 && s > -0.56, "axis {axis}: s = {s}");
            assert!((s + 0.5).abs() < 0.06, "axis {axis}: s = {s}");
        }
    }
}
