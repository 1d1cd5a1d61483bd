//! Matrix machinery for anisotropic scaling: generalized powers a^M,
//! the real additive Jordan decomposition M = D + S + N, and spectral
//! bounds over the eigenvalue real parts.
//!
//! D, S and N are computed as Hermite interpolation polynomials evaluated
//! at M, so the three parts commute with each other and with M up to
//! floating-point rounding by construction.

use std::fmt;

use nalgebra::{Complex, DMatrix};

type C64 = Complex<f64>;

/// Eigenvalues with real part below this margin disqualify a matrix from
/// being an anisotropy: membership in the positive-spectrum class must be
/// robustly decidable.
pub const E_PLUS_MARGIN: f64 = 1e-8;

/// Eigenvalues closer than this are merged into one cluster before the
/// Jordan decomposition is interpolated.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Generalized power a^M requested for a <= 0.
    NonPositiveScale(f64),
    /// Matrix contains NaN or infinite entries.
    NonFiniteMatrix,
    /// Not a member of the positive-spectrum class E+.
    InvalidAnisotropy { min_real_part: f64 },
    /// Trace normalization requested for a matrix with Tr <= 0.
    NonPositiveTrace(f64),
    /// The eigensolver did not converge; carries the residual diagnostic.
    EigenFailure { residual: f64 },
    /// A matrix that must be square is not.
    NotSquare { rows: usize, cols: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveScale(a) => write!(f, "matrix power requires a > 0, got {a}"),
            Self::NonFiniteMatrix => write!(f, "matrix has non-finite entries"),
            Self::InvalidAnisotropy { min_real_part } => write!(
                f,
                "not an anisotropy: eigenvalue real part {min_real_part} is below the {E_PLUS_MARGIN} margin"
            ),
            Self::NonPositiveTrace(t) => write!(f, "trace normalization requires Tr > 0, got {t}"),
            Self::EigenFailure { residual } => {
                write!(f, "eigensolver failed to converge (residual {residual})")
            }
            Self::NotSquare { rows, cols } => write!(f, "matrix must be square, got {rows}x{cols}"),
        }
    }
}

impl std::error::Error for LinalgError {}

fn check_square_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFiniteMatrix);
    }
    Ok(())
}

/// exp(M) by scaling-and-squaring with a fixed-order Taylor series.
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    // 1-norm controls the Taylor truncation error.
    let norm = (0..d)
        .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let a = m / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(d, d);
    let mut sum = DMatrix::identity(d, d);
    for k in 1..=20u32 {
        term = (&term * &a) / f64::from(k);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Generalized power a^M = exp(M log a) for a > 0.
pub fn matrix_power(m: &DMatrix<f64>, a: f64) -> Result<DMatrix<f64>, LinalgError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(LinalgError::NonPositiveScale(a));
    }
    check_square_finite(m)?;
    Ok(matrix_exp(&(m * a.ln())))
}

/// a^M x without materializing a fresh matrix when M is diagonal.
pub fn apply_power(m: &DMatrix<f64>, a: f64, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(LinalgError::NonPositiveScale(a));
    }
    if is_diagonal(m, 0.0) {
        return Ok(x
            .iter()
            .enumerate()
            .map(|(i, v)| a.powf(m[(i, i)]) * v)
            .collect());
    }
    let p = matrix_power(m, a)?;
    let xv = nalgebra::DVector::from_column_slice(x);
    Ok((p * xv).iter().copied().collect())
}

pub fn is_diagonal(m: &DMatrix<f64>, tol: f64) -> bool {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)].abs() > tol {
                return false;
            }
        }
    }
    true
}

fn complex_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>, LinalgError> {
    check_square_finite(m)?;
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); m.nrows()]);
    }
    // Normalize so the QR iteration's relative convergence test is
    // meaningful for matrices of any magnitude (the raw zero matrix never
    // converges under it).
    let schur = nalgebra::linalg::Schur::try_new(m / scale, f64::EPSILON, 20_000).ok_or(
        LinalgError::EigenFailure {
            residual: f64::NAN,
        },
    )?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|e| e * scale)
        .collect())
}

/// (rho_min, rho_max): min and max of |Re(lambda)| over the spectrum.
pub fn spectral_bounds(m: &DMatrix<f64>) -> Result<(f64, f64), LinalgError> {
    let evs = complex_eigenvalues(m)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for ev in evs {
        let r = ev.re.abs();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// The commuting triple of the real additive Jordan decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanParts {
    /// Real diagonalizable part.
    pub d: DMatrix<f64>,
    /// Semisimple part with purely imaginary spectrum.
    pub s: DMatrix<f64>,
    /// Nilpotent part.
    pub n: DMatrix<f64>,
}

/// One eigenvalue cluster: a representative value and its multiplicity.
#[derive(Debug, Clone, Copy)]
struct Cluster {
    value: C64,
    multiplicity: usize,
}

fn cluster_eigenvalues(evs: &[C64]) -> Vec<Cluster> {
    let scale = evs.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    let tol = EIGEN_CLUSTER_TOL * scale;
    let mut clusters: Vec<(C64, Vec<C64>)> = Vec::new();
    for &ev in evs {
        match clusters.iter_mut().find(|(rep, _)| (*rep - ev).norm() <= tol) {
            Some((rep, members)) => {
                members.push(ev);
                let n = members.len() as f64;
                *rep = members.iter().sum::<C64>() / n;
            }
            None => clusters.push((ev, vec![ev])),
        }
    }
    // Snap near-real clusters to the real axis, then enforce exact
    // conjugate symmetry so the interpolating polynomial is real.
    let mut out: Vec<Cluster> = clusters
        .iter()
        .map(|(rep, members)| Cluster {
            value: if rep.im.abs() <= tol {
                C64::new(rep.re, 0.0)
            } else {
                *rep
            },
            multiplicity: members.len(),
        })
        .collect();
    let m = out.len();
    for i in 0..m {
        if out[i].value.im <= 0.0 {
            continue;
        }
        for k in 0..m {
            if k != i && (out[k].value - out[i].value.conj()).norm() <= 2.0 * tol {
                let sym = (out[i].value + out[k].value.conj()) / 2.0;
                out[i].value = sym;
                out[k].value = sym.conj();
            }
        }
    }
    out
}

/// Newton divided differences for Hermite interpolation on repeated nodes.
///
/// `target` gives the cluster value to interpolate (all derivative
/// conditions are zero: the interpolant is constant on each cluster).
fn hermite_coefficients(clusters: &[Cluster], target: impl Fn(C64) -> C64) -> (Vec<C64>, Vec<C64>) {
    let mut nodes: Vec<C64> = Vec::new();
    let mut values: Vec<C64> = Vec::new();
    for c in clusters {
        for _ in 0..c.multiplicity {
            nodes.push(c.value);
            values.push(target(c.value));
        }
    }
    let n = nodes.len();
    // dd[i] holds the divided difference f[x_i..x_{i+k}] at sweep k.
    let mut dd = values.clone();
    let mut coeffs = vec![dd[0]];
    for k in 1..n {
        for i in 0..n - k {
            let denom = nodes[i + k] - nodes[i];
            dd[i] = if denom.norm() == 0.0 {
                // Repeated node: derivative condition, all zero beyond order 0.
                C64::new(0.0, 0.0)
            } else {
                (dd[i + 1] - dd[i]) / denom
            };
        }
        coeffs.push(dd[0]);
    }
    (coeffs, nodes)
}

/// Evaluates the Newton-form polynomial at M (complex Horner), returns Re.
fn eval_newton_at_matrix(
    coeffs: &[C64],
    nodes: &[C64],
    m: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let d = m.nrows();
    let mc: DMatrix<C64> = m.map(|v| C64::new(v, 0.0));
    let id: DMatrix<C64> = DMatrix::identity(d, d);
    let n = coeffs.len();
    let mut p: DMatrix<C64> = &id * coeffs[n - 1];
    for k in (0..n - 1).rev() {
        let shifted = &mc - &id * nodes[k];
        p = &p * shifted + &id * coeffs[k];
    }
    let scale = m.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
    let imag_resid = p.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
    if imag_resid > 1e-7 * scale {
        return Err(LinalgError::EigenFailure {
            residual: imag_resid,
        });
    }
    Ok(p.map(|v| v.re))
}

/// Real additive Jordan decomposition M = D + S + N.
pub fn jordan_additive_decompose(m: &DMatrix<f64>) -> Result<JordanParts, LinalgError> {
    check_square_finite(m)?;
    let clusters = cluster_eigenvalues(&complex_eigenvalues(m)?);
    // Semisimple part: p(lambda) = lambda on each cluster.
    let (cs, nodes) = hermite_coefficients(&clusters, |z| z);
    let semisimple = eval_newton_at_matrix(&cs, &nodes, m)?;
    // Real diagonalizable part: p(lambda) = Re(lambda).
    let (cd, nodes_d) = hermite_coefficients(&clusters, |z| C64::new(z.re, 0.0));
    let d_part = eval_newton_at_matrix(&cd, &nodes_d, m)?;
    let s_part = &semisimple - &d_part;
    let n_part = m - &semisimple;
    Ok(JordanParts {
        d: d_part,
        s: s_part,
        n: n_part,
    })
}

/// A d x d real matrix with spectrum in the open right half plane, together
/// with its additive Jordan parts and spectral bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyMatrix {
    entries: DMatrix<f64>,
    rho_min: f64,
    rho_max: f64,
    jordan: JordanParts,
}

impl AnisotropyMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square_finite(&entries)?;
        let evs = complex_eigenvalues(&entries)?;
        let min_re = evs.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        if min_re <= E_PLUS_MARGIN {
            return Err(LinalgError::InvalidAnisotropy {
                min_real_part: min_re,
            });
        }
        let (rho_min, rho_max) = {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for ev in &evs {
                lo = lo.min(ev.re.abs());
                hi = hi.max(ev.re.abs());
            }
            (lo, hi)
        };
        let jordan = jordan_additive_decompose(&entries)?;
        Ok(Self {
            entries,
            rho_min,
            rho_max,
            jordan,
        })
    }

    pub fn from_rows(d: usize, rows: &[f64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_row_slice(d, d, rows))
    }

    pub fn diagonal(lambda: &[f64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            lambda,
        )))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn jordan(&self) -> &JordanParts {
        &self.jordan
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        is_diagonal(&self.entries, tol)
    }

    pub fn transpose(&self) -> Self {
        // Transposition preserves the spectrum; revalidation cannot fail.
        Self::new(self.entries.transpose()).expect("transpose stays in E+")
    }

    /// a^E applied to a vector.
    pub fn power_apply(&self, a: f64, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        apply_power(&self.entries, a, x)
    }

    pub fn power(&self, a: f64) -> Result<DMatrix<f64>, LinalgError> {
        matrix_power(&self.entries, a)
    }
}

/// Rescales M to trace d and validates the result as an anisotropy.
pub fn normalize_trace(m: &DMatrix<f64>) -> Result<AnisotropyMatrix, LinalgError> {
    check_square_finite(m)?;
    let t = m.trace();
    if t <= 0.0 {
        return Err(LinalgError::NonPositiveTrace(t));
    }
    let d = m.nrows() as f64;
    AnisotropyMatrix::new(m * (d / t))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().map(|v| v.abs()).fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn mat2(rows: [f64; 4]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &rows)
    }

    /// Truncated power-series oracle for exp(M log a), summed to machine
    /// precision. Independent of the scaling-and-squaring path.
    fn power_series_oracle(m: &DMatrix<f64>, a: f64) -> DMatrix<f64> {
        let d = m.nrows();
        let la = a.ln();
        let mut term = DMatrix::<f64>::identity(d, d);
        let mut sum = DMatrix::<f64>::identity(d, d);
        for k in 1..=80u32 {
            term = (&term * m) * (la / f64::from(k));
            sum += &term;
        }
        sum
    }

    #[test]
    fn power_of_identity_is_scalar() {
        let p = matrix_power(&DMatrix::identity(2, 2), 3.0).unwrap();
        assert!(max_abs_diff(&p, &mat2([3.0, 0.0, 0.0, 3.0])) < 1e-12);
    }

    #[test]
    fn power_of_diagonal_reduces_to_scalar_powers() {
        let m = mat2([1.2, 0.0, 0.0, 0.8]);
        let p = matrix_power(&m, 2.0).unwrap();
        let expected = mat2([2f64.powf(1.2), 0.0, 0.0, 2f64.powf(0.8)]);
        assert!(max_abs_diff(&p, &expected) < 1e-12);
        assert!((p[(0, 0)] - 2.29740).abs() < 1e-5);
        assert!((p[(1, 1)] - 1.74110).abs() < 1e-5);
    }

    #[test]
    fn power_of_rotation_block_matches_series_oracle() {
        let m = mat2([1.0, -1.0, 1.0, 1.0]);
        let a = std::f64::consts::E;
        let p = matrix_power(&m, a).unwrap();
        let oracle = power_series_oracle(&m, a);
        assert!(max_abs_diff(&p, &oracle) < 1e-10);
        let e = std::f64::consts::E;
        let expected = mat2([
            e * 1f64.cos(),
            -e * 1f64.sin(),
            e * 1f64.sin(),
            e * 1f64.cos(),
        ]);
        assert!(max_abs_diff(&p, &expected) < 1e-10);
        assert!((p[(0, 0)] - 1.46869).abs() < 1e-5);
        assert!((p[(1, 0)] - 2.28736).abs() < 1e-5);
    }

    #[test]
    fn power_rejects_non_positive_scale() {
        let m = DMatrix::identity(2, 2);
        assert!(matrix_power(&m, 0.0).is_err());
        assert!(matrix_power(&m, -1.0).is_err());
    }

    #[test]
    fn jordan_of_real_diagonal() {
        let m = mat2([1.2, 0.0, 0.0, 0.8]);
        let j = jordan_additive_decompose(&m).unwrap();
        assert!(max_abs_diff(&j.d, &m) < 1e-12);
        assert!(j.s.amax() < 1e-12);
        assert!(j.n.amax() < 1e-12);
    }

    #[test]
    fn jordan_of_textbook_block() {
        let m = mat2([1.0, 1.0, 0.0, 1.0]);
        let j = jordan_additive_decompose(&m).unwrap();
        assert!(max_abs_diff(&j.d, &DMatrix::identity(2, 2)) < 1e-10);
        assert!(j.s.amax() < 1e-10);
        assert!(max_abs_diff(&j.n, &mat2([0.0, 1.0, 0.0, 0.0])) < 1e-10);
    }

    #[test]
    fn jordan_of_rotation_block() {
        // Eigenvalues 1 +- i from the complex eigendecomposition.
        let m = mat2([1.0, -1.0, 1.0, 1.0]);
        let j = jordan_additive_decompose(&m).unwrap();
        assert!(max_abs_diff(&j.d, &DMatrix::identity(2, 2)) < 1e-10);
        assert!(max_abs_diff(&j.s, &mat2([0.0, -1.0, 1.0, 0.0])) < 1e-10);
        assert!(j.n.amax() < 1e-10);
    }

    #[test]
    fn spectral_bounds_examples() {
        assert_eq!(spectral_bounds(&DMatrix::identity(2, 2)).unwrap(), (1.0, 1.0));
        let (lo, hi) = spectral_bounds(&mat2([1.2, 0.0, 0.0, 0.8])).unwrap();
        assert!((lo - 0.8).abs() < 1e-12 && (hi - 1.2).abs() < 1e-12);
        // Characteristic polynomial gives eigenvalues 1 +- i.
        let (lo, hi) = spectral_bounds(&mat2([1.0, -1.0, 1.0, 1.0])).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normalize_trace_examples() {
        let a = normalize_trace(&mat2([2.0, 0.0, 0.0, 2.0])).unwrap();
        assert!(max_abs_diff(a.entries(), &DMatrix::identity(2, 2)) < 1e-12);
        let b = normalize_trace(&mat2([3.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(max_abs_diff(b.entries(), &mat2([1.5, 0.0, 0.0, 0.5])) < 1e-12);
        let c = normalize_trace(&mat2([2.0, -2.0, 2.0, 2.0])).unwrap();
        assert!(max_abs_diff(c.entries(), &mat2([1.0, -1.0, 1.0, 1.0])) < 1e-12);
    }

    #[test]
    fn normalize_trace_rejects_bad_input() {
        assert!(matches!(
            normalize_trace(&mat2([-1.0, 0.0, 0.0, -1.0])),
            Err(LinalgError::NonPositiveTrace(_))
        ));
        // Positive trace but an eigenvalue with negative real part.
        assert!(matches!(
            normalize_trace(&mat2([3.0, 0.0, 0.0, -1.0])),
            Err(LinalgError::InvalidAnisotropy { .. })
        ));
    }

    #[test]
    fn rejects_near_imaginary_axis() {
        let m = mat2([1e-9, 0.0, 0.0, 1.0]);
        assert!(matches!(
            AnisotropyMatrix::new(m),
            Err(LinalgError::InvalidAnisotropy { .. })
        ));
    }

    fn random_eplus(rng: &CounterRng, counter: u64, d: usize) -> DMatrix<f64> {
        let sub = rng.substream(counter);
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                m[(i, k)] = 2.0 * sub.f64_at((i * d + k) as u64) - 1.0;
            }
        }
        // Shift the spectrum strictly into the right half plane.
        let evs = complex_eigenvalues(&m).unwrap();
        let min_re = evs.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        let shift = 0.3 + if min_re < 0.0 { -min_re } else { 0.0 };
        m + DMatrix::identity(d, d) * shift
    }

    #[test]
    fn group_and_inverse_laws_hold_on_random_matrices() {
        let rng = CounterRng::new(2024).substream(1);
        for t in 0..100u64 {
            let d = if t % 2 == 0 { 2 } else { 3 };
            let m = random_eplus(&rng, t, d);
            let sub = rng.substream(1000 + t);
            let a = 0.1 + 9.9 * sub.f64_at(0);
            let b = 0.1 + 9.9 * sub.f64_at(1);
            let pa = matrix_power(&m, a).unwrap();
            let pb = matrix_power(&m, b).unwrap();
            let pab = matrix_power(&m, a * b).unwrap();
            let err = max_abs_diff(&(&pa * &pb), &pab);
            assert!(err <= 1e-10 * pab.amax(), "group law err {err}");
            let inv = pa.clone().try_inverse().unwrap();
            let p_inv = matrix_power(&m, 1.0 / a).unwrap();
            let ierr = max_abs_diff(&inv, &p_inv);
            assert!(ierr <= 1e-10 * p_inv.amax().max(1.0), "inverse law err {ierr}");
        }
    }

    #[test]
    fn decomposition_invariants_on_random_matrices() {
        let rng = CounterRng::new(7).substream(2);
        for t in 0..200u64 {
            let d = if t % 2 == 0 { 2 } else { 3 };
            let m = random_eplus(&rng, t, d);
            let j = jordan_additive_decompose(&m).unwrap();
            let recomposed = &j.d + &j.s + &j.n;
            assert!(max_abs_diff(&recomposed, &m) < 1e-10);
            let com_ds = &j.d * &j.s - &j.s * &j.d;
            let com_dn = &j.d * &j.n - &j.n * &j.d;
            let com_sn = &j.s * &j.n - &j.n * &j.s;
            assert!(com_ds.amax() <= 1e-10);
            assert!(com_dn.amax() <= 1e-10);
            assert!(com_sn.amax() <= 1e-10);
            // Nilpotency: N^d = 0.
            let mut npow = j.n.clone();
            for _ in 1..d {
                npow = &npow * &j.n;
            }
            assert!(npow.amax() <= 1e-10);
            // Spectrum conditions.
            for ev in complex_eigenvalues(&j.d).unwrap() {
                assert!(ev.im.abs() <= 1e-8);
            }
            for ev in complex_eigenvalues(&j.s).unwrap() {
                assert!(ev.re.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn power_commutes_with_decomposition() {
        let rng = CounterRng::new(55).substream(3);
        for t in 0..50u64 {
            let m = random_eplus(&rng, t, 2);
            let j = jordan_additive_decompose(&m).unwrap();
            let a = 0.3 + 3.0 * rng.substream(900 + t).f64_at(0);
            let whole = matrix_power(&m, a).unwrap();
            let parts = matrix_power(&j.d, a).unwrap()
                * matrix_power(&j.s, a).unwrap()
                * matrix_power(&j.n, a).unwrap();
            let err = max_abs_diff(&whole, &parts);
            assert!(err <= 1e-9 * whole.amax(), "a^M vs a^D a^S a^N err {err}");
        }
    }
}
