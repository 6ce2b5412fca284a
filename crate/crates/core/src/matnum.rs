//! Dense matrix numerics: Lyapunov solves, matrix exponential, operator
//! norms, symmetric square roots and semidefinite ordering.
//!
//! Dimensions are small (n ≤ 32 in practice), so everything here works on
//! heap-allocated `nalgebra` matrices and favours direct methods.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex<f64>>;

/// Eigenvalues of a PSD input below `-PSD_CLAMP * ‖M‖` are rejected; those
/// above it are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-12;

/// Pivot ratio below which an LU factorization is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Largest real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &RealMatrix) -> f64 {
    assert!(a.is_square(), "spectral abscissa needs a square matrix");
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Largest singular value of a real matrix.
pub fn operator_norm_real(m: &RealMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn symmetrize(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

/// `re + i·im` as a complex matrix.
pub fn complexify(re: &RealMatrix, im: &RealMatrix) -> ComplexMatrix {
    assert_eq!(re.shape(), im.shape());
    ComplexMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex::new(re[(i, j)], im[(i, j)])
    })
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &RealMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `r - l`; nonnegative iff `l ≼ r`.
pub fn psd_margin(l: &RealMatrix, r: &RealMatrix) -> f64 {
    assert_eq!(l.shape(), r.shape(), "psd ordering needs equal shapes");
    min_symmetric_eigenvalue(&(r - l))
}

/// Loewner order test `l ≼ r` up to `tol`.
pub fn psd_order_holds(l: &RealMatrix, r: &RealMatrix, tol: f64) -> bool {
    psd_margin(l, r) >= -tol
}

/// Solves `A X + X Aᵀ + Q = 0` for `X`.
///
/// Uses the Kronecker-sum form `(I ⊗ A + A ⊗ I) vec(X) = -vec(Q)` with one
/// step of iterative refinement, then symmetrizes the result.
pub fn solve_lyapunov(a: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "lyapunov: A is {:?}, Q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let abscissa = spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }

    let nn = n * n;
    let mut op = RealMatrix::zeros(nn, nn);
    // Column-major vec: entry (i, j) of X sits at i + j*n.
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            for k in 0..n {
                // (A X)_{ij} = Σ_k A_ik X_kj
                op[(row, k + j * n)] += a[(i, k)];
                // (X Aᵀ)_{ij} = Σ_k X_ik A_jk
                op[(row, i + k * n)] += a[(j, k)];
            }
        }
    }

    let lu = op.clone().lu();
    let u = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for d in u.diagonal().iter() {
        pmin = pmin.min(d.abs());
        pmax = pmax.max(d.abs());
    }
    let pivot_ratio = if pmax > 0.0 { pmin / pmax } else { 0.0 };
    if pivot_ratio < SINGULAR_PIVOT_RATIO {
        return Err(Error::SingularSolve { pivot_ratio });
    }

    let rhs = nalgebra::DVector::from_iterator(nn, q.iter().map(|x| -x));
    let mut x = lu
        .solve(&rhs)
        .ok_or(Error::SingularSolve { pivot_ratio })?;
    let resid = &rhs - &op * &x;
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    let x = RealMatrix::from_column_slice(n, n, x.as_slice());
    Ok(symmetrize(&x))
}

/// Residual `‖A X + X Aᵀ + Q‖` in operator norm.
pub fn lyapunov_residual(a: &RealMatrix, x: &RealMatrix, q: &RealMatrix) -> f64 {
    operator_norm_real(&(a * x + x * a.transpose() + q))
}

// Padé(13,13) numerator coefficients (Higham 2005).
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

fn one_norm(m: &RealMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &RealMatrix) -> RealMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-s);

    let id = RealMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &PADE13;

    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &id;
    let u = &a * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &id;

    let p = &v + &u;
    let q = &v - &u;
    // q is well conditioned for ‖a‖₁ ≤ θ₁₃.
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Symmetric eigendecomposition with small negative eigenvalues clamped.
fn clamped_eigen(m: &RealMatrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let floor = -PSD_CLAMP * scale;
    for ev in eig.eigenvalues.iter_mut() {
        if *ev < floor {
            return Err(Error::NotPsd { min_eigenvalue: *ev });
        }
        *ev = ev.max(0.0);
    }
    Ok(eig)
}

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> RealMatrix {
    let q = &eig.eigenvectors;
    let d = RealMatrix::from_diagonal(&eig.eigenvalues.map(f));
    symmetrize(&(q * d * q.transpose()))
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sqrtm_psd(m: &RealMatrix) -> Result<RealMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("sqrtm: {:?}", m.shape())));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let eig = clamped_eigen(m)?;
    Ok(rebuild(&eig, f64::sqrt))
}

/// `M^{-1/2}` for a symmetric positive definite matrix.
pub fn inv_sqrtm_spd(m: &RealMatrix) -> Result<RealMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("inv sqrtm: {:?}", m.shape())));
    }
    let eig = clamped_eigen(m)?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(rebuild(&eig, |x| 1.0 / x.sqrt()))
}
