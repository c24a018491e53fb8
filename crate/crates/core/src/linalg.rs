//! Dense linear-algebra helpers shared by the analysis, certification and
//! simulation modules. Everything here works on `nalgebra::DMatrix<f64>`;
//! complex shifts are handled through the real embedding
//! `[[Re, -Im], [Im, Re]]`, whose spectrum is `eig(M) ∪ conj(eig(M))`.

use nalgebra::{DMatrix, DVector, Schur, SVD};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if a.is_empty() || b.is_empty() {
        return DMatrix::zeros(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    }
    a.kronecker(b)
}

/// All eigenvalues of a real square matrix, via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure { dim: n });
    }
    let schur =
        Schur::try_new(m.clone(), f64::EPSILON, 200 * n.max(10)).ok_or(Error::EigenFailure { dim: n })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Real `2n×2n` embedding of the complex matrix `re + i·im`.
pub fn complex_embedding(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = re.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    out.view_mut((0, 0), (r, c)).copy_from(re);
    out.view_mut((0, c), (r, c)).copy_from(&(-im));
    out.view_mut((r, 0), (r, c)).copy_from(im);
    out.view_mut((r, c), (r, c)).copy_from(re);
    out
}

/// Spectrum of `a + shift·bc`.
///
/// For a real shift this is exactly `eig(a + shift·bc)`. For a complex shift
/// the conjugate spectrum is included as well, i.e. the result is the union of
/// the spectra for `shift` and `conj(shift)`. Spectral abscissa and spectral
/// radius are unaffected by the extra conjugates.
pub fn shifted_spectrum(a: &DMatrix<f64>, bc: &DMatrix<f64>, shift: C64) -> Result<Vec<C64>> {
    let re = a + bc * shift.re;
    if shift.im == 0.0 {
        return eigenvalues(&re);
    }
    let im = bc * shift.im;
    eigenvalues(&complex_embedding(&re, &im))
}

pub fn spectral_abscissa(eigs: &[C64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_radius(eigs: &[C64]) -> f64 {
    eigs.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values strictly above `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|s| *s > tol).count()
}

/// Rank of the complex matrix `re + i·im`.
pub fn complex_rank(re: &DMatrix<f64>, im: &DMatrix<f64>, tol: f64) -> usize {
    rank(&complex_embedding(re, im), tol) / 2
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor core.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "expm of a non-square matrix");
    let n = m.nrows();
    let norm = inf_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = m / 2f64.powi(squarings);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &x / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Serde adapter: a `DMatrix<f64>` as row-major nested arrays.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Builds a matrix from nested rows; `None` when the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(to_rows(m))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("rows of unequal length"))
    }
}
