//! Moore–Penrose pseudo-inverse through a one-sided Jacobi SVD.
//!
//! The Hestenes variant orthogonalizes the columns of a tall matrix with
//! complex plane rotations, accumulating the right singular vectors. Wide
//! inputs go through the conjugate transpose: `pinv(M) = pinv(M^H)^H`.

use num_complex::Complex64;

use super::complex::ComplexMatrix;
use super::SINGULAR_CUTOFF;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;
const JACOBI_TOL: f64 = 1e-15;
/// Columns with squared norm below this fraction of the squared Frobenius
/// norm are numerically null and no longer rotated.
const NULL_COLUMN: f64 = 1e-26;

/// Thin SVD `M = U diag(sigma) V^H` of a tall matrix (rows >= cols).
struct ThinSvd {
    /// Unnormalized left vectors: column j equals `sigma_j * u_j`.
    scaled_u: ComplexMatrix,
    v: ComplexMatrix,
    sigma: Vec<f64>,
}

fn jacobi_svd(m: &ComplexMatrix) -> Result<ThinSvd> {
    let (rows, cols) = (m.rows(), m.cols());
    debug_assert!(rows >= cols);
    // Column-major working copies keep the inner loops contiguous.
    let mut u: Vec<Vec<Complex64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..cols)
        .map(|j| {
            let mut e = vec![Complex64::new(0.0, 0.0); cols];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();

    let floor = NULL_COLUMN * u.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha: f64 = u[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = u[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = u[p].iter().zip(&u[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g <= JACOBI_TOL * (alpha * beta).sqrt() || g == 0.0 || alpha.min(beta) <= floor {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let unphase = phase.conj();
                for i in 0..rows {
                    let a = u[p][i];
                    let b = u[q][i] * unphase;
                    u[p][i] = a * c - b * s;
                    u[q][i] = a * s + b * c;
                }
                for i in 0..cols {
                    let a = v[p][i];
                    let b = v[q][i] * unphase;
                    v[p][i] = a * c - b * s;
                    v[q][i] = a * s + b * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNotConverged(MAX_SWEEPS));
    }

    let sigma = u
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    Ok(ThinSvd {
        scaled_u: ComplexMatrix::from_columns(&u)?,
        v: ComplexMatrix::from_columns(&v)?,
        sigma,
    })
}

/// Moore–Penrose pseudo-inverse. Singular values below
/// `SINGULAR_CUTOFF * sigma_max` are treated as zero.
pub fn pseudo_inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.is_empty() {
        return Err(Error::Empty("pseudo_inverse"));
    }
    if m.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("pseudo_inverse"));
    }
    if m.rows() < m.cols() {
        return Ok(pseudo_inverse(&m.conjugate_transpose())?.conjugate_transpose());
    }

    let svd = jacobi_svd(m)?;
    let sigma_max = svd.sigma.iter().cloned().fold(0.0, f64::max);
    let (rows, cols) = (m.rows(), m.cols());
    // pinv = sum_j v_j u_j^H / sigma_j = sum_j v_j (sigma_j u_j)^H / sigma_j^2
    let mut out = ComplexMatrix::zeros(cols, rows);
    if sigma_max == 0.0 {
        return Ok(out);
    }
    for j in 0..cols {
        let s = svd.sigma[j];
        if s <= SINGULAR_CUTOFF * sigma_max {
            continue;
        }
        let inv = 1.0 / (s * s);
        for a in 0..cols {
            let va = svd.v.get(a, j) * inv;
            for b in 0..rows {
                let cur = out.get(a, b);
                out.set(a, b, cur + va * svd.scaled_u.get(b, j).conj());
            }
        }
    }
    Ok(out)
}
