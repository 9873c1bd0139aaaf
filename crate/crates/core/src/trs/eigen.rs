//! Dense real nonsymmetric eigenvalue kernel for small matrices.
//!
//! Classic pipeline: Parlett-Reinsch balancing, Householder reduction to
//! upper Hessenberg form, then Francis double-shift QR iteration with
//! deflation (the EISPACK `hqr` scheme). Only eigenvalues are computed.

use nalgebra::DMatrix;

/// Outcome of [`largest_real_eigenvalue`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargestRealEigenvalue {
    /// Largest real eigenvalue, or `None` when the spectrum contains no real
    /// eigenvalue (only complex conjugate pairs).
    pub value: Option<f64>,
    /// False when the QR iteration hit its sweep bound before deflating the
    /// whole matrix; `value` is `None` in that case.
    pub converged: bool,
}

/// Total QR sweep budget before reporting non-convergence.
const MAX_SWEEPS: usize = 500;

/// Balance a matrix by diagonal similarity transforms with radix-2 scale
/// factors so row and column norms become comparable. Eigenvalues are
/// preserved exactly (powers of two commute with f64 arithmetic).
fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut col_norm = 0.0;
            let mut row_norm = 0.0;
            for j in 0..n {
                if j != i {
                    col_norm += a[(j, i)].abs();
                    row_norm += a[(i, j)].abs();
                }
            }
            if col_norm == 0.0 || row_norm == 0.0 {
                continue;
            }
            let mut factor = 1.0;
            let mut col = col_norm;
            let target = row_norm / RADIX;
            while col < target {
                factor *= RADIX;
                col *= RADIX * RADIX;
            }
            let target = row_norm * RADIX;
            while col > target {
                factor /= RADIX;
                col /= RADIX * RADIX;
            }
            if (col + row_norm) / factor < 0.95 * (col_norm + row_norm) {
                done = false;
                let inv = 1.0 / factor;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= factor;
                }
            }
        }
        if done {
            return;
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        // Build the Householder vector annihilating a[k+2.., k].
        let mut norm2 = 0.0;
        for i in k + 1..n {
            norm2 += a[(i, k)] * a[(i, k)];
        }
        if norm2 == 0.0 {
            continue;
        }
        let alpha = -a[(k + 1, k)].signum() * norm2.sqrt();
        let mut vnorm2 = 0.0;
        for i in k + 1..n {
            v[i] = a[(i, k)];
            if i == k + 1 {
                v[i] -= alpha;
            }
            vnorm2 += v[i] * v[i];
        }
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        // A ← (I − βvvᵀ) A
        for j in k..n {
            let mut dot = 0.0;
            for i in k + 1..n {
                dot += v[i] * a[(i, j)];
            }
            let dot = beta * dot;
            for i in k + 1..n {
                a[(i, j)] -= dot * v[i];
            }
        }
        // A ← A (I − βvvᵀ)
        for i in 0..n {
            let mut dot = 0.0;
            for j in k + 1..n {
                dot += a[(i, j)] * v[j];
            }
            let dot = beta * dot;
            for j in k + 1..n {
                a[(i, j)] -= dot * v[j];
            }
        }
        // Clean the annihilated entries so deflation tests see exact zeros.
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Returns all
/// eigenvalues as (re, im) pairs, or `None` if the sweep budget is exceeded.
fn hqr_eigenvalues(a: &mut DMatrix<f64>, max_sweeps: usize) -> Option<Vec<(f64, f64)>> {
    let n = a.nrows();
    let mut eigenvalues = vec![(0.0, 0.0); n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Some(eigenvalues);
    }

    let eps = f64::EPSILON;
    let mut sweeps = 0usize;
    let mut hi = n as isize - 1; // bottom of the active block
    let mut shift_total = 0.0;
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z, mut w);

    while hi >= 0 {
        let nn = hi as usize;
        let mut its = 0usize;
        loop {
            // Find a negligible subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[(nn, nn)];
            if l == nn {
                // One real eigenvalue deflated.
                eigenvalues[nn] = (x + shift_total, 0.0);
                hi -= 1;
                break;
            }
            y = a[(nn - 1, nn - 1)];
            w = a[(nn, nn - 1)] * a[(nn - 1, nn)];
            if l == nn - 1 {
                // A 2×2 block deflated: real pair or complex pair.
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += shift_total;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    eigenvalues[nn - 1] = (x + z, 0.0);
                    eigenvalues[nn] = if z != 0.0 { (x - w / z, 0.0) } else { (x + z, 0.0) };
                } else {
                    eigenvalues[nn - 1] = (x + p, z);
                    eigenvalues[nn] = (x + p, -z);
                }
                hi -= 2;
                break;
            }

            if sweeps >= max_sweeps || its >= 30 {
                return None;
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                shift_total += x;
                for i in 0..=nn {
                    a[(i, i)] -= x;
                }
                let s = a[(nn, nn - 1)].abs() + a[(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;

            // Look for two consecutive small subdiagonals.
            let mut m = nn - 2;
            loop {
                z = a[(m, m)];
                r = x - z;
                let mut s = y - z;
                p = (r * s - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - r - s;
                r = a[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows/columns l..=nn.
            for k in m..nn {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k != nn - 1 { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    p = a[(k, j)] + q * a[(k + 1, j)];
                    if k != nn - 1 {
                        p += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= p * z;
                    }
                    a[(k + 1, j)] -= p * y;
                    a[(k, j)] -= p * x;
                }
                let mmin = nn.min(k + 3);
                for i in l..=mmin {
                    p = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k != nn - 1 {
                        p += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= p * r;
                    }
                    a[(i, k + 1)] -= p * q;
                    a[(i, k)] -= p;
                }
            }
        }
    }
    Some(eigenvalues)
}

/// All eigenvalues of a square real matrix as (re, im) pairs, or `None` on
/// QR non-convergence. Real eigenvalues come back with an exactly zero
/// imaginary part (they are deflated as 1×1 or split 2×2 blocks).
pub fn eigenvalues(matrix: &DMatrix<f64>) -> Option<Vec<(f64, f64)>> {
    assert_eq!(matrix.nrows(), matrix.ncols(), "matrix must be square");
    assert!(
        matrix.iter().all(|x| x.is_finite()),
        "matrix entries must be finite"
    );
    let mut work = matrix.clone();
    balance(&mut work);
    hessenberg(&mut work);
    hqr_eigenvalues(&mut work, MAX_SWEEPS)
}

/// Largest real eigenvalue of a square real matrix.
pub fn largest_real_eigenvalue(matrix: &DMatrix<f64>) -> LargestRealEigenvalue {
    match eigenvalues(matrix) {
        None => LargestRealEigenvalue {
            value: None,
            converged: false,
        },
        Some(spectrum) => LargestRealEigenvalue {
            value: spectrum
                .iter()
                .filter(|(_, im)| *im == 0.0)
                .map(|(re, _)| *re)
                .fold(None, |acc: Option<f64>, re| {
                    Some(acc.map_or(re, |best| best.max(re)))
                }),
            converged: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_spectrum() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, 2.0, 3.0, 4.0, 5.0, 6.0,
        ]));
        let out = largest_real_eigenvalue(&m);
        assert!(out.converged);
        assert!((out.value.unwrap() - 6.0).abs() <= 1e-12);
    }

    #[test]
    fn companion_matrix_known_roots() {
        // (x − 3)(x + 1)(x² + 1)(x² + 4)
        //   = x⁶ − 2x⁵ + 2x⁴ − 10x³ − 11x² − 8x − 12.
        let coeffs = [-12.0, -8.0, -11.0, -10.0, 2.0, -2.0];
        let mut m = DMatrix::zeros(6, 6);
        for i in 1..6 {
            m[(i, i - 1)] = 1.0;
        }
        for (i, c) in coeffs.iter().enumerate() {
            m[(i, 5)] = -c;
        }
        let out = largest_real_eigenvalue(&m);
        assert!(out.converged);
        assert!((out.value.unwrap() - 3.0).abs() <= 1e-9);
    }

    #[test]
    fn pure_rotations_have_no_real_eigenvalue() {
        let mut m = DMatrix::zeros(6, 6);
        for (block, angle) in [0.4f64, 1.1, 2.0].iter().enumerate() {
            let (s, c) = angle.sin_cos();
            let k = 2 * block;
            m[(k, k)] = c;
            m[(k, k + 1)] = -s;
            m[(k + 1, k)] = s;
            m[(k + 1, k + 1)] = c;
        }
        let out = largest_real_eigenvalue(&m);
        assert!(out.converged);
        assert_eq!(out.value, None);
    }

    /// Build Q T Q⁻¹ from a prescribed quasi-triangular T and a random
    /// well-conditioned Q, so the spectrum is known exactly.
    fn conjugated(t: DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let n = t.nrows();
        loop {
            let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
                + DMatrix::identity(n, n) * 2.0;
            if let Some(q_inv) = q.clone().try_inverse() {
                return &q * t * q_inv;
            }
        }
    }

    #[test]
    fn random_constructed_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            // Two real eigenvalues and two complex pairs.
            let reals = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let mut t = DMatrix::zeros(6, 6);
            t[(0, 0)] = reals[0];
            t[(1, 1)] = reals[1];
            for (block, base) in [(0usize, 2usize), (1, 4)] {
                let re = rng.gen_range(-3.0..3.0);
                let im = rng.gen_range(0.2..3.0);
                t[(base, base)] = re;
                t[(base, base + 1)] = im;
                t[(base + 1, base)] = -im;
                t[(base + 1, base + 1)] = re;
                let _ = block;
            }
            // Upper-triangular coupling keeps the spectrum intact.
            for i in 0..6 {
                for j in i + 2..6 {
                    t[(i, j)] = rng.gen_range(-2.0..2.0);
                }
            }
            let m = conjugated(t, &mut rng);
            let expected = reals[0].max(reals[1]);
            let out = largest_real_eigenvalue(&m);
            assert!(out.converged);
            let norm = m.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
            assert!(
                (out.value.unwrap() - expected).abs() <= 1e-8 * (1.0 + norm),
                "expected {expected}, got {:?}",
                out.value
            );
        }
    }

    #[test]
    fn already_triangular_with_tiny_and_huge_scales() {
        // Balancing has to cope with mixed magnitudes.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut t = DMatrix::zeros(6, 6);
        let values = [1e-6, 3e-2, 1.0, 5.0, 2e3, 4e6];
        for (i, v) in values.iter().enumerate() {
            t[(i, i)] = *v;
            for j in i + 1..6 {
                t[(i, j)] = rng.gen_range(-1.0..1.0) * 1e3;
            }
        }
        let m = conjugated(t, &mut rng);
        let out = largest_real_eigenvalue(&m);
        assert!(out.converged);
        assert!((out.value.unwrap() - 4e6).abs() <= 1e-3);
    }
}
