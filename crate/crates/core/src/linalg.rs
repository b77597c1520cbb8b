//! Small dense and tridiagonal linear-algebra kernels.
//!
//! Classical, deterministic routines with no BLAS dependency: Sturm-sequence
//! bisection plus inverse iteration for the lowest eigenpairs of a symmetric
//! tridiagonal matrix, cyclic Jacobi for small dense symmetric matrices, and
//! Cholesky factorization for SPD solves. Sized for this crate's workloads
//! (tridiagonal n up to ~10^4, dense n up to a few hundred).

use alloc::vec;
use alloc::vec::Vec;
// Supplies f64 math (sqrt, abs, trig) when building without std.
#[allow(unused_imports)]
use num_traits::Float as _;

/// Number of eigenvalues of the symmetric tridiagonal matrix (diag, off)
/// strictly below `x`, by the Sturm/LDL^T pivot count.
pub fn sturm_count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    assert_eq!(off.len() + 1, n, "off-diagonal length must be n - 1");
    // Pivot floor keeps the recurrence finite when a pivot hits zero.
    let max_e2 = off.iter().fold(0.0f64, |m, &e| m.max(e * e));
    let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * max_e2);
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..n {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        d = (diag[i] - x) - e2 / d;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `m` eigenvalues of the symmetric tridiagonal matrix (diag, off),
/// ascending, each located by bisection on the Sturm count.
pub fn tridiag_lowest_eigenvalues(diag: &[f64], off: &[f64], m: usize) -> Vec<f64> {
    let n = diag.len();
    assert!(m >= 1 && m <= n, "need 1 <= m <= n");
    // Gershgorin enclosure of the whole spectrum.
    let radius = |i: usize| -> f64 {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        lo = lo.min(diag[i] - radius(i));
        hi = hi.max(diag[i] + radius(i));
    }
    let mut out = Vec::with_capacity(m);
    for k in 1..=m {
        let (mut a, mut b) = (lo, hi);
        // 80 halvings push the interval to rounding level for any f64 range.
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count_below(diag, off, mid) >= k {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Partial-pivot LU factorization of (T - shift I) for a symmetric
/// tridiagonal T; pivoting introduces a second superdiagonal.
struct TridiagLu {
    n: usize,
    lower: Vec<f64>,    // multiplier per elimination step
    swapped: Vec<bool>, // row swap per elimination step
    u0: Vec<f64>,       // main diagonal of U
    u1: Vec<f64>,       // first superdiagonal
    u2: Vec<f64>,       // second superdiagonal (fill-in)
}

impl TridiagLu {
    fn new(diag: &[f64], off: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut lower = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n {
            u0[i] = diag[i] - shift;
            if i + 1 < n {
                u1[i] = off[i];
            }
        }
        let scale = diag.iter().fold(0.0f64, |m, &d| m.max(d.abs())) + 1.0;
        let tiny = f64::EPSILON * scale * 1e-3;
        for i in 0..n.saturating_sub(1) {
            let sub = off[i]; // row i+1, col i before elimination
            if sub.abs() > u0[i].abs() {
                // Swap rows i and i+1.
                swapped[i] = true;
                let (r0, r1, r2) = (u0[i], u1[i], u2[i]);
                u0[i] = sub;
                u1[i] = u0[i + 1];
                u2[i] = if i + 2 < n { u1[i + 1] } else { 0.0 };
                u0[i + 1] = r1;
                u1[i + 1] = r2;
                let mut piv = u0[i];
                if piv.abs() < tiny {
                    piv = tiny.copysign(if piv == 0.0 { 1.0 } else { piv });
                    u0[i] = piv;
                }
                let l = r0 / piv;
                lower[i] = l;
                u0[i + 1] -= l * u1[i];
                u1[i + 1] -= l * u2[i];
            } else {
                let mut piv = u0[i];
                if piv.abs() < tiny {
                    piv = tiny.copysign(if piv == 0.0 { 1.0 } else { piv });
                    u0[i] = piv;
                }
                let l = sub / piv;
                lower[i] = l;
                u0[i + 1] -= l * u1[i];
                // u2[i] is zero in the unswapped branch; nothing propagates.
            }
        }
        if n > 0 && u0[n - 1].abs() < tiny {
            u0[n - 1] = tiny.copysign(if u0[n - 1] == 0.0 { 1.0 } else { u0[n - 1] });
        }
        TridiagLu { n, lower, swapped, u0, u1, u2 }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.lower[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}

/// Eigenvector of the symmetric tridiagonal matrix for an eigenvalue
/// estimate `lambda`, by inverse iteration; returned with unit 2-norm.
/// Assumes the eigenvalue is simple (true for Dirichlet 1-D spectra).
pub fn tridiag_eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let lu = TridiagLu::new(diag, off, lambda);
    // Deterministic start with no special symmetry.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i % 7) as f64) / 7.0).collect();
    normalize(&mut v);
    for _ in 0..3 {
        lu.solve_in_place(&mut v);
        normalize(&mut v);
    }
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Eigendecomposition of a dense symmetric matrix by cyclic Jacobi.
///
/// `a` is row-major n*n and is only read. Returns eigenvalues ascending and
/// eigenvectors column-major (`vecs[j*n + i]` = component i of eigenvector j),
/// so A = V diag(vals) V^T with V orthogonal to rounding.
pub fn jacobi_eigh(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    // V starts as identity, column-major.
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    if n <= 1 {
        return (m, v);
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = f64::EPSILON * frob.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Update rows/columns p and q of the symmetric matrix.
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[k * n + p];
                        let akq = m[k * n + q];
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        m[k * n + p] = new_kp;
                        m[p * n + k] = new_kp;
                        m[k * n + q] = new_kq;
                        m[q * n + k] = new_kq;
                    }
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                // Accumulate the rotation into V (columns p and q).
                for i in 0..n {
                    let vip = v[p * n + i];
                    let viq = v[q * n + i];
                    v[p * n + i] = c * vip - s * viq;
                    v[q * n + i] = s * vip + c * viq;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = vec![0.0; n * n];
    for (jnew, &jold) in order.iter().enumerate() {
        sorted_vecs[jnew * n..(jnew + 1) * n].copy_from_slice(&v[jold * n..(jold + 1) * n]);
    }
    vals = sorted_vals;
    (vals, sorted_vecs)
}

/// One Newton-Schulz polar step W <- W (3I - W^T W) / 2 on a column-major
/// square matrix that is already orthogonal to roughly sqrt(epsilon) or
/// better. Squares the distance to the orthogonal group, pushing it to the
/// rounding floor; long products of W then conserve norms as tightly as f64
/// allows.
pub fn orthonormal_polish(w: &mut [f64], n: usize) {
    assert_eq!(w.len(), n * n);
    // G = W^T W (columns are contiguous), symmetric.
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = w[i * n..(i + 1) * n]
                .iter()
                .zip(&w[j * n..(j + 1) * n])
                .map(|(a, b)| a * b)
                .sum();
            g[i * n + j] = dot;
            g[j * n + i] = dot;
        }
    }
    // M = (3I - G) / 2; W <- W M, column by column.
    let old = w.to_vec();
    for j in 0..n {
        let col = &mut w[j * n..(j + 1) * n];
        for x in col.iter_mut() {
            *x = 0.0;
        }
        for k in 0..n {
            let m_kj = if k == j {
                0.5 * (3.0 - g[k * n + j])
            } else {
                -0.5 * g[k * n + j]
            };
            for (x, o) in col.iter_mut().zip(&old[k * n..(k + 1) * n]) {
                *x += m_kj * o;
            }
        }
    }
}

/// Cholesky factor of a dense SPD matrix (row-major). `None` if a pivot is
/// not strictly positive.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>, // lower triangle, row-major
}

impl Cholesky {
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

/// 2-norm condition number estimate of a dense SPD matrix via power
/// iteration on A (largest eigenvalue) and on A^{-1} through its Cholesky
/// factor (smallest). Deterministic start vectors; an order-of-magnitude
/// estimate, which is all the conditioning guard needs.
pub fn spd_condition_estimate(a: &[f64], n: usize, chol: &Cholesky) -> f64 {
    assert_eq!(a.len(), n * n);
    let start: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.3 * (((i * 37 + 11) % 101) as f64) / 101.0)
        .collect();
    let matvec = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[i * n + j] * x[j];
            }
            y[i] = s;
        }
        y
    };
    let mut v = start.clone();
    normalize(&mut v);
    let mut lam_max = 0.0;
    for _ in 0..100 {
        let mut w = matvec(&v);
        lam_max = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        normalize(&mut w);
        v = w;
    }
    let mut u = start;
    normalize(&mut u);
    let mut lam_min_inv = 0.0;
    for _ in 0..100 {
        let mut w = chol.solve(&u);
        lam_min_inv = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        normalize(&mut w);
        u = w;
    }
    if lam_min_inv <= 0.0 {
        return f64::INFINITY;
    }
    (lam_max * lam_min_inv).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    /// Discrete Dirichlet Laplacian on n interior points of (0,1):
    /// exact eigenvalues (2/h^2)(1 - cos(k pi h)).
    fn fd_laplacian(n: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let h = 1.0 / (n as f64 + 1.0);
        let diag = vec![2.0 / (h * h); n];
        let off = vec![-1.0 / (h * h); n - 1];
        (diag, off, h)
    }

    #[test]
    fn sturm_count_matches_discrete_laplacian() {
        let (diag, off, h) = fd_laplacian(127);
        let exact =
            |k: usize| 2.0 / (h * h) * (1.0 - (k as f64 * PI * h).cos());
        // Between the 3rd and 4th eigenvalue the count must be 3.
        let x = 0.5 * (exact(3) + exact(4));
        assert_eq!(sturm_count_below(&diag, &off, x), 3);
        assert_eq!(sturm_count_below(&diag, &off, exact(1) * 0.5), 0);
        assert_eq!(sturm_count_below(&diag, &off, exact(127) + 1.0), 127);
    }

    #[test]
    fn bisection_recovers_laplacian_eigenvalues() {
        let (diag, off, h) = fd_laplacian(255);
        let vals = tridiag_lowest_eigenvalues(&diag, &off, 8);
        for (i, &v) in vals.iter().enumerate() {
            let k = i + 1;
            let exact = 2.0 / (h * h) * (1.0 - (k as f64 * PI * h).cos());
            assert_abs_diff_eq!(v, exact, epsilon = 1e-7 * exact.max(1.0));
        }
    }

    #[test]
    fn inverse_iteration_recovers_sine_modes() {
        let (diag, off, h) = fd_laplacian(255);
        let vals = tridiag_lowest_eigenvalues(&diag, &off, 3);
        for (i, &lam) in vals.iter().enumerate() {
            let k = (i + 1) as f64;
            let v = tridiag_eigenvector(&diag, &off, lam);
            // Compare against normalized sine samples up to sign.
            let mut s: Vec<f64> =
                (0..255).map(|j| (k * PI * (j as f64 + 1.0) * h).sin()).collect();
            let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in s.iter_mut() {
                *x /= norm;
            }
            let dot: f64 = v.iter().zip(&s).map(|(a, b)| a * b).sum();
            let sign = if dot >= 0.0 { 1.0 } else { -1.0 };
            for (a, b) in v.iter().zip(&s) {
                assert_abs_diff_eq!(*a, sign * *b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_two_by_two_closed_form() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = vec![2.0, 1.0, 1.0, 2.0];
        let (vals, vecs) = jacobi_eigh(&a, 2);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-14);
        let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
        // First eigenvector is (1, -1)/sqrt(2) up to sign.
        assert_abs_diff_eq!((vecs[0] * vecs[1]).abs(), inv_sqrt2 * inv_sqrt2, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs[0] * vecs[1], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_and_is_orthogonal() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 12;
        let mut a = vec![0.0; n * n];
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let x = next();
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let (vals, v) = jacobi_eigh(&a, n);
        // A V = V D, columns orthonormal.
        for j in 0..n {
            for i in 0..n {
                let mut av = 0.0;
                for k in 0..n {
                    av += a[i * n + k] * v[j * n + k];
                }
                assert_abs_diff_eq!(av, vals[j] * v[j * n + i], epsilon = 1e-12);
            }
        }
        for j1 in 0..n {
            for j2 in 0..n {
                let dot: f64 =
                    (0..n).map(|i| v[j1 * n + i] * v[j2 * n + i]).sum();
                let expect = if j1 == j2 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expect, epsilon = 1e-13);
            }
        }
        // Ascending order.
        for j in 1..n {
            assert!(vals[j] >= vals[j - 1]);
        }
    }

    #[test]
    fn polish_tightens_orthogonality() {
        // Perturb an orthogonal matrix by ~1e-9 and polish: the Gram matrix
        // should return to identity at the rounding floor.
        let n = 8;
        let a: Vec<f64> = (0..n * n)
            .map(|i| ((i * 2654435761 % 97) as f64 / 97.0) - 0.5)
            .collect();
        let sym: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                a[i * n + j] + a[j * n + i]
            })
            .collect();
        let (_, mut v) = jacobi_eigh(&sym, n);
        for (idx, x) in v.iter_mut().enumerate() {
            *x += 1e-9 * (((idx * 37 % 11) as f64) - 5.0);
        }
        let gram_err = |w: &[f64]| -> f64 {
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = w[i * n..(i + 1) * n]
                        .iter()
                        .zip(&w[j * n..(j + 1) * n])
                        .map(|(x, y)| x * y)
                        .sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - expect).abs());
                }
            }
            worst
        };
        assert!(gram_err(&v) > 1e-10);
        orthonormal_polish(&mut v, n);
        assert!(gram_err(&v) < 1e-14, "gram error {}", gram_err(&v));
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = M^T M + I is SPD for any M.
        let n = 6;
        let mut mmat = vec![0.0; n * n];
        for (idx, entry) in mmat.iter_mut().enumerate() {
            *entry = ((idx * 7919 + 13) % 23) as f64 / 23.0 - 0.4;
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += mmat[k * n + i] * mmat[k * n + j];
                }
                a[i * n + j] = s;
            }
        }
        let chol = Cholesky::new(&a, n).expect("SPD");
        let b: Vec<f64> = (0..n).map(|i| (i as f64) - 2.0).collect();
        let x = chol.solve(&b);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[i * n + j] * x[j];
            }
            assert_abs_diff_eq!(s, b[i], epsilon = 1e-11);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3 and -1
        assert!(Cholesky::new(&a, 2).is_none());
    }

    #[test]
    fn condition_estimate_on_known_spectrum() {
        // diag(1, 10, 100): condition number 100.
        let n = 3;
        let mut a = vec![0.0; n * n];
        a[0] = 1.0;
        a[4] = 10.0;
        a[8] = 100.0;
        let chol = Cholesky::new(&a, n).unwrap();
        let cond = spd_condition_estimate(&a, n, &chol);
        assert!((cond - 100.0).abs() < 1.0, "cond = {cond}");
    }
}
