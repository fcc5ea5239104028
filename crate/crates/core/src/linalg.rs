//! Small dense and structured linear-algebra helpers shared by the solver
//! modules: a Thomas tridiagonal solve, conjugate gradients with an optional
//! orthogonality constraint, and a tolerance-based kernel basis with
//! small-integer rescaling.

/// Prefactored tridiagonal system `(diag, lower, upper)` solved by the Thomas
/// algorithm. The factorization is reused across right-hand sides.
pub struct TridiagFactor {
    /// Modified upper diagonal `c'_i` from the forward sweep.
    c_prime: Vec<f64>,
    /// Reciprocal pivots `1 / (b_i - a_i c'_{i-1})`.
    inv_pivot: Vec<f64>,
    lower: Vec<f64>,
}

impl TridiagFactor {
    /// Factor a tridiagonal matrix with main diagonal `diag` (length n),
    /// sub-diagonal `lower` and super-diagonal `upper` (length n-1 each).
    /// Returns `None` if a pivot vanishes.
    pub fn new(diag: &[f64], lower: &[f64], upper: &[f64]) -> Option<Self> {
        let n = diag.len();
        assert!(n >= 1 && lower.len() == n - 1 && upper.len() == n - 1);
        let mut c_prime = vec![0.0; n - 1];
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = diag[0];
        if pivot == 0.0 {
            return None;
        }
        inv_pivot[0] = 1.0 / pivot;
        for i in 1..n {
            c_prime[i - 1] = upper[i - 1] * inv_pivot[i - 1];
            pivot = diag[i] - lower[i - 1] * c_prime[i - 1];
            if pivot == 0.0 {
                return None;
            }
            inv_pivot[i] = 1.0 / pivot;
        }
        Some(Self {
            c_prime,
            inv_pivot,
            lower: lower.to_vec(),
        })
    }

    /// Solve in place: `rhs` is overwritten with the solution.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        assert_eq!(n, self.inv_pivot.len());
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// Conjugate gradients for a symmetric positive (semi-)definite operator
/// given as a closure `apply(x, out)`. When `deflate_constants` is set, both
/// the right-hand side and all iterates are kept orthogonal to the constant
/// vector, which makes the singular Neumann Laplacian solvable on its range.
///
/// Returns the iteration count, or `None` if the residual target was not met.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
    deflate_constants: bool,
) -> Option<usize>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    let project = |v: &mut [f64]| {
        if deflate_constants {
            let mean = v.iter().sum::<f64>() / n as f64;
            for vi in v.iter_mut() {
                *vi -= mean;
            }
        }
    };

    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    project(&mut r);
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut rs_old = r.iter().map(|v| v * v).sum::<f64>();
    if rs_old.sqrt() <= rel_tol * b_norm {
        return Some(0);
    }
    p.copy_from_slice(&r);

    for k in 1..=max_iter {
        apply(&p, &mut ap);
        let p_ap = p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        if p_ap <= 0.0 {
            return None;
        }
        let alpha = rs_old / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        let rs_new = r.iter().map(|v| v * v).sum::<f64>();
        if rs_new.sqrt() <= rel_tol * b_norm {
            project(x);
            return Some(k);
        }
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    None
}

/// Basis of the kernel of `a` (rows × cols, row-major) by column-pivoted
/// Gaussian elimination. A pivot is considered zero when its magnitude is
/// below `tol` times the largest magnitude of its elimination row block.
pub fn kernel_basis(a: &[Vec<f64>], cols: usize, tol: f64) -> Vec<Vec<f64>> {
    let rows = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for row in &m {
        assert_eq!(row.len(), cols);
    }

    let mut pivot_col_of_row: Vec<usize> = Vec::new();
    let mut is_pivot_col = vec![false; cols];
    let mut r = 0;
    for _ in 0..cols.min(rows) {
        // Best remaining pivot across rows >= r and non-pivot columns.
        let mut best = (0usize, 0usize, 0.0f64);
        for i in r..rows {
            for j in 0..cols {
                if !is_pivot_col[j] && m[i][j].abs() > best.2 {
                    best = (i, j, m[i][j].abs());
                }
            }
        }
        let scale: f64 = m
            .iter()
            .skip(r)
            .flat_map(|row| row.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        if best.2 <= tol * scale.max(1.0) {
            break;
        }
        let (pi, pj, _) = best;
        m.swap(r, pi);
        let piv = m[r][pj];
        for j in 0..cols {
            m[r][j] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = m[i][pj];
                if f != 0.0 {
                    for j in 0..cols {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
        }
        is_pivot_col[pj] = true;
        pivot_col_of_row.push(pj);
        r += 1;
        if r == rows {
            break;
        }
    }

    let mut basis = Vec::new();
    for j in 0..cols {
        if is_pivot_col[j] {
            continue;
        }
        let mut v = vec![0.0; cols];
        v[j] = 1.0;
        for (row, &pc) in pivot_col_of_row.iter().enumerate() {
            v[pc] = -m[row][j];
        }
        basis.push(v);
    }
    basis
}

/// Rescale `v` to its minimal positive integer representative when every
/// entry is close to a rational with denominator at most `max_den`; otherwise
/// return the vector unchanged (sign-normalized so the first nonzero entry is
/// positive).
pub fn integerize(v: &[f64], max_den: u64, tol: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    if let Some(first) = out.iter().find(|x| x.abs() > tol) {
        if *first < 0.0 {
            for x in out.iter_mut() {
                *x = -*x;
            }
        }
    }

    // Rational reconstruction per entry.
    let mut numerators: Vec<i64> = Vec::with_capacity(out.len());
    let mut denominators: Vec<u64> = Vec::with_capacity(out.len());
    for &x in &out {
        let mut found = None;
        for q in 1..=max_den {
            let p = (x * q as f64).round();
            if (x * q as f64 - p).abs() <= tol * q as f64 && p.abs() < 1e15 {
                found = Some((p as i64, q));
                break;
            }
        }
        match found {
            Some((p, q)) => {
                numerators.push(p);
                denominators.push(q);
            }
            None => return out,
        }
    }

    let lcm_den = denominators.iter().copied().fold(1u64, lcm);
    let ints: Vec<i64> = numerators
        .iter()
        .zip(&denominators)
        .map(|(&p, &q)| p * (lcm_den / q) as i64)
        .collect();
    let g = ints
        .iter()
        .map(|&x| x.unsigned_abs())
        .fold(0u64, gcd);
    if g == 0 {
        return out;
    }
    ints.iter().map(|&x| (x / g as i64) as f64).collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiag_recovers_known_solution() {
        // 4x4 with diag 2, off-diagonals -1; x = (1,2,3,4).
        let diag = vec![2.0; 4];
        let off = vec![-1.0; 3];
        let x_true = [1.0, 2.0, 3.0, 4.0];
        let mut rhs = vec![
            2.0 * 1.0 - 2.0,
            -1.0 + 4.0 - 3.0,
            -2.0 + 6.0 - 4.0,
            -3.0 + 8.0,
        ];
        let f = TridiagFactor::new(&diag, &off, &off).unwrap();
        f.solve(&mut rhs);
        for (a, b) in rhs.iter().zip(x_true.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        // A = diag(1..5) + small coupling, SPD.
        let n = 5;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = (i as f64 + 1.0) * x[i];
                if i > 0 {
                    out[i] += 0.1 * x[i - 1];
                }
                if i + 1 < n {
                    out[i] += 0.1 * x[i + 1];
                }
            }
        };
        let b = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let mut x = vec![0.0; n];
        conjugate_gradient(apply, &b, &mut x, 1e-13, 100, false).unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn kernel_of_wide_matrix() {
        // Rows span a 2-dim subspace of R^3; kernel is 1-dim.
        let a = vec![vec![1.0, 0.0, -1.0], vec![0.0, 1.0, -1.0]];
        let basis = kernel_basis(&a, 3, 1e-12);
        assert_eq!(basis.len(), 1);
        let v = &basis[0];
        for row in &a {
            let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-12);
        }
    }

    #[test]
    fn integerize_scales_to_minimal_integers() {
        let v = [0.8729, 0.43645, 0.218225]; // (4,2,1) * 0.218225
        let scaled: Vec<f64> = v.iter().map(|x| x / 0.218225).collect();
        let normalized: Vec<f64> = scaled.iter().map(|x| x * 0.3).collect();
        assert_eq!(integerize(&normalized, 12, 1e-9), vec![4.0, 2.0, 1.0]);
        // Non-rational entries come back unchanged.
        let w = vec![1.0, std::f64::consts::SQRT_2];
        assert_eq!(integerize(&w, 12, 1e-12), w);
    }
}
