//! Implicit-shift QL eigensolver for symmetric tridiagonal matrices (EISPACK `tql2`).

/// Eigenvalues (ascending) and, if requested, eigenvectors of the tridiagonal matrix
/// with diagonal `diag` and off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
///
/// Eigenvectors come back row-major: entry `(row, col)` at `row * n + col`, column
/// `col` belonging to eigenvalue `col`.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64], want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 >= n, "off-diagonal too short");
    if n == 0 {
        return (Vec::new(), want_vectors.then(Vec::new));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let mut v = if want_vectors {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        Some(v)
    } else {
        None
    };

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..200 {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_mut() {
                        for k in 0..n {
                            let h = v[k * n + i + 1];
                            v[k * n + i + 1] = s * v[k * n + i] + c * h;
                            v[k * n + i] = c * v[k * n + i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = v.map(|v| {
        let mut sorted = vec![0.0; n * n];
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..n {
                sorted[row * n + new_col] = v[row * n + old_col];
            }
        }
        sorted
    });
    (values, vectors)
}

/// Lowest eigenvalue and its unit eigenvector, by inverse iteration on the
/// positive definite shift `T - (lambda_0 - delta) I`.
pub fn lowest_eigenpair(diag: &[f64], off: &[f64]) -> (f64, Vec<f64>) {
    let n = diag.len();
    let (values, _) = tridiagonal_eigen(diag, off, false);
    let theta = values[0];
    if n == 1 {
        return (theta, vec![1.0]);
    }
    let width = values[n - 1] - theta;
    let sigma = theta - 1e-10 * width.max(theta.abs()).max(f64::MIN_POSITIVE);
    // LDL^T of the shifted matrix; the pivots stay positive below the spectrum.
    let mut piv = vec![0.0; n];
    let mut l = vec![0.0; n - 1];
    piv[0] = diag[0] - sigma;
    for i in 1..n {
        l[i - 1] = off[i - 1] / piv[i - 1];
        piv[i] = (diag[i] - sigma - l[i - 1] * off[i - 1]).max(f64::MIN_POSITIVE);
    }
    let mut y = vec![1.0; n];
    for _ in 0..3 {
        for i in 1..n {
            y[i] -= l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= piv[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut y {
            *v /= nrm;
        }
    }
    if y[0] < 0.0 {
        for v in &mut y {
            *v = -*v;
        }
    }
    (theta, y)
}
