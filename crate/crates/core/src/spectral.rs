//! Symmetric eigendecomposition and the spectral quantities built on it.
//!
//! The solver is Householder reduction to tridiagonal form followed by the
//! implicit QL iteration with Wilkinson-type shifts (the EISPACK `tql2`
//! scheme). Eigenvectors are held transposed, one contiguous row per
//! eigenvector, so every Givens rotation and every reflector touches
//! contiguous memory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::SymmetricMatrix;
use crate::error::{Error, Result};
use crate::testfn::TestFunction;

/// QL iterations allowed per eigenvalue.
pub const MAX_QL_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub n: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Row a holds eigenvector a: Q_ja = vectors[a * n + j].
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    /// Q_ja, the j-th component of eigenvector a.
    #[inline]
    pub fn q(&self, j: usize, a: usize) -> f64 {
        self.vectors[a * self.n + j]
    }

    pub fn eigenvector(&self, a: usize) -> &[f64] {
        &self.vectors[a * self.n..(a + 1) * self.n]
    }

    /// Q as a dense row-major matrix with eigenvectors in columns.
    pub fn eigenvectors(&self) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; n * n];
        for a in 0..n {
            for j in 0..n {
                q[j * n + a] = self.vectors[a * n + j];
            }
        }
        q
    }

    /// max |QᵀQ − I|.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..=a {
                let dot: f64 = self.eigenvector(a).iter().zip(self.eigenvector(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// max |QΛQᵀ − M|.
    pub fn reconstruction_error(&self, m: &SymmetricMatrix) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..n).map(|a| self.eigenvalues[a] * self.q(i, a) * self.q(j, a)).sum();
                worst = worst.max((v - m.get(i, j)).abs());
            }
        }
        worst
    }
}

/// Eigenvalues plus the eigenvector components of a few selected rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDecomposition {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub rows: Vec<usize>,
    /// components[r][a] = Q_{rows[r], a}.
    pub components: Vec<Vec<f64>>,
}

/// Householder reduction of a dense symmetric matrix (row-major, full storage).
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Reflector k acts on indices k+1..n as I − u uᵀ with |u|² = 2, or is the identity if empty.
    reflectors: Vec<Vec<f64>>,
}

fn tridiagonalize(mut a: Vec<f64>, n: usize) -> Tridiagonal {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        diag[k] = a[k * n + k];
        let m = n - k - 1;
        let x = &a[k * n + k + 1..k * n + n];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            off[k] = 0.0;
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut u = x.to_vec();
        u[0] -= alpha;
        let unorm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if unorm == 0.0 {
            off[k] = alpha;
            reflectors.push(Vec::new());
            continue;
        }
        let scale = std::f64::consts::SQRT_2 / unorm;
        u.iter_mut().for_each(|v| *v *= scale);
        off[k] = alpha;

        // A22 ← H A22 H with p = A22 u, q = p − (uᵀp/2) u.
        let base = k + 1;
        for i in 0..m {
            let row = &a[(base + i) * n + base..(base + i) * n + n];
            p[i] = row.iter().zip(&u).map(|(r, v)| r * v).sum();
        }
        let half_up = 0.5 * u.iter().zip(&p[..m]).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..m {
            p[i] -= half_up * u[i];
        }
        for i in 0..m {
            let (ui, qi) = (u[i], p[i]);
            let row = &mut a[(base + i) * n + base..(base + i) * n + n];
            for ((r, &uj), &qj) in row.iter_mut().zip(&u).zip(&p[..m]) {
                *r -= ui * qj + qi * uj;
            }
        }
        reflectors.push(u);
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        off[n - 2] = a[(n - 1) * n + n - 2];
    }
    if n >= 1 {
        diag[n - 1] = a[(n - 1) * n + n - 1];
    }
    Tridiagonal { diag, off, reflectors }
}

/// Which vectors the QL iteration rotates along with the eigenvalues.
enum Track<'a> {
    None,
    /// Transposed n×n storage, row i = column i of the accumulated matrix.
    Transposed(&'a mut [f64]),
    /// A few rows of the accumulated matrix, each indexed by column.
    Rows(&'a mut [Vec<f64>]),
}

/// Implicit QL on (d, e) with e[i] coupling i and i+1. Returns the index of a
/// non-converged eigenvalue as the error.
fn tql2(d: &mut [f64], off: &[f64], mut track: Track<'_>) -> std::result::Result<(), usize> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
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
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(l);
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
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
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    match &mut track {
                        Track::None => {}
                        Track::Transposed(z) => {
                            let (lo, hi) = z[i * n..(i + 2) * n].split_at_mut(n);
                            for (zi, zi1) in lo.iter_mut().zip(hi.iter_mut()) {
                                let t = *zi1;
                                *zi1 = s * *zi + c * t;
                                *zi = c * *zi - s * t;
                            }
                        }
                        Track::Rows(rows) => {
                            for row in rows.iter_mut() {
                                let t = row[i + 1];
                                row[i + 1] = s * row[i] + c * t;
                                row[i] = c * row[i] - s * t;
                            }
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
    Ok(())
}

fn ascending_order(d: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

fn no_convergence(m: &SymmetricMatrix, index: usize) -> Error {
    Error::NoConvergence {
        seed: m.seed,
        replica: m.replica,
        index,
    }
}

/// Full decomposition M = QΛQᵀ.
pub fn eigh(m: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = m.n;
    let tri = tridiagonalize(m.to_dense(), n);
    let mut d = tri.diag;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &tri.off, Track::Transposed(&mut z)).map_err(|i| no_convergence(m, i))?;
    // Back-transform each tridiagonal eigenvector by H_0 H_1 ⋯ H_{n−3}.
    for (k, u) in tri.reflectors.iter().enumerate().rev() {
        if u.is_empty() {
            continue;
        }
        for a in 0..n {
            let seg = &mut z[a * n + k + 1..(a + 1) * n];
            let s: f64 = seg.iter().zip(u).map(|(x, y)| x * y).sum();
            if s != 0.0 {
                for (x, y) in seg.iter_mut().zip(u) {
                    *x -= s * y;
                }
            }
        }
    }
    let order = ascending_order(&d);
    let eigenvalues = order.iter().map(|&a| d[a]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &a in &order {
        vectors.extend_from_slice(&z[a * n..(a + 1) * n]);
    }
    Ok(SpectralDecomposition { n, eigenvalues, vectors })
}

/// Eigenvalues only.
pub fn eigvalsh(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    let tri = tridiagonalize(m.to_dense(), m.n);
    let mut d = tri.diag;
    tql2(&mut d, &tri.off, Track::None).map_err(|i| no_convergence(m, i))?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues and the eigenvector components of the given rows, at O(n²)
/// cost beyond the reduction.
pub fn eigh_rows(m: &SymmetricMatrix, rows: &[usize]) -> Result<PartialDecomposition> {
    let n = m.n;
    for &r in rows {
        if r >= n {
            return Err(Error::IndexOutOfRange { row: r, col: r, n });
        }
    }
    let tri = tridiagonalize(m.to_dense(), n);
    // Row j of H_0 ⋯ H_{n−3}, built by applying the reflectors in order to e_j.
    let mut tracked: Vec<Vec<f64>> = rows
        .iter()
        .map(|&j| {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            for (k, u) in tri.reflectors.iter().enumerate() {
                if u.is_empty() {
                    continue;
                }
                let seg = &mut r[k + 1..];
                let s: f64 = seg.iter().zip(u).map(|(x, y)| x * y).sum();
                for (x, y) in seg.iter_mut().zip(u) {
                    *x -= s * y;
                }
            }
            r
        })
        .collect();
    let mut d = tri.diag;
    tql2(&mut d, &tri.off, Track::Rows(&mut tracked)).map_err(|i| no_convergence(m, i))?;
    let order = ascending_order(&d);
    Ok(PartialDecomposition {
        n,
        eigenvalues: order.iter().map(|&a| d[a]).collect(),
        rows: rows.to_vec(),
        components: tracked
            .iter()
            .map(|r| order.iter().map(|&a| r[a]).collect())
            .collect(),
    })
}

/// Eigenvalues and first components of eigenvectors of a symmetric
/// tridiagonal matrix (Golub–Welsch).
pub fn tridiagonal_eigen_first_row(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut first = vec![vec![0.0; n]];
    first[0][0] = 1.0;
    tql2(&mut d, off, Track::Rows(&mut first)).map_err(|index| Error::NoConvergence {
        seed: 0,
        replica: 0,
        index,
    })?;
    let order = ascending_order(&d);
    Ok((
        order.iter().map(|&a| d[a]).collect(),
        order.iter().map(|&a| first[0][a]).collect(),
    ))
}

fn check_index(n: usize, j: usize, k: usize) -> Result<()> {
    if j >= n || k >= n {
        Err(Error::IndexOutOfRange { row: j, col: k, n })
    } else {
        Ok(())
    }
}

/// φ(M)_jk = Σ_a φ(λ_a) Q_ja Q_ka (indices are 0-based).
pub fn matrix_function_entry(dec: &SpectralDecomposition, phi: &TestFunction, j: usize, k: usize) -> Result<f64> {
    check_index(dec.n, j, k)?;
    Ok((0..dec.n)
        .map(|a| phi.eval(dec.eigenvalues[a]) * dec.q(j, a) * dec.q(k, a))
        .sum())
}

/// The same from a partial decomposition holding rows j and k.
pub fn matrix_function_entry_partial(dec: &PartialDecomposition, phi: &TestFunction, j: usize, k: usize) -> Result<f64> {
    check_index(dec.n, j, k)?;
    let row = |r: usize| {
        dec.rows
            .iter()
            .position(|&x| x == r)
            .map(|p| &dec.components[p])
            .ok_or_else(|| Error::Contract(format!("row {r} was not tracked")))
    };
    let (qj, qk) = (row(j)?, row(k)?);
    Ok((0..dec.n).map(|a| phi.eval(dec.eigenvalues[a]) * qj[a] * qk[a]).sum())
}

/// p(M)_jk for a polynomial p by exact matrix–vector powers:
/// (M^k)_jk = (M^a e_j)·(M^b e_k) with a + b = k.
pub fn polynomial_entry(m: &SymmetricMatrix, coefficients: &[f64], j: usize, k: usize) -> Result<f64> {
    let n = m.n;
    check_index(n, j, k)?;
    let degree = coefficients.len().saturating_sub(1);
    let half = degree.div_ceil(2);
    let powers = |start: usize| {
        let mut out = Vec::with_capacity(half + 1);
        let mut v = vec![0.0; n];
        v[start] = 1.0;
        out.push(v);
        for p in 1..=half {
            let mut next = vec![0.0; n];
            m.matvec(&out[p - 1], &mut next);
            out.push(next);
        }
        out
    };
    let left = powers(j);
    let right = if j == k { None } else { Some(powers(k)) };
    let right = right.as_ref().unwrap_or(&left);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    Ok(coefficients
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(p, &c)| {
            let a = p / 2;
            c * dot(&left[a], &right[p - a])
        })
        .sum())
}

/// U_jk(t) for requested pairs on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSample {
    pub t_grid: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
    /// entries[p][i] = U_{pairs[p]}(t_grid[i]).
    pub entries: Vec<Vec<Complex64>>,
}

fn phases(eigenvalues: &[f64], t: f64) -> Vec<Complex64> {
    eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, t * l)).collect()
}

/// U_jk(t) = Σ_a e^{itλ_a} Q_ja Q_ka.
pub fn propagator_entries(dec: &SpectralDecomposition, pairs: &[(usize, usize)], t_grid: &[f64]) -> Result<PropagatorSample> {
    for &(j, k) in pairs {
        check_index(dec.n, j, k)?;
    }
    let mut entries = vec![Vec::with_capacity(t_grid.len()); pairs.len()];
    for &t in t_grid {
        let ph = phases(&dec.eigenvalues, t);
        for (p, &(j, k)) in pairs.iter().enumerate() {
            let u = if t == 0.0 && j == k {
                Complex64::new(1.0, 0.0)
            } else {
                (0..dec.n).map(|a| ph[a] * (dec.q(j, a) * dec.q(k, a))).sum()
            };
            entries[p].push(u);
        }
    }
    Ok(PropagatorSample {
        t_grid: t_grid.to_vec(),
        pairs: pairs.to_vec(),
        entries,
    })
}

/// Row j of U(t): (U_j0(t), …, U_j,n−1(t)).
pub fn propagator_row(dec: &SpectralDecomposition, j: usize, t: f64) -> Vec<Complex64> {
    let n = dec.n;
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for (a, ph) in phases(&dec.eigenvalues, t).into_iter().enumerate() {
        let c = ph * dec.q(j, a);
        for (r, &qk) in row.iter_mut().zip(dec.eigenvector(a)) {
            *r += c * qk;
        }
    }
    row
}

/// Diagonal of U(t): (U_00(t), …, U_n−1,n−1(t)).
pub fn propagator_diagonal(dec: &SpectralDecomposition, t: f64) -> Vec<Complex64> {
    let n = dec.n;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for (a, ph) in phases(&dec.eigenvalues, t).into_iter().enumerate() {
        for ((r, i), &qk) in re.iter_mut().zip(im.iter_mut()).zip(dec.eigenvector(a)) {
            let q2 = qk * qk;
            *r += ph.re * q2;
            *i += ph.im * q2;
        }
    }
    re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
}

/// The four trace statistics of the propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaStatistics {
    /// n⁻¹ Tr U(t₁).
    pub v_n: Complex64,
    /// n⁻¹ Σ_k U_kk(t₁) U_kk(t₂).
    pub v_n_pair: Complex64,
    /// n^{-1/2} Σ_k U_jk(t₁) U_kk(t₂).
    pub v_n1: Complex64,
    /// Σ_k Π_m U_jk(t_m); present when at least three times are given.
    pub v_n2: Option<Complex64>,
}

/// Statistics from U's diagonal at t₁, t₂ and row j at each t_m.
pub fn lemma_statistics(dec: &SpectralDecomposition, j: usize, t_tuple: &[f64]) -> Result<LemmaStatistics> {
    check_index(dec.n, j, j)?;
    if t_tuple.len() < 2 {
        return Err(Error::Contract(format!(
            "lemma statistics need at least two times, got {}",
            t_tuple.len()
        )));
    }
    let n = dec.n as f64;
    let (t1, t2) = (t_tuple[0], t_tuple[1]);
    let v_n = phases(&dec.eigenvalues, t1).iter().sum::<Complex64>() / n;
    let d1 = propagator_diagonal(dec, t1);
    let d2 = if t2 == t1 { d1.clone() } else { propagator_diagonal(dec, t2) };
    let row1 = propagator_row(dec, j, t1);
    let v_n_pair = d1.iter().zip(&d2).map(|(a, b)| a * b).sum::<Complex64>() / n;
    let v_n1 = row1.iter().zip(&d2).map(|(a, b)| a * b).sum::<Complex64>() / n.sqrt();
    let v_n2 = if t_tuple.len() >= 3 { Some(v_n2(dec, j, t_tuple)?) } else { None };
    Ok(LemmaStatistics { v_n, v_n_pair, v_n1, v_n2 })
}

/// v_{n2}(t̄) = Σ_k Π_{m=1}^{ℓ} U_jk(t_m), defined for ℓ ≥ 3.
pub fn v_n2(dec: &SpectralDecomposition, j: usize, t_tuple: &[f64]) -> Result<Complex64> {
    check_index(dec.n, j, j)?;
    if t_tuple.len() < 3 {
        return Err(Error::Contract(format!(
            "v_n2 is defined for at least three times, got {}",
            t_tuple.len()
        )));
    }
    let mut prod = vec![Complex64::new(1.0, 0.0); dec.n];
    let mut cache: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for &t in t_tuple {
        if !cache.iter().any(|(s, _)| *s == t) {
            cache.push((t, propagator_row(dec, j, t)));
        }
        let row = &cache.iter().find(|(s, _)| *s == t).expect("cached").1;
        for (p, u) in prod.iter_mut().zip(row) {
            *p *= u;
        }
    }
    Ok(prod.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_matrix, EnsembleSpec, EntryDistribution};

    fn goe_sample(n: usize, replica: u64) -> SymmetricMatrix {
        sample_matrix(&EnsembleSpec::goe(1.0).unwrap(), n, 31, replica).unwrap()
    }

    #[test]
    fn identity_and_reflection() {
        let id = SymmetricMatrix::from_dense(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(eigh(&id).unwrap().eigenvalues, vec![1.0, 1.0, 1.0]);
        let flip = SymmetricMatrix::from_dense(2, &[0.0, 1.0, 1.0, 0.0]);
        let dec = eigh(&flip).unwrap();
        assert!((dec.eigenvalues[0] + 1.0).abs() < 1e-15 && (dec.eigenvalues[1] - 1.0).abs() < 1e-15);
        let one = SymmetricMatrix::from_packed(1, vec![4.0]);
        assert_eq!(eigh(&one).unwrap().eigenvalues, vec![4.0]);
    }

    #[test]
    fn reconstruction_on_random_sample() {
        let m = goe_sample(50, 0);
        let dec = eigh(&m).unwrap();
        assert!(dec.reconstruction_error(&m) <= 1e-10);
        assert!(dec.orthonormality_error() <= 1e-10 * 50f64.sqrt());
        assert!(dec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let sum: f64 = dec.eigenvalues.iter().sum();
        assert!((sum - m.trace()).abs() <= 1e-10 * (1.0 + m.trace().abs()));
    }

    #[test]
    fn degenerate_spectrum_is_handled() {
        // Rank-one perturbation of the identity: n−1 equal eigenvalues.
        let n = 12;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dense[i * n + j] = if i == j { 2.0 } else { 0.0 } + 0.5;
            }
        }
        let m = SymmetricMatrix::from_dense(n, &dense);
        let dec = eigh(&m).unwrap();
        assert!(dec.reconstruction_error(&m) < 1e-13);
        assert!(dec.orthonormality_error() < 1e-13);
        assert!((dec.eigenvalues[n - 1] - (2.0 + 0.5 * n as f64)).abs() < 1e-12);
    }

    #[test]
    fn row_subset_matches_full() {
        let m = goe_sample(60, 3);
        let full = eigh(&m).unwrap();
        let part = eigh_rows(&m, &[0, 29, 59]).unwrap();
        for (a, b) in full.eigenvalues.iter().zip(&part.eigenvalues) {
            assert!((a - b).abs() < 1e-12);
        }
        // Eigenvectors are fixed only up to sign, so compare projector entries.
        for (r, &j) in part.rows.iter().enumerate() {
            for a in 0..m.n {
                let x = part.components[r][a];
                assert!((x * x - full.q(j, a).powi(2)).abs() < 1e-12);
            }
        }
        let phi = TestFunction::monomial(3);
        let a = matrix_function_entry(&full, &phi, 0, 29).unwrap();
        let b = matrix_function_entry_partial(&part, &phi, 0, 29).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn functional_calculus_matches_matrix_powers() {
        let m = goe_sample(40, 1);
        let dec = eigh(&m).unwrap();
        let dense = m.to_dense();
        let n = m.n;
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sq[i * n + j] = (0..n).map(|k| dense[i * n + k] * dense[k * n + j]).sum();
            }
        }
        let phi2 = TestFunction::monomial(2);
        for (j, k) in [(0, 0), (3, 17), (39, 2)] {
            let v = matrix_function_entry(&dec, &phi2, j, k).unwrap();
            assert!((v - sq[j * n + k]).abs() < 1e-9);
        }
        let id = matrix_function_entry(&dec, &TestFunction::monomial(0), 5, 5).unwrap();
        assert!((id - 1.0).abs() < 1e-12);
        let lin = matrix_function_entry(&dec, &TestFunction::monomial(1), 7, 7).unwrap();
        assert!((lin - m.get(7, 7)).abs() < 1e-12);
        assert!(matrix_function_entry(&dec, &phi2, 40, 0).is_err());
    }

    #[test]
    fn krylov_route_agrees_with_eigh() {
        let spec = EnsembleSpec::paper_symmetric(EntryDistribution::rademacher(1.0).unwrap()).unwrap();
        let m = sample_matrix(&spec, 80, 4, 0).unwrap();
        let dec = eigh(&m).unwrap();
        let coeffs = vec![0.3, -1.0, 0.5, 2.0, 0.0, -0.25, 0.125];
        let phi = TestFunction::polynomial(coeffs.clone());
        for (j, k) in [(0, 0), (40, 40), (79, 12)] {
            let a = polynomial_entry(&m, &coeffs, j, k).unwrap();
            let b = matrix_function_entry(&dec, &phi, j, k).unwrap();
            assert!((a - b).abs() < 1e-8, "({j},{k}): {a} vs {b}");
        }
    }

    #[test]
    fn propagator_is_unitary_and_a_group() {
        let m = goe_sample(50, 2);
        let dec = eigh(&m).unwrap();
        let t0 = propagator_entries(&dec, &[(3, 3), (3, 4)], &[0.0]).unwrap();
        assert_eq!(t0.entries[0][0], Complex64::new(1.0, 0.0));
        assert!(t0.entries[1][0].norm() < 1e-12);
        for &t in &[0.3, 1.0, 4.5] {
            let row = propagator_row(&dec, 3, t);
            let norm: f64 = row.iter().map(|u| u.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        let (t1, t2) = (0.7, 1.9);
        let r1 = propagator_row(&dec, 5, t1);
        let r2 = propagator_row(&dec, 5, t2);
        // U symmetric, so Σ_k U_5k(t₁) U_k5(t₂) = Σ_k U_5k(t₁) U_5k(t₂).
        let composed: Complex64 = r1.iter().zip(&r2).map(|(a, b)| a * b).sum();
        let direct = propagator_entries(&dec, &[(5, 5)], &[t1 + t2]).unwrap().entries[0][0];
        assert!((composed - direct).norm() < 1e-10);
        let diag = propagator_diagonal(&dec, 1.3);
        let entry = propagator_entries(&dec, &[(9, 9)], &[1.3]).unwrap().entries[0][0];
        assert!((diag[9] - entry).norm() < 1e-14);
    }

    #[test]
    fn lemma_statistics_at_time_zero() {
        let m = goe_sample(30, 5);
        let dec = eigh(&m).unwrap();
        let s = lemma_statistics(&dec, 4, &[0.0, 0.0, 0.0]).unwrap();
        assert!((s.v_n - 1.0).norm() < 1e-12);
        assert!((s.v_n_pair - 1.0).norm() < 1e-12);
        assert!((s.v_n1 - 1.0 / 30f64.sqrt()).norm() < 1e-12);
        assert!((s.v_n2.unwrap() - 1.0).norm() < 1e-12);
        let s = lemma_statistics(&dec, 4, &[1.2, -0.4, 2.0]).unwrap();
        assert!(s.v_n.norm() <= 1.0 + 1e-12);
        assert!(s.v_n2.unwrap().norm() <= 1.0 + 1e-12);
        assert!(v_n2(&dec, 0, &[1.0, 1.0]).is_err());
        assert!(lemma_statistics(&dec, 0, &[1.0]).is_err());
    }
}
