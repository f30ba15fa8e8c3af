//! Banded matrices with LU (partial pivoting) and Cholesky factorisations.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` is stored as a contiguous window of `kl + ku + 1` entries starting
/// at column `i - kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.index(i, j)]
        } else {
            0.0
        }
    }

    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.index(i, j);
        self.data[k] = v;
    }

    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.index(i, j);
        self.data[k] += v;
    }

    fn row_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row_cols(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Replaces row and column `i` by those of the identity.
    pub fn pin(&mut self, i: usize) {
        for j in self.row_cols(i) {
            let v = if i == j { 1.0 } else { 0.0 };
            self.set(i, j, v);
            if self.in_band(j, i) && i != j {
                self.set(j, i, 0.0);
            }
        }
    }

    /// Principal submatrix on the index range `[lo, hi)`.
    pub fn principal_submatrix(&self, lo: usize, hi: usize) -> BandMatrix {
        let mut out = BandMatrix::zeros(hi - lo, self.kl, self.ku);
        for i in lo..hi {
            for j in self.row_cols(i) {
                if (lo..hi).contains(&j) {
                    out.set(i - lo, j - lo, self.get(i, j));
                }
            }
        }
        out
    }

    /// `A + s I`.
    pub fn shifted(&self, s: f64) -> BandMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.add(i, i, s);
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_cols(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in self.row_cols(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Lower bound on the spectrum of a symmetric matrix from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let off: f64 = self.row_cols(i).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    /// Cholesky factor of a symmetric positive definite band matrix (reads the lower band).
    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

/// `PA = LU` with row interchanges, stored in the style of LAPACK `gbtrf`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` after fill-in: `kl + ku`.
    ku: usize,
    /// Row `i` covers columns `[i - kl, i + kl + ku]`.
    rows: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl) = (a.n, a.kl);
        let ku = a.kl + a.ku;
        let w = kl + ku + 1;
        let mut rows = vec![0.0; n * w];
        for i in 0..n {
            for j in a.row_cols(i) {
                rows[i * w + (j + kl - i)] = a.get(i, j);
            }
        }
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        let mut mult = vec![0.0; n * kl];
        let mut piv = vec![0; n];
        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            let mut p = k;
            let mut best = rows[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = rows[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= scale * f64::EPSILON * 1e-3 {
                return Err(Error::Singular(k));
            }
            piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    rows.swap(at(k, j), at(p, j));
                }
            }
            let pivot = rows[at(k, k)];
            for i in k + 1..=last_row {
                let l = rows[at(i, k)] / pivot;
                mult[k * kl + (i - k - 1)] = l;
                rows[at(i, k)] = 0.0;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        rows[at(i, j)] -= l * rows[at(k, j)];
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, rows, mult, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.mult[k * kl + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let row = &self.rows[k * w..(k + 1) * w];
            let mut s = x[k];
            for j in k + 1..=(k + ku).min(n - 1) {
                s -= row[j + kl - k] * x[j];
            }
            x[k] = s / row[kl];
        }
        Ok(x)
    }
}

/// `A = L L^T` for symmetric positive definite band matrices.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    /// Row `i` covers columns `[i - kd, i]`.
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kd) = (a.n, a.kl);
        let w = kd + 1;
        let mut l = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + kd - i);
        for i in 0..n {
            let j0 = i.saturating_sub(kd);
            for j in j0..=i {
                let mut s = a.get(i, j);
                for k in j0.max(j.saturating_sub(kd))..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(i));
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(Self { n, kd, l })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let at = |i: usize, j: usize| i * w + (j + kd - i);
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(kd)..i {
                s -= self.l[at(i, k)] * x[k];
            }
            x[i] = s / self.l[at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + kd + 1).min(n) {
                s -= self.l[at(k, i)] * x[k];
            }
            x[i] = s / self.l[at(i, i)];
        }
        Ok(x)
    }
}

/// Solves `A x = b` by banded LU with partial pivoting.
pub fn banded_solve(a: &BandMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.lu()?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian(n: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        a
    }

    /// Textbook Gaussian elimination with partial pivoting on a dense copy.
    fn dense_oracle(a: &BandMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.n();
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (x[k] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn identity_solve_is_exact() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(banded_solve(&BandMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn laplacian_recovers_ones() {
        let a = laplacian(100);
        let b = a.matvec(&vec![1.0; 100]);
        let x = banded_solve(&a, &b).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() <= 1e-12));
        let xc = a.cholesky().unwrap().solve(&b).unwrap();
        assert!(xc.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let (n, kd) = (50, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = BandMatrix::zeros(n, kd, kd);
        for i in 0..n {
            for j in i.saturating_sub(kd)..i {
                let v = rng.gen_range(-1.0..1.0);
                a.set(i, j, v);
                a.set(j, i, v);
            }
            a.set(i, i, 2.0 * kd as f64 + 1.0 + rng.gen_range(0.0..1.0));
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = dense_oracle(&a, &b);
        for x in [banded_solve(&a, &b).unwrap(), a.cholesky().unwrap().solve(&b).unwrap()] {
            let diff = x.iter().zip(&oracle).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-10, "{diff}");
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = BandMatrix::zeros(4, 1, 1);
        for (i, j, v) in [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0), (2, 3, 1.0), (3, 2, 1.0)] {
            a.set(i, j, v);
        }
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = banded_solve(&a, &b).unwrap();
        let r = a.matvec(&x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() <= 1e-14));
    }

    #[test]
    fn singular_and_indefinite_are_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(banded_solve(&a, &[1.0, 1.0, 1.0]), Err(Error::Singular(0))));
        assert!(matches!(laplacian(5).shifted(-10.0).cholesky(), Err(Error::NotPositiveDefinite(0))));
    }

    #[test]
    fn pin_keeps_symmetry() {
        let mut a = laplacian(6);
        a.pin(0);
        a.pin(5);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(1, 0), 0.0);
        let sub = a.principal_submatrix(1, 5);
        assert_eq!(sub.to_dense(), laplacian(4).to_dense());
    }

    proptest! {
        #[test]
        fn general_band_solve_has_small_backward_error(
            n in 5usize..60, kl in 0usize..4, ku in 0usize..4, seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = BandMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                    a.set(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Ok(x) = banded_solve(&a, &b) {
                let r = a.matvec(&x);
                let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                // Random band matrices can be badly conditioned; growth is bounded by 2^(kl)
                // per column so the backward error stays near machine precision.
                prop_assert!(err <= 1e-10 * (a.norm_inf() * xn + bn), "err {err}");
            }
        }
    }
}
