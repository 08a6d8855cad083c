//! Unpivoted banded `L D L^T` factorization of `A - σ I`.
//!
//! Row `i` of `L` is stored in `l[i*bw .. (i+1)*bw]`, column `j` at offset
//! `j + bw - i` (valid for `i - bw <= j < i`). The fill of an unpivoted
//! factorization stays inside the band, so grid operators numbered with the
//! first axis fastest factor in `O(n bw^2)`.

use crate::operators::SparseSymmetricOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Breakdown {
    SmallPivot { index: usize, pivot: f64 },
    NonFinite { index: usize },
    Growth { index: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct BandLdlt {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

/// Relative size below which a pivot counts as a breakdown.
const PIVOT_FLOOR: f64 = 1e-13;
/// Bound on `(|L| |D| |L^T|)_ii / scale`; larger means rounding in the
/// pivots may exceed the tie tolerance.
const GROWTH_CEILING: f64 = 1e8;

impl BandLdlt {
    pub(crate) fn factor(a: &SparseSymmetricOperator, shift: f64) -> Result<Self, Breakdown> {
        let n = a.dim();
        let bw = a.bandwidth();
        let scale = a.norm_bound() + shift.abs();
        let floor = PIVOT_FLOOR * scale.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * bw];
        let mut d = vec![0.0; n];
        let mut u = vec![0.0; bw];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            u.iter_mut().for_each(|x| *x = 0.0);
            let mut diag = -shift;
            for (c, v) in a.row(i) {
                if c == i {
                    diag += v;
                } else if c < i {
                    u[c + bw - i] = v;
                }
            }
            // u_ij = a_ij - sum_{k<j} u_ik L_jk
            for j in lo..i {
                let len = j - lo;
                let ui = &u[lo + bw - i..lo + bw - i + len];
                let lj = &l[j * bw + lo + bw - j..j * bw + lo + bw - j + len];
                let dot: f64 = ui.iter().zip(lj).map(|(x, y)| x * y).sum();
                u[j + bw - i] -= dot;
            }
            let mut growth = 0.0;
            for j in lo..i {
                let uij = u[j + bw - i];
                let lij = uij / d[j];
                l[i * bw + j + bw - i] = lij;
                diag -= uij * lij;
                growth += (uij * lij).abs();
            }
            if !diag.is_finite() {
                return Err(Breakdown::NonFinite { index: i });
            }
            if diag.abs() <= floor {
                return Err(Breakdown::SmallPivot { index: i, pivot: diag });
            }
            if growth > GROWTH_CEILING * scale {
                return Err(Breakdown::Growth { index: i });
            }
            d[i] = diag;
        }
        Ok(Self { n, bw, l, d })
    }

    pub(crate) fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&p| p < 0.0).count()
    }

    /// Solves `L D L^T x = b` in place.
    pub(crate) fn solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * bw + lo + bw - i..i * bw + bw];
            let s: f64 = row.iter().zip(&x[lo..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let xi = x[i];
            let row = &self.l[i * bw + lo + bw - i..i * bw + bw];
            for (k, lik) in (lo..i).zip(row) {
                x[k] -= lik * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, a: f64, b: f64) -> SparseSymmetricOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, a));
            if i + 1 < n {
                t.push((i, i + 1, b));
                t.push((i + 1, i, b));
            }
        }
        SparseSymmetricOperator::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn solves_spd_band_system() {
        let a = tridiag(10, 4.0, -1.0);
        let f = BandLdlt::factor(&a, 0.0).unwrap();
        assert_eq!(f.negative_pivots(), 0);
        let x_true: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let mut x = a.mul_vec(&x_true);
        f.solve(&mut x);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = SparseSymmetricOperator::from_triplets(2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        assert!(matches!(BandLdlt::factor(&a, 1.0), Err(Breakdown::SmallPivot { index: 0, .. })));
    }
}
