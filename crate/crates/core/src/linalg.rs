//! Small dense linear algebra: LU with partial pivoting, determinants,
//! linear solves, and the permanent of absolute values (the sum of the
//! magnitudes of every Leibniz term, used to normalize determinant
//! residuals).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix rows must be square");
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).fold(T::zero(), |s, j| s + self[(i, j)] * v[j]))
            .collect()
    }

    /// `v^T A v`
    pub fn quadratic_form(&self, v: &[T]) -> T {
        v.iter().zip(self.mul_vec(v)).fold(T::zero(), |s, (a, b)| s + *a * b)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        SquareMatrix { n: self.n, data: self.data.iter().map(|v| f(*v)).collect() }
    }

    pub fn determinant(&self) -> T {
        match lu(self.clone()) {
            Some(f) => f.determinant(),
            None => T::zero(),
        }
    }

    /// Solves `A x = b`. Fails when a pivot falls below a relative
    /// threshold of `1e4 * eps * max|A|`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let scale = self.max_abs();
        let f = lu(self.clone()).ok_or(Error::RankDeficientSystem)?;
        let tiny = T::epsilon() * T::lit(1e4) * scale * T::lit(self.n as f64);
        if f.min_pivot() <= tiny {
            return Err(Error::RankDeficientSystem);
        }
        Ok(f.solve(b))
    }

    /// Permanent of `|A|`, i.e. the sum over permutations of
    /// `prod |a_{i, sigma(i)}|`. Subset DP, O(2^n n); all summands are
    /// nonnegative so there is no cancellation.
    pub fn abs_permanent(&self) -> T {
        let n = self.n;
        assert!(n <= 20, "abs_permanent is meant for small matrices");
        let mut dp = vec![T::zero(); 1 << n];
        dp[0] = T::one();
        for mask in 1usize..(1 << n) {
            let row = mask.count_ones() as usize - 1;
            let mut acc = T::zero();
            let mut bits = mask;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                acc = acc + dp[mask & !(1 << j)] * self[(row, j)].abs();
            }
            dp[mask] = acc;
        }
        dp[(1 << n) - 1]
    }

    /// The `(n+1) x (n+1)` matrix `[[corner, border^T], [border, A]]`.
    pub fn bordered(&self, corner: T, border: &[T]) -> Self {
        assert_eq!(border.len(), self.n);
        Self::from_fn(self.n + 1, |i, j| match (i, j) {
            (0, 0) => corner,
            (0, j) => border[j - 1],
            (i, 0) => border[i - 1],
            (i, j) => self[(i - 1, j - 1)],
        })
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

struct Lu<T> {
    a: SquareMatrix<T>,
    perm: Vec<usize>,
    swaps: usize,
}

/// In-place LU with partial pivoting; `None` when a column is exactly zero.
fn lu<T: Scalar>(mut a: SquareMatrix<T>) -> Option<Lu<T>> {
    let n = a.n;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == T::zero() {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            swaps += 1;
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let factor = a[(i, k)] / pivot;
            a[(i, k)] = factor;
            for j in k + 1..n {
                let v = a[(k, j)];
                a[(i, j)] = a[(i, j)] - factor * v;
            }
        }
    }
    Some(Lu { a, perm, swaps })
}

impl<T: Scalar> Lu<T> {
    fn determinant(&self) -> T {
        let d = (0..self.a.n).fold(T::one(), |d, i| d * self.a[(i, i)]);
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    fn min_pivot(&self) -> T {
        (0..self.a.n).fold(T::infinity(), |m, i| m.min(self.a[(i, i)].abs()))
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.a.n;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] = y[i] - self.a[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] = y[i] - self.a[(i, j)] * y[j];
            }
            y[i] = y[i] / self.a[(i, i)];
        }
        y
    }
}
