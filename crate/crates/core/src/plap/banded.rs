/// Symmetric positive definite matrix in lower band storage, factored in
/// place by Cholesky. Fill stays inside the band, so cost is `O(n b²)`.
#[derive(Clone, Debug)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i at offsets 0 ..= bw
    data: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct NotPositiveDefinite;

impl BandedSpd {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Adds to entry `(i, j)` with `j <= i`.
    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[cfg(test)]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub(crate) fn diagonal_max(&self) -> f64 {
        (0..self.n).map(|i| self.data[self.slot(i, i)].abs()).fold(0.0, f64::max)
    }

    pub(crate) fn shift_diagonal(&mut self, mu: f64) {
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.data[s] += mu;
        }
    }

    /// Cholesky factorization `A = L Lᵀ`, overwriting the band with `L`.
    pub(crate) fn factor(mut self) -> Result<Self, NotPositiveDefinite> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[self.slot(i, j)];
                for k in k0..j {
                    s -= self.data[self.slot(i, k)] * self.data[self.slot(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(NotPositiveDefinite);
                    }
                    let d = self.slot(i, i);
                    self.data[d] = s.sqrt();
                } else {
                    let d = self.data[self.slot(j, j)];
                    let o = self.slot(i, j);
                    self.data[o] = s / d;
                }
            }
        }
        Ok(self)
    }

    /// Solves with a factor produced by [`BandedSpd::factor`].
    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = rhs[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[self.slot(i, k)] * rhs[k];
            }
            rhs[i] = s / self.data[self.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.data[self.slot(k, i)] * rhs[k];
            }
            rhs[i] = s / self.data[self.slot(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pentadiagonal_system() {
        let n = 9;
        let mut a = BandedSpd::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i >= 1 {
                a.add(i, i - 1, -1.5);
            }
            if i >= 2 {
                a.add(i, i - 2, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a.get(i, j) * x[j];
            }
        }
        let f = a.factor().unwrap();
        f.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        assert!(a.factor().is_err());
    }
}
