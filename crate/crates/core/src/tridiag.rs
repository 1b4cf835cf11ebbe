//! Symmetric tridiagonal helpers: Sturm bisection, pivoted LU solves.

#[derive(Debug, Clone)]
pub(crate) struct SymTridiag {
    pub d: Vec<f64>,
    pub o: Vec<f64>,
    o2: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, o: Vec<f64>) -> Self {
        debug_assert_eq!(o.len() + 1, d.len());
        let o2 = o.iter().map(|x| x * x).collect();
        SymTridiag { d, o, o2 }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            let rad = if k > 0 { self.o[k - 1].abs() } else { 0.0 } + if k + 1 < n { self.o[k].abs() } else { 0.0 };
            lo = lo.min(self.d[k] - rad);
            hi = hi.max(self.d[k] + rad);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below x.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.d[0] - x;
        for k in 0..self.len() {
            if k > 0 {
                q = self.d[k] - x - self.o2[k - 1] / q;
            }
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k-th (0-based) eigenvalue, bisected to full precision.
    pub fn eigenvalue(&self, k: usize, bounds: (f64, f64)) -> f64 {
        let (mut lo, mut hi) = bounds;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.d.iter().zip(x).map(|(d, x)| d * x).collect();
        for k in 0..n - 1 {
            y[k] += self.o[k] * x[k + 1];
            y[k + 1] += self.o[k] * x[k];
        }
        y
    }

    /// Solve (T + diag(extra) - shift) x = b by Gaussian elimination with partial pivoting.
    pub fn solve_shifted(&self, extra: Option<&[f64]>, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut d: Vec<f64> = match extra {
            Some(e) => self.d.iter().zip(e).map(|(d, e)| d + e - shift).collect(),
            None => self.d.iter().map(|d| d - shift).collect(),
        };
        let mut du = self.o.clone();
        let mut dl = self.o.clone();
        let mut x = b.to_vec();
        let tiny = f64::EPSILON * self.d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                x[i + 1] -= fact * x[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                } else {
                    dl[i] = 0.0;
                }
                du[i] = temp;
                let t = x[i];
                x[i] = x[i + 1];
                x[i + 1] = t - fact * x[i + 1];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        x[n - 1] /= d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - dl[i] * x[i + 2]) / d[i];
        }
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}
