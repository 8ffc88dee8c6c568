//! Shared numerical helpers: grids, quadrature, interpolation, quantiles.

/// Uniform grid of `n` points from `a` to `b` with exact endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
    out[0] = a;
    out[n - 1] = b;
    out
}

/// Trapezoid integral of `y` over `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    acc
}

/// Cumulative trapezoid integral of `y` over `x`, anchored at zero.
pub fn cum_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for i in 1..x.len() {
        let prev = out[i - 1];
        out.push(prev + 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]));
    }
    out
}

/// Piecewise-linear interpolation of a non-decreasing table.
///
/// Queries are clamped to the table range, and the output on each segment is
/// clamped to the segment's endpoint values so that a monotone table yields a
/// monotone interpolant even under floating-point rounding.
pub struct MonotoneInterp<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
}

impl<'a> MonotoneInterp<'a> {
    pub fn new(xs: &'a [f64], ys: &'a [f64]) -> Self {
        debug_assert_eq!(xs.len(), ys.len());
        debug_assert!(xs.len() >= 2);
        Self { xs, ys }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // first index with xs[i] > x; the query lies in [xs[i-1], xs[i]]
        let i = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        if x1 == x0 {
            return y0;
        }
        let t = (x - x0) / (x1 - x0);
        let y = y0 + t * (y1 - y0);
        y.max(y0.min(y1)).min(y0.max(y1))
    }
}

/// Central finite differences with first-order one-sided stencils at the ends.
///
/// On a uniform grid the trapezoid integral of the result telescopes exactly
/// to `y[n-1] - y[0]`, which is what makes differentiated cdfs integrate to
/// one without any correction.
pub fn central_diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    debug_assert!(n >= 3);
    let mut out = Vec::with_capacity(n);
    out.push((y[1] - y[0]) / (x[1] - x[0]));
    for i in 1..n - 1 {
        out.push((y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]));
    }
    out.push((y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]));
    out
}

/// Type-7 sample quantile (linear interpolation of order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    if lo >= n - 1 {
        return sorted[n - 1];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Type-7 sample quantile of unsorted data (copies and sorts).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    quantile_sorted(&v, q)
}

/// Sample standard deviation (denominator n-1).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Pearson correlation between two equal-length slices.
///
/// Returns 0 when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}
