//! Time-series container, prefix statistics and quadratic segment losses.
//!
//! All segment queries use 0-based half-open index pairs `(a, b]` mapped to
//! `[a, b)` over rows, so a boundary value coincides numerically with the
//! 1-based "last index of the left segment" convention used in reports.

use crate::error::{Error, Result};

/// An `n x d` series of finite reals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl TimeSeries {
    /// Builds a series from a row-major buffer, rejecting non-finite entries.
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch { len: values.len(), dim });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i / dim, col: i % dim });
            }
        }
        let n = values.len() / dim;
        Ok(Self { values, n, d: dim })
    }

    /// Builds a one-dimensional series.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch { len: rows.len(), dim: d });
        }
        Self::new(rows.concat(), d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The raw buffer of a one-dimensional series.
    pub fn as_univariate(&self) -> Result<&[f64]> {
        if self.d != 1 {
            return Err(Error::InvalidConfig(format!(
                "expected a one-dimensional series, got dimension {}",
                self.d
            )));
        }
        Ok(&self.values)
    }

    /// Per-dimension sample variance (denominator `n - 1`), averaged over
    /// dimensions. Used to rescale penalty terms; zero for constant data.
    pub fn mean_dim_variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut acc = 0.0;
        for c in 0..self.d {
            let mean = (0..self.n).map(|r| self.values[r * self.d + c]).sum::<f64>() / self.n as f64;
            let ss: f64 = (0..self.n)
                .map(|r| {
                    let z = self.values[r * self.d + c] - mean;
                    z * z
                })
                .sum();
            acc += ss / (self.n - 1) as f64;
        }
        acc / self.d as f64
    }
}

/// Prefix sums and squared-norm sums enabling O(1) segment loss queries.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    n: usize,
    d: usize,
    /// `(n + 1) x d`, `cumsum[k] = sum of the first k rows`.
    cumsum: Vec<f64>,
    /// `cumsq[k] = sum of |row|^2 over the first k rows`.
    cumsq: Vec<f64>,
}

impl SeriesStats {
    pub fn new(series: &TimeSeries) -> Self {
        let (n, d) = (series.len(), series.dim());
        let mut cumsum = vec![0.0; (n + 1) * d];
        let mut cumsq = vec![0.0; n + 1];
        for i in 0..n {
            let row = series.row(i);
            let mut sq = 0.0;
            for c in 0..d {
                cumsum[(i + 1) * d + c] = cumsum[i * d + c] + row[c];
                sq += row[c] * row[c];
            }
            cumsq[i + 1] = cumsq[i] + sq;
        }
        Self { n, d, cumsum, cumsq }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cumsum(&self) -> &[f64] {
        &self.cumsum
    }

    pub fn cumsq(&self) -> &[f64] {
        &self.cumsq
    }

    fn check_range(&self, a: usize, b: usize) -> Result<()> {
        if a >= b || b > self.n {
            return Err(Error::InvalidRange { a, b, n: self.n });
        }
        Ok(())
    }

    /// Within-segment quadratic loss of rows `(a, b]`: the sum of squared
    /// deviations from the segment sample mean.
    pub fn quad_loss(&self, a: usize, b: usize) -> Result<f64> {
        self.check_range(a, b)?;
        Ok(self.loss_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn loss_unchecked(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a < b && b <= self.n);
        let len = (b - a) as f64;
        let mut norm2 = 0.0;
        for c in 0..self.d {
            let s = self.cumsum[b * self.d + c] - self.cumsum[a * self.d + c];
            norm2 += s * s;
        }
        let q = (self.cumsq[b] - self.cumsq[a]) - norm2 / len;
        if q < 0.0 {
            // Cancellation can push the value slightly negative; anything
            // beyond rounding scale would be a real bug.
            debug_assert!(
                q > -1e-9 * (self.cumsq[b] + 1.0),
                "quadratic loss {q} below rounding tolerance"
            );
            return 0.0;
        }
        q
    }

    /// Exact reduction in quadratic loss from splitting `(a, b]` at `m`,
    /// computed in closed form from segment sums. Always non-negative and
    /// satisfies `quad_loss(a, b) = quad_loss(a, m) + quad_loss(m, b) + gain`
    /// up to rounding.
    pub fn split_gain(&self, a: usize, m: usize, b: usize) -> Result<f64> {
        if a >= m || m >= b {
            return Err(Error::InvalidSplit { a, m, b });
        }
        self.check_range(a, b)?;
        Ok(self.split_gain_unchecked(a, m, b))
    }

    #[inline]
    pub(crate) fn split_gain_unchecked(&self, a: usize, m: usize, b: usize) -> f64 {
        let n1 = (m - a) as f64;
        let n2 = (b - m) as f64;
        let n = n1 + n2;
        let w1 = (n2 / n).sqrt() / n1.sqrt();
        let w2 = (n1 / n).sqrt() / n2.sqrt();
        let mut g = 0.0;
        for c in 0..self.d {
            let s1 = self.cumsum[m * self.d + c] - self.cumsum[a * self.d + c];
            let s2 = self.cumsum[b * self.d + c] - self.cumsum[m * self.d + c];
            let z = w1 * s1 - w2 * s2;
            g += z * z;
        }
        g
    }

    /// Whether moving the boundary between segments `(a, m]` and `(m, b]`
    /// left by `t` strictly reduces the total quadratic loss.
    ///
    /// Ties count as no improvement, so local search driven by this test
    /// always terminates.
    pub fn shift_improves(&self, a: usize, m: usize, b: usize, t: usize) -> Result<bool> {
        if a >= m || m >= b {
            return Err(Error::InvalidSplit { a, m, b });
        }
        self.check_range(a, b)?;
        if t == 0 || t >= m - a {
            return Err(Error::InvalidShift { t, max: m - a });
        }
        Ok(self.move_improves(a, m, b, m - t))
    }

    /// Strict-improvement test for moving the boundary of `(a, m]`, `(m, b]`
    /// to `new_m` (either direction), using only segment means.
    #[inline]
    pub(crate) fn move_improves(&self, a: usize, m: usize, b: usize, new_m: usize) -> bool {
        debug_assert!(a < m && m < b && a < new_m && new_m < b && new_m != m);
        let n1 = (m - a) as f64;
        let n2 = (b - m) as f64;
        // The moved block is (new_m, m] for a left shift, (m, new_m] for a
        // right shift.
        let (lo, hi) = if new_m < m { (new_m, m) } else { (m, new_m) };
        let t = (hi - lo) as f64;
        let mut dl = 0.0;
        let mut dr = 0.0;
        for c in 0..self.d {
            let sl = (self.cumsum[m * self.d + c] - self.cumsum[a * self.d + c]) / n1;
            let sr = (self.cumsum[b * self.d + c] - self.cumsum[m * self.d + c]) / n2;
            let sm = (self.cumsum[hi * self.d + c] - self.cumsum[lo * self.d + c]) / t;
            dl += (sl - sm) * (sl - sm);
            dr += (sr - sm) * (sr - sm);
        }
        if new_m < m {
            n1 * dl / (n1 - t) > n2 * dr / (n2 + t)
        } else {
            n2 * dr / (n2 - t) > n1 * dl / (n1 + t)
        }
    }

    /// Sum of within-segment quadratic losses over a segmentation.
    pub fn total_loss(&self, seg: &Segmentation) -> Result<f64> {
        if seg.len() != self.n {
            return Err(Error::InvalidChangePoints(format!(
                "segmentation is for length {}, stats are for length {}",
                seg.len(),
                self.n
            )));
        }
        let mut total = 0.0;
        for (a, b) in seg.boundaries() {
            total += self.loss_unchecked(a, b);
        }
        Ok(total)
    }
}

/// Ordered interior change points partitioning `1..n`.
///
/// A change point `l` closes the segment ending at row `l` (1-based), i.e.
/// internal rows `[prev, l)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    n: usize,
    change_points: Vec<usize>,
}

impl Segmentation {
    pub fn new(n: usize, change_points: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySeries);
        }
        let mut prev = 0usize;
        for &cp in &change_points {
            if cp <= prev || cp >= n {
                return Err(Error::InvalidChangePoints(format!(
                    "change point {cp} not strictly inside (0, {n}) or out of order"
                )));
            }
            prev = cp;
        }
        Ok(Self { n, change_points })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn segment_count(&self) -> usize {
        self.change_points.len() + 1
    }

    /// Iterates half-open `(start, end]` row ranges of every segment.
    pub fn boundaries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        let starts = std::iter::once(0).chain(self.change_points.iter().copied());
        let ends = self.change_points.iter().copied().chain(std::iter::once(n));
        starts.zip(ends)
    }

    /// Length of the shortest segment.
    pub fn min_segment_len(&self) -> usize {
        self.boundaries().map(|(a, b)| b - a).min().unwrap_or(self.n)
    }
}

/// Minimum segment length for shortest segments as a function of `n`.
/// Grows like `ceil(log log n)`, never below 2.
pub fn default_min_segment_len(n: usize) -> usize {
    if n < 3 {
        return 2;
    }
    let ll = (n as f64).ln().ln();
    (ll.ceil() as usize).max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_series(n: usize, d: usize, rng: &mut ChaCha8Rng) -> TimeSeries {
        let values: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        TimeSeries::new(values, d).unwrap()
    }

    /// Two-pass direct loss on raw rows, independent of prefix stats.
    fn direct_loss(series: &TimeSeries, a: usize, b: usize) -> f64 {
        let d = series.dim();
        let len = (b - a) as f64;
        let mut mean = vec![0.0; d];
        for i in a..b {
            for (c, m) in mean.iter_mut().enumerate() {
                *m += series.row(i)[c];
            }
        }
        for m in &mut mean {
            *m /= len;
        }
        let mut q = 0.0;
        for i in a..b {
            for c in 0..d {
                let z = series.row(i)[c] - mean[c];
                q += z * z;
            }
        }
        q
    }

    #[test]
    fn rejects_non_finite_with_position() {
        let err = TimeSeries::new(vec![1.0, f64::NAN, 3.0, 4.0], 2).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 0, col: 1 });
    }

    #[test]
    fn prefix_stats_examples() {
        let s = TimeSeries::univariate(vec![1.0, 1.0, 1.0]).unwrap();
        let stats = SeriesStats::new(&s);
        assert_eq!(stats.cumsum(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(stats.cumsq(), &[0.0, 1.0, 2.0, 3.0]);

        let z = TimeSeries::univariate(vec![0.0, 0.0]).unwrap();
        let stats = SeriesStats::new(&z);
        assert_eq!(stats.cumsum(), &[0.0, 0.0, 0.0]);
        assert_eq!(stats.cumsq(), &[0.0, 0.0, 0.0]);

        let two = TimeSeries::new(vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let stats = SeriesStats::new(&two);
        assert_eq!(stats.cumsum(), &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(stats.cumsq(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn quad_loss_examples() {
        let c = TimeSeries::univariate(vec![2.5; 10]).unwrap();
        let stats = SeriesStats::new(&c);
        assert_eq!(stats.quad_loss(0, 10).unwrap(), 0.0);
        assert_eq!(stats.quad_loss(3, 7).unwrap(), 0.0);

        let pm = TimeSeries::univariate(vec![-1.0, 1.0]).unwrap();
        assert_eq!(SeriesStats::new(&pm).quad_loss(0, 2).unwrap(), 2.0);

        let step = TimeSeries::univariate(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(SeriesStats::new(&step).quad_loss(0, 4).unwrap(), 1.0);

        assert!(matches!(
            SeriesStats::new(&step).quad_loss(2, 2),
            Err(Error::InvalidRange { .. })
        ));
        // Single row has zero deviation.
        assert_eq!(SeriesStats::new(&step).quad_loss(1, 2).unwrap(), 0.0);
    }

    #[test]
    fn split_gain_examples() {
        // Identical half means: the gain vanishes.
        let s = TimeSeries::univariate(vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        let stats = SeriesStats::new(&s);
        assert!(stats.split_gain(0, 2, 4).unwrap().abs() < 1e-12);

        let step = TimeSeries::univariate(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let stats = SeriesStats::new(&step);
        assert!((stats.split_gain(0, 2, 4).unwrap() - 1.0).abs() < 1e-12);

        assert!(matches!(stats.split_gain(2, 2, 4), Err(Error::InvalidSplit { .. })));
    }

    #[test]
    fn split_gain_matches_three_loss_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = rng.random_range(1..=3);
            let n = rng.random_range(10..=200);
            let series = gaussian_series(n, d, &mut rng);
            let stats = SeriesStats::new(&series);
            for _ in 0..4 {
                let a = rng.random_range(0..n - 2);
                let b = rng.random_range(a + 2..=n);
                let m = rng.random_range(a + 1..b);
                let gain = stats.split_gain(a, m, b).unwrap();
                let oracle = direct_loss(&series, a, b)
                    - direct_loss(&series, a, m)
                    - direct_loss(&series, m, b);
                let scale = 1.0 + direct_loss(&series, a, b);
                assert!(
                    (gain - oracle).abs() <= 1e-9 * scale,
                    "gain {gain} vs oracle {oracle}"
                );
                assert!(gain >= 0.0);
            }
        }
    }

    #[test]
    fn shift_improves_examples() {
        // Moving the stray 5 into the right block reduces loss.
        let s = TimeSeries::univariate(vec![0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0]).unwrap();
        let stats = SeriesStats::new(&s);
        assert!(stats.shift_improves(0, 4, 7, 1).unwrap());

        // Homogeneous data: no strict improvement anywhere.
        let flat = TimeSeries::univariate(vec![1.0; 12]).unwrap();
        let stats = SeriesStats::new(&flat);
        for m in 2..11 {
            for t in 1..m.min(4) {
                if t < m {
                    assert!(!stats.shift_improves(0, m, 12, t).unwrap());
                }
            }
        }

        assert!(matches!(
            SeriesStats::new(&s).shift_improves(0, 2, 7, 2),
            Err(Error::InvalidShift { .. })
        ));
    }

    #[test]
    fn shift_improves_matches_loss_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let d = rng.random_range(1..=3);
            let n = rng.random_range(8..=120);
            let series = gaussian_series(n, d, &mut rng);
            let stats = SeriesStats::new(&series);
            let a = rng.random_range(0..n - 4);
            let b = rng.random_range(a + 4..=n);
            let m = rng.random_range(a + 2..b);
            let t = rng.random_range(1..m - a);
            let before = direct_loss(&series, a, m) + direct_loss(&series, m, b);
            let after = direct_loss(&series, a, m - t) + direct_loss(&series, m - t, b);
            let improves = stats.shift_improves(a, m, b, t).unwrap();
            assert_eq!(improves, after < before, "a={a} m={m} b={b} t={t}");
        }
    }

    #[test]
    fn total_loss_examples() {
        let s = TimeSeries::univariate(vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
        let stats = SeriesStats::new(&s);

        let whole = Segmentation::new(4, vec![]).unwrap();
        assert_eq!(stats.total_loss(&whole).unwrap(), stats.quad_loss(0, 4).unwrap());

        let singletons = Segmentation::new(4, vec![1, 2, 3]).unwrap();
        assert_eq!(stats.total_loss(&singletons).unwrap(), 0.0);

        let split = Segmentation::new(4, vec![2]).unwrap();
        assert_eq!(stats.total_loss(&split).unwrap(), 0.0);

        let off = Segmentation::new(4, vec![1]).unwrap();
        let expected = stats.quad_loss(1, 4).unwrap();
        assert!((stats.total_loss(&off).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_never_increases_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let n = rng.random_range(6..=80);
            let series = gaussian_series(n, 2, &mut rng);
            let stats = SeriesStats::new(&series);
            let cp = rng.random_range(1..n);
            let coarse = Segmentation::new(n, vec![]).unwrap();
            let fine = Segmentation::new(n, vec![cp]).unwrap();
            let l0 = stats.total_loss(&coarse).unwrap();
            let l1 = stats.total_loss(&fine).unwrap();
            assert!(l1 <= l0 + 1e-9 * (1.0 + l0));
        }
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 60;
        let d = 3;
        let base = gaussian_series(n, d, &mut rng);
        let offset = [13.5, -2.25, 7.0];
        let shifted_values: Vec<f64> = base
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v + offset[i % d])
            .collect();
        let shifted = TimeSeries::new(shifted_values, d).unwrap();
        let s0 = SeriesStats::new(&base);
        let s1 = SeriesStats::new(&shifted);
        for (a, b) in [(0, n), (5, 20), (17, 18), (30, 59)] {
            let q0 = s0.quad_loss(a, b).unwrap();
            let q1 = s1.quad_loss(a, b).unwrap();
            assert!((q0 - q1).abs() <= 1e-9 * (1.0 + q0));
        }
    }

    #[test]
    fn prefix_loss_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..30 {
            let n = rng.random_range(2..=150);
            let d = rng.random_range(1..=3);
            let series = gaussian_series(n, d, &mut rng);
            let stats = SeriesStats::new(&series);
            let a = rng.random_range(0..n);
            let b = rng.random_range(a + 1..=n);
            let q = stats.quad_loss(a, b).unwrap();
            let direct = direct_loss(&series, a, b);
            assert!((q - direct).abs() <= 1e-9 * (1.0 + direct));
        }
    }

    #[test]
    fn segmentation_validation() {
        assert!(Segmentation::new(5, vec![1, 3]).is_ok());
        assert!(Segmentation::new(5, vec![3, 1]).is_err());
        assert!(Segmentation::new(5, vec![0]).is_err());
        assert!(Segmentation::new(5, vec![5]).is_err());
        assert!(Segmentation::new(5, vec![2, 2]).is_err());
    }

    #[test]
    fn default_min_segment_len_rule() {
        assert_eq!(default_min_segment_len(2), 2);
        assert_eq!(default_min_segment_len(100), 2);
        assert_eq!(default_min_segment_len(1000), 2);
        // log log n crosses 2 just above e^(e^2) ~ 1619.
        assert_eq!(default_min_segment_len(1700), 3);
    }
}
