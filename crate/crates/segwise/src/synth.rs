//! Seeded synthetic data generators for the experiment harness.

use crate::ar::{default_burn_in, simulate_into, ArFilter};
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Piecewise i.i.d. Gaussian spec: one mean vector per segment, boundaries
/// at fixed fractions of the series length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSpec {
    /// Strictly increasing change-point fractions in (0, 1).
    pub fractions: Vec<f64>,
    /// One mean per segment; all of equal dimension.
    pub means: Vec<Vec<f64>>,
    pub noise_sd: f64,
}

/// Segment-wise AR spec: one filter per segment, shared noise level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArSpec {
    pub fractions: Vec<f64>,
    pub filters: Vec<ArFilter>,
    pub noise_sd: f64,
}

/// Converts fractions to integer boundaries `floor(f * n)`.
pub fn fraction_change_points(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    let mut cps = Vec::with_capacity(fractions.len());
    let mut prev = 0usize;
    for &f in fractions {
        if !(0.0..1.0).contains(&f) || f <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "change-point fraction {f} must lie strictly inside (0, 1)"
            )));
        }
        let cp = (f * n as f64).floor() as usize;
        if cp <= prev || cp >= n {
            return Err(Error::InvalidConfig(format!(
                "fraction {f} maps to boundary {cp}, which is degenerate at length {n}"
            )));
        }
        cps.push(cp);
        prev = cp;
    }
    Ok(cps)
}

/// Independent Gaussian observations with segment-wise means.
pub fn gen_iid_means<R: Rng + ?Sized>(
    n: usize,
    spec: &MeanSpec,
    rng: &mut R,
) -> Result<(TimeSeries, Vec<usize>)> {
    if spec.means.len() != spec.fractions.len() + 1 {
        return Err(Error::InvalidConfig(format!(
            "{} fractions need {} means, got {}",
            spec.fractions.len(),
            spec.fractions.len() + 1,
            spec.means.len()
        )));
    }
    let d = spec.means.first().map_or(0, Vec::len);
    if d == 0 || spec.means.iter().any(|m| m.len() != d) {
        return Err(Error::InvalidConfig("segment means must share a nonzero dimension".into()));
    }
    if !spec.noise_sd.is_finite() || spec.noise_sd < 0.0 {
        return Err(Error::InvalidConfig("noise standard deviation must be >= 0".into()));
    }
    let cps = fraction_change_points(n, &spec.fractions)?;
    let mut values = Vec::with_capacity(n * d);
    let mut seg = 0usize;
    for i in 0..n {
        if seg < cps.len() && i >= cps[seg] {
            seg += 1;
        }
        for c in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            values.push(spec.means[seg][c] + spec.noise_sd * e);
        }
    }
    Ok((TimeSeries::new(values, d)?, cps))
}

/// Concatenated AR segments sharing one recursion: each segment continues
/// from the previous segment's trailing values, so lags stay continuous
/// across boundaries. Only the first segment is warmed up.
pub fn gen_segmentwise_ar<R: Rng + ?Sized>(
    n: usize,
    spec: &ArSpec,
    rng: &mut R,
) -> Result<(TimeSeries, Vec<usize>)> {
    if spec.filters.len() != spec.fractions.len() + 1 {
        return Err(Error::InvalidConfig(format!(
            "{} fractions need {} filters, got {}",
            spec.fractions.len(),
            spec.fractions.len() + 1,
            spec.filters.len()
        )));
    }
    let order = spec.filters[0].order();
    if spec.filters.iter().any(|f| f.order() != order) {
        return Err(Error::InvalidConfig("all segment filters must share one order".into()));
    }
    if !spec.noise_sd.is_finite() || spec.noise_sd < 0.0 {
        return Err(Error::InvalidConfig("noise standard deviation must be >= 0".into()));
    }
    let cps = fraction_change_points(n, &spec.fractions)?;

    let mut history = vec![0.0; order];
    let mut warm = vec![0.0; default_burn_in(order)];
    simulate_into(&spec.filters[0], spec.noise_sd, &mut warm, &mut history, rng);

    let mut values = vec![0.0; n];
    let mut start = 0usize;
    for (seg, filter) in spec.filters.iter().enumerate() {
        let end = if seg < cps.len() { cps[seg] } else { n };
        simulate_into(filter, spec.noise_sd, &mut values[start..end], &mut history, rng);
        start = end;
    }
    Ok((TimeSeries::univariate(values)?, cps))
}

/// Derives a per-task seed from a master seed and a stream index
/// (SplitMix64 finalizer), so reps get independent reproducible generators.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::simulate_ar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fractions_map_to_expected_boundaries() {
        assert_eq!(fraction_change_points(100, &[0.2, 0.8]).unwrap(), vec![20, 80]);
        assert_eq!(fraction_change_points(1000, &[0.1, 0.3]).unwrap(), vec![100, 300]);
        assert!(fraction_change_points(100, &[0.8, 0.2]).is_err());
        assert!(fraction_change_points(100, &[0.0]).is_err());
        assert!(fraction_change_points(3, &[0.1]).is_err());
    }

    #[test]
    fn iid_means_zero_noise_is_piecewise_constant() {
        let spec = MeanSpec {
            fractions: vec![0.5],
            means: vec![vec![-1.0, 2.0], vec![3.0, 0.5]],
            noise_sd: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (series, cps) = gen_iid_means(10, &spec, &mut rng).unwrap();
        assert_eq!(cps, vec![5]);
        assert_eq!(series.dim(), 2);
        for i in 0..5 {
            assert_eq!(series.row(i), &[-1.0, 2.0]);
        }
        for i in 5..10 {
            assert_eq!(series.row(i), &[3.0, 0.5]);
        }
    }

    #[test]
    fn iid_means_deterministic_per_seed() {
        let spec = MeanSpec {
            fractions: vec![0.2, 0.8],
            means: vec![vec![-1.0], vec![0.0], vec![1.0]],
            noise_sd: 1.0,
        };
        let a = gen_iid_means(50, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_iid_means(50, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_segment_matches_plain_simulation() {
        let filter = ArFilter::from_lags(&[0.7, -0.1]).unwrap();
        let spec = ArSpec { fractions: vec![], filters: vec![filter.clone()], noise_sd: 1.0 };
        let (series, cps) = gen_segmentwise_ar(200, &spec, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(cps.is_empty());
        let direct =
            simulate_ar(&filter, 1.0, 200, default_burn_in(2), &mut ChaCha8Rng::seed_from_u64(4))
                .unwrap();
        assert_eq!(series, direct);
    }

    #[test]
    fn segments_share_lag_history_across_boundaries() {
        // With zero noise and a contractive filter the recursion is fully
        // determined by carried-over lags; a fresh burn-in would reset it.
        let f1 = ArFilter::new(vec![1.0, 0.5], 0.0).unwrap();
        let f2 = ArFilter::new(vec![0.0, 0.5], 0.0).unwrap();
        let spec = ArSpec { fractions: vec![0.5], filters: vec![f1, f2], noise_sd: 0.0 };
        let (series, cps) = gen_segmentwise_ar(10, &spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(cps, vec![5]);
        let v = series.values();
        // First segment settles at the fixed point 2; the second decays
        // geometrically from it instead of restarting at zero.
        assert!((v[4] - 2.0).abs() < 1e-9);
        assert!((v[5] - 1.0).abs() < 1e-9);
        assert!((v[6] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn derive_seed_spreads_streams() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }
}
