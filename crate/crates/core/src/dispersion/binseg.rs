use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::kernel::median_heuristic_gamma;
use super::series::shifted_mean;

/// Above this many distinct values the detector evaluates kernels pairwise.
const DISTINCT_PATH_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepDetectParams {
    /// Kernel bandwidth; 0 selects the median heuristic.
    pub gamma: f64,
    pub penalty_beta: f64,
    pub min_seg: usize,
    pub max_depth: usize,
    /// Ignore the first segment when picking the minimum mean.
    pub exclude_first_segment: bool,
}

impl Default for StepDetectParams {
    fn default() -> Self {
        StepDetectParams {
            gamma: 0.0,
            penalty_beta: 3.0,
            min_seg: 5,
            max_depth: 16,
            exclude_first_segment: false,
        }
    }
}

impl StepDetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::config("step.gamma", "must be non-negative"));
        }
        if !(self.penalty_beta > 0.0) {
            return Err(Error::config("step.penalty_beta", "must be positive"));
        }
        if self.min_seg < 2 {
            return Err(Error::config("step.min_seg", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<F> {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub mean: F,
}

impl<F> Segment<F> {
    pub fn count(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation<F> {
    /// Sorted interior split indices.
    pub breakpoints: Vec<usize>,
    pub segments: Vec<Segment<F>>,
}

impl<F: Scalar> Segmentation<F> {
    /// Builds segments over `values` from sorted interior breakpoints.
    pub fn from_breakpoints(values: &[F], breakpoints: Vec<usize>) -> Self {
        let mut bounds = Vec::with_capacity(breakpoints.len() + 2);
        bounds.push(0);
        bounds.extend(breakpoints.iter().copied());
        bounds.push(values.len());
        let segments = bounds
            .windows(2)
            .map(|w| {
                Segment { start: w[0], end: w[1], mean: shifted_mean(&values[w[0]..w[1]]) }
            })
            .collect();
        Segmentation { breakpoints, segments }
    }
}

/// Pairwise-kernel prefix sums for one node `[a, b)`:
/// `fwd[t] = Σ_{a≤i<t} k(y_i, y_t)` and `bwd[t] = Σ_{t<j<b} k(y_t, y_j)`.
trait KernelSums {
    fn sums(&self, a: usize, b: usize, gamma: f64) -> (Vec<f64>, Vec<f64>);
}

struct Dense<'a> {
    y: &'a [f64],
}

impl KernelSums for Dense<'_> {
    fn sums(&self, a: usize, b: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
        let l = b - a;
        let y = &self.y[a..b];
        let mut fwd = vec![0.0; l];
        let mut bwd = vec![0.0; l];
        for j in 1..l {
            let yj = y[j];
            let mut acc = 0.0;
            for (i, &yi) in y[..j].iter().enumerate() {
                let d = yi - yj;
                let k = (-gamma * d * d).exp();
                acc += k;
                bwd[i] += k;
            }
            fwd[j] = acc;
        }
        (fwd, bwd)
    }
}

/// Few distinct values: kernels come from an `m × m` table and running
/// per-value counts, so a node costs `O(ℓ·m)`.
struct Coded {
    codes: Vec<usize>,
    distinct: Vec<f64>,
}

impl Coded {
    fn build(y: &[f64]) -> Option<Self> {
        let mut distinct: Vec<f64> = Vec::new();
        for &v in y {
            if !distinct.contains(&v) {
                if distinct.len() == DISTINCT_PATH_MAX {
                    return None;
                }
                distinct.push(v);
            }
        }
        let codes = y
            .iter()
            .map(|v| distinct.iter().position(|d| d == v).expect("value was collected"))
            .collect();
        Some(Coded { codes, distinct })
    }
}

impl KernelSums for Coded {
    fn sums(&self, a: usize, b: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.distinct.len();
        let mut table = vec![0.0; m * m];
        for (p, &u) in self.distinct.iter().enumerate() {
            for (q, &w) in self.distinct.iter().enumerate() {
                table[p * m + q] = (-gamma * (u - w) * (u - w)).exp();
            }
        }
        let l = b - a;
        let codes = &self.codes[a..b];
        let mut fwd = vec![0.0; l];
        let mut bwd = vec![0.0; l];
        let mut counts = vec![0.0f64; m];
        for (t, &c) in codes.iter().enumerate() {
            let row = &table[c * m..(c + 1) * m];
            fwd[t] = counts.iter().zip(row).map(|(n, k)| n * k).sum();
            counts[c] += 1.0;
        }
        counts.iter_mut().for_each(|n| *n = 0.0);
        for (t, &c) in codes.iter().enumerate().rev() {
            let row = &table[c * m..(c + 1) * m];
            bwd[t] = counts.iter().zip(row).map(|(n, k)| n * k).sum();
            counts[c] += 1.0;
        }
        (fwd, bwd)
    }
}

/// Best split of `[a, b)`: returns `(t, gain)` maximizing
/// `cost(a,b) − cost(a,t) − cost(t,b)` with both sides at least `min_seg`.
fn best_split(kern: &dyn KernelSums, a: usize, b: usize, min_seg: usize, gamma: f64) -> Option<(usize, f64)> {
    let l = b - a;
    if l < 2 * min_seg {
        return None;
    }
    let (fwd, bwd) = kern.sums(a, b, gamma);
    // left[r] = S(a, a+r), right[r] = S(a+r, b)
    let mut left = vec![0.0; l + 1];
    for r in 0..l {
        left[r + 1] = left[r] + 2.0 * fwd[r] + 1.0;
    }
    let mut right = vec![0.0; l + 1];
    for r in (0..l).rev() {
        right[r] = right[r + 1] + 2.0 * bwd[r] + 1.0;
    }
    let total = left[l] / l as f64;
    let mut best: Option<(usize, f64)> = None;
    for r in min_seg..=l - min_seg {
        // Segment lengths cancel: gain = S_left/r + S_right/(l−r) − S/l.
        let gain = left[r] / r as f64 + right[r] / (l - r) as f64 - total;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((a + r, gain));
        }
    }
    best
}

/// Greedy binary segmentation under the Gaussian-kernel cost. A split is
/// kept when its gain exceeds `penalty_beta · ln n`. With `gamma` 0 the
/// bandwidth comes from the median heuristic on each segment being split,
/// so a small step next to large ones is judged at its own scale.
/// Deterministic: ties go to the leftmost index.
pub fn binseg_detect<F: Scalar>(values: &[F], params: &StepDetectParams) -> Result<Segmentation<F>> {
    params.validate()?;
    if values.is_empty() {
        return Err(Error::EmptySeries("nothing to segment".into()));
    }
    let n = values.len();
    let gamma_of = |a: usize, b: usize| {
        if params.gamma > 0.0 {
            params.gamma
        } else {
            median_heuristic_gamma(&values[a..b]).to_f64_lossy()
        }
    };
    let y: Vec<f64> = values.iter().map(|v| v.to_f64_lossy()).collect();
    let coded = Coded::build(&y);
    let dense = Dense { y: &y };
    let kern: &dyn KernelSums = match &coded {
        Some(c) => c,
        None => &dense,
    };
    let threshold = params.penalty_beta * (n as f64).ln();

    let mut breakpoints = Vec::new();
    let mut stack = vec![(0usize, n, 0usize)];
    while let Some((a, b, depth)) = stack.pop() {
        if depth >= params.max_depth {
            continue;
        }
        if b - a < 2 * params.min_seg {
            continue;
        }
        if let Some((t, gain)) = best_split(kern, a, b, params.min_seg, gamma_of(a, b)) {
            if gain > threshold {
                breakpoints.push(t);
                stack.push((t, b, depth + 1));
                stack.push((a, t, depth + 1));
            }
        }
    }
    breakpoints.sort_unstable();
    Ok(Segmentation::from_breakpoints(values, breakpoints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::kernel_cost;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy_steps(levels: &[(f64, usize)], sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        levels
            .iter()
            .flat_map(|&(m, n)| std::iter::repeat_n(m, n))
            .map(|m| m + noise.sample(&mut rng))
            .collect()
    }

    /// Split minimizing the summed within-segment squared error.
    fn ls_single_split(y: &[f64], min_seg: usize) -> usize {
        let sse = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        (min_seg..=y.len() - min_seg)
            .min_by(|&a, &b| (sse(&y[..a]) + sse(&y[a..])).total_cmp(&(sse(&y[..b]) + sse(&y[b..]))))
            .unwrap()
    }

    #[test]
    fn constant_series_has_no_breakpoints() {
        let s = binseg_detect(&[5_000.0f64; 400], &StepDetectParams::default()).unwrap();
        assert!(s.breakpoints.is_empty());
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].mean, 5_000.0);
    }

    #[test]
    fn one_step() {
        let y = noisy_steps(&[(10_000.0, 100), (5_000.0, 100)], 100.0, 4);
        let s = binseg_detect(&y, &StepDetectParams::default()).unwrap();
        assert_eq!(s.breakpoints.len(), 1);
        let oracle = ls_single_split(&y, 5);
        assert!(s.breakpoints[0].abs_diff(oracle) <= 2);
        assert!(s.breakpoints[0].abs_diff(100) <= 2);
    }

    #[test]
    fn three_levels() {
        let y = noisy_steps(&[(10_000.0, 80), (7_000.0, 80), (5_000.0, 80)], 100.0, 9);
        let s = binseg_detect(&y, &StepDetectParams::default()).unwrap();
        assert_eq!(s.breakpoints.len(), 2, "{:?}", s.breakpoints);
        assert!(s.breakpoints[0].abs_diff(80) <= 2);
        assert!(s.breakpoints[1].abs_diff(160) <= 2);
    }

    #[test]
    fn small_step_beside_large_ones() {
        let y = noisy_steps(&[(4_000.0, 40), (19_500.0, 140), (13_900.0, 40), (10_400.0, 40)], 150.0, 5);
        let s = binseg_detect(&y, &StepDetectParams::default()).unwrap();
        assert_eq!(s.breakpoints.len(), 3, "{:?}", s.breakpoints);
    }

    #[test]
    fn short_series_is_one_segment() {
        let s = binseg_detect(&[1.0f64, 9.0, 1.0, 9.0, 1.0, 9.0, 1.0, 9.0, 1.0], &StepDetectParams::default())
            .unwrap();
        assert!(s.breakpoints.is_empty());
    }

    #[test]
    fn coded_and_dense_agree() {
        let y: Vec<f64> = (0..300).map(|i| if i < 120 { 10.0 } else if i < 190 { 7.0 } else { 5.0 }).collect();
        let gamma = median_heuristic_gamma(&y);
        let coded = Coded::build(&y).unwrap();
        let dense = Dense { y: &y };
        for (a, b) in [(0, 300), (17, 251), (120, 300)] {
            let (f1, b1) = coded.sums(a, b, gamma);
            let (f2, b2) = dense.sums(a, b, gamma);
            for t in 0..b - a {
                assert!((f1[t] - f2[t]).abs() < 1e-9 && (b1[t] - b2[t]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn incremental_gain_matches_direct_costs() {
        let y = noisy_steps(&[(3.0, 20), (1.0, 25)], 0.4, 2);
        let gamma = 0.7;
        let dense = Dense { y: &y };
        let (t, gain) = best_split(&dense, 0, y.len(), 5, gamma).unwrap();
        let direct = kernel_cost(&y, gamma) - kernel_cost(&y[..t], gamma) - kernel_cost(&y[t..], gamma);
        assert!((gain - direct).abs() < 1e-9, "{gain} vs {direct}");
        for r in 5..=y.len() - 5 {
            let g = kernel_cost(&y, gamma) - kernel_cost(&y[..r], gamma) - kernel_cost(&y[r..], gamma);
            assert!(g <= gain + 1e-9);
        }
    }

    #[test]
    fn f32_matches_f64() {
        let y = noisy_steps(&[(10_000.0, 100), (5_000.0, 100)], 100.0, 4);
        let y32: Vec<f32> = y.iter().map(|v| *v as f32).collect();
        let a = binseg_detect(&y, &StepDetectParams::default()).unwrap();
        let b = binseg_detect(&y32, &StepDetectParams::default()).unwrap();
        assert_eq!(a.breakpoints, b.breakpoints);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn segments_partition(y in prop::collection::vec(0.0f64..1e5, 1..200), min_seg in 2usize..12) {
            let p = StepDetectParams { min_seg, ..StepDetectParams::default() };
            let s = binseg_detect(&y, &p).unwrap();
            prop_assert_eq!(s.segments.first().unwrap().start, 0);
            prop_assert_eq!(s.segments.last().unwrap().end, y.len());
            for w in s.segments.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            if !s.breakpoints.is_empty() {
                prop_assert!(s.segments.iter().all(|g| g.count() >= min_seg));
            }
            prop_assert!(s.breakpoints.iter().all(|&b| b > 0 && b < y.len()));
        }

        #[test]
        fn breakpoints_scale_free(seed in 0u64..1_000, alpha in 0.01f64..100.0) {
            let y = noisy_steps(&[(10.0, 60), (6.0, 40), (8.0, 50)], 0.5, seed);
            let z: Vec<f64> = y.iter().map(|v| v * alpha).collect();
            let p = StepDetectParams::default();
            prop_assert_eq!(binseg_detect(&y, &p).unwrap().breakpoints, binseg_detect(&z, &p).unwrap().breakpoints);
        }
    }
}
