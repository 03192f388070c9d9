use crate::rng::mix64;
use crate::scalar::Scalar;

/// Pair budget for the bandwidth heuristic.
pub const GAMMA_MAX_PAIRS: usize = 10_000;
const GAMMA_PAIR_SEED: u64 = 0x0067_616d_6d61;

/// Gaussian-kernel segment cost: `ℓ − (1/ℓ) Σ_ij exp(−γ (y_i − y_j)²)`.
/// Quadratic; the step detector uses an incremental form of the same sum.
pub fn kernel_cost<F: Scalar>(slice: &[F], gamma: F) -> F {
    let l = slice.len();
    if l == 0 {
        return F::zero();
    }
    let mut s = 0.0f64;
    let g = gamma.to_f64_lossy();
    for &a in slice {
        let a = a.to_f64_lossy();
        for &b in slice {
            let d = a - b.to_f64_lossy();
            s += (-g * d * d).exp();
        }
    }
    F::of(l as f64 - s / l as f64)
}

/// Kernel bandwidth `1 / median (y_i − y_j)²`. Uses every pair when there
/// are few enough, otherwise a fixed pseudo-random sample of index pairs,
/// so the choice never depends on the values and rescales with them.
/// Falls back to `1 / variance` when the median is zero and to 1 for
/// constant data.
pub fn median_heuristic_gamma<F: Scalar>(values: &[F]) -> F {
    let n = values.len();
    if n < 2 {
        return F::one();
    }
    let y: Vec<f64> = values.iter().map(|v| v.to_f64_lossy()).collect();
    let total_pairs = n * (n - 1) / 2;
    let mut sq: Vec<f64> = Vec::with_capacity(total_pairs.min(GAMMA_MAX_PAIRS));
    if total_pairs <= GAMMA_MAX_PAIRS {
        for i in 0..n {
            for j in i + 1..n {
                sq.push((y[i] - y[j]).powi(2));
            }
        }
    } else {
        let mut state = GAMMA_PAIR_SEED;
        while sq.len() < GAMMA_MAX_PAIRS {
            state = mix64(state);
            let i = (state % n as u64) as usize;
            state = mix64(state);
            let j = (state % n as u64) as usize;
            if i != j {
                sq.push((y[i] - y[j]).powi(2));
            }
        }
    }
    sq.sort_by(f64::total_cmp);
    let m = sq.len();
    let med = if m % 2 == 1 { sq[m / 2] } else { 0.5 * (sq[m / 2 - 1] + sq[m / 2]) };
    if med > 0.0 {
        return F::of(1.0 / med);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var > 0.0 {
        F::of(1.0 / var)
    } else {
        F::one()
    }
}
