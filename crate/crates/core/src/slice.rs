//! Univariate slice sampling with stepping out and shrinkage (Neal, 2003).

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::Rng;

/// One slice-sampling update of `x0` for the unnormalized log density
/// `log_density`. `width` is the initial bracket width and `max_steps` caps
/// the stepping-out expansion.
pub fn slice_step<F, R>(x0: f64, mut log_density: F, width: f64, max_steps: usize, rng: &mut R) -> f64
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let f0 = log_density(x0);
    debug_assert!(f0.is_finite(), "slice sampler started outside the support");
    // exponential draw: log(u) with u ~ U(0, 1]
    let level = f0 + (1.0 - rng.random::<f64>()).ln();

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let j = (max_steps as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = max_steps.saturating_sub(1).saturating_sub(j);
    let mut j = j;
    while j > 0 && log_density(left) > level {
        left -= width;
        j -= 1;
    }
    while k > 0 && log_density(right) > level {
        right += width;
        k -= 1;
    }

    loop {
        let x1 = left + rng.random::<f64>() * (right - left);
        if log_density(x1) > level {
            return x1;
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left < 1e-300 {
            return x0;
        }
    }
}
