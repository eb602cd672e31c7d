//! Central finite-difference gradient verification.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Error measure used throughout: `|analytic - numeric| / max(1, |analytic|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference<F>(f: &mut F, params: &mut [f64], coord: usize, h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let orig = params[coord];
    params[coord] = orig + h;
    let plus = f(params);
    params[coord] = orig - h;
    let minus = f(params);
    params[coord] = orig;
    (plus - minus) / (2.0 * h)
}

/// Compares `analytic` against central differences of the scalar function
/// `f` at `params`, over `coords` (every coordinate when `None`). Returns
/// the largest [`relative_error`].
pub fn finite_difference_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    coords: Option<&[usize]>,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut x = params.to_vec();
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    coords
        .iter()
        .map(|&i| relative_error(analytic[i], central_difference(&mut f, &mut x, i, h)))
        .fold(0.0, f64::max)
}

/// Up to `count` distinct coordinates out of `len`, sorted, reproducible for
/// a given seed.
pub fn sample_coords(len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, len, count.min(len)).into_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivative() {
        let err = finite_difference_check(|x| x[0] * x[0], &[3.0], &[6.0], 1e-5, None);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let err = finite_difference_check(|x| x[0] * x[0], &[3.0], &[7.0], 1e-5, None);
        assert!(err > 0.1);
    }

    #[test]
    fn sampled_coords_are_distinct_and_bounded() {
        let c = sample_coords(100, 20, 5);
        assert_eq!(c.len(), 20);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.iter().all(|&i| i < 100));
        assert_eq!(sample_coords(3, 10, 5), [0, 1, 2]);
    }
}
