use crate::nn::Params;
use crate::scalar::Scalar;

/// Denominator floor for the relative error, so that coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Relative discrepancy `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error<T: Scalar>(analytic: T, numeric: T) -> T {
    let denom = analytic
        .abs()
        .max(numeric.abs())
        .max(T::lit(RELATIVE_FLOOR));
    (analytic - numeric).abs() / denom
}

/// Compares `grads` against central differences of `loss` around `params`.
///
/// `probes` lists `(tensor, index)` coordinates to test; `None` tests every
/// coordinate. Returns the worst relative error. `loss` must be deterministic
/// (fixed dropout masks).
pub fn finite_difference_check<T, P, G, F>(
    params: &P,
    grads: &G,
    mut loss: F,
    probes: Option<&[(usize, usize)]>,
    h: T,
) -> T
where
    T: Scalar,
    P: Params<T> + Clone,
    G: Params<T>,
    F: FnMut(&P) -> T,
{
    let analytic: Vec<Vec<T>> = grads
        .tensors()
        .into_iter()
        .map(|(_, t)| t.to_vec())
        .collect();
    let coords: Vec<(usize, usize)> = match probes {
        Some(p) => p.to_vec(),
        None => analytic
            .iter()
            .enumerate()
            .flat_map(|(t, v)| (0..v.len()).map(move |i| (t, i)))
            .collect(),
    };
    let mut probe = params.clone();
    let mut worst = T::zero();
    let two_h = h + h;
    for (t, i) in coords {
        let orig = probe.tensors_mut()[t][i];
        probe.tensors_mut()[t][i] = orig + h;
        let up = loss(&probe);
        probe.tensors_mut()[t][i] = orig - h;
        let down = loss(&probe);
        probe.tensors_mut()[t][i] = orig;
        let numeric = (up - down) / two_h;
        let err = relative_error(analytic[t][i], numeric);
        if err > worst || err.is_nan() {
            worst = err;
        }
    }
    worst
}
