//! Small float helpers over `libm` so the crate stays `no_std`.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Expectation of `values` under the probability vector `row`.
#[inline]
pub(crate) fn dot(row: &[f64], values: &[f64]) -> f64 {
    row.iter().zip(values).map(|(p, v)| p * v).sum()
}

/// Variance of `values` under the probability vector `row` (divide-by-n form).
#[inline]
pub(crate) fn variance(row: &[f64], values: &[f64]) -> f64 {
    let mean = dot(row, values);
    row.iter()
        .zip(values)
        .map(|(p, v)| {
            let d = v - mean;
            p * d * d
        })
        .sum()
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[inline]
pub(crate) fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
pub(crate) fn min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}
