//! Circular 1D convolution and its Toeplitz (circulant) matrix form.
//!
//! The kernel is centered with offset `(P - 1) / 2`, so a length-5 kernel
//! behaves like a zero-stride convolution with padding 2 and the output keeps
//! the input length. Even lengths use `P / 2 - 1`, which is the same integer.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Centering offset for a kernel of `taps` coefficients.
#[inline]
pub fn kernel_offset(taps: usize) -> usize {
    taps.saturating_sub(1) / 2
}

#[inline]
fn wrapped(i: usize, j: usize, off: usize, len: usize) -> usize {
    // (i - j + off) mod len, with i, off < len and j < len
    (i + off + len - j) % len
}

fn check_lengths(len: usize, taps: usize) -> Result<()> {
    if taps == 0 {
        return Err(Error::dim("filter must have at least one tap"));
    }
    if taps > len {
        return Err(Error::dim(format!(
            "filter of {taps} taps is longer than signal of length {len}"
        )));
    }
    Ok(())
}

/// `out[i] = Σ_j filter[j] · signal[(i - j + off) mod L]`.
pub fn circular_conv1d(signal: &[f64], filter: &[f64]) -> Result<Vec<f64>> {
    let len = signal.len();
    check_lengths(len, filter.len())?;
    let off = kernel_offset(filter.len());
    Ok((0..len)
        .map(|i| {
            filter
                .iter()
                .enumerate()
                .map(|(j, &f)| f * signal[wrapped(i, j, off, len)])
                .sum()
        })
        .collect())
}

/// `L × P` matrix `S` such that `S · t == circular_conv1d(signal, t)`.
/// Column `j` is `signal` cyclically shifted down by `j - off`.
pub fn toeplitz_from_signal(signal: &[f64], taps: usize) -> Result<Matrix> {
    let len = signal.len();
    check_lengths(len, taps)?;
    let off = kernel_offset(taps);
    Ok(Matrix::from_fn(len, taps, |i, j| signal[wrapped(i, j, off, len)]))
}
