//! One-sided power spectrum of a real sequence.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

/// `|g_m|^2` for `m = 0..=M/2`, where `g_m = sum_i g_i exp(-2 pi i m / M)`.
///
/// Radix-2 FFT when `M` is a power of two, direct summation otherwise.
pub fn power_spectrum(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let half = m / 2;
    if m.is_power_of_two() {
        let mut re = values.to_vec();
        let mut im = vec![0.0; m];
        fft_in_place(&mut re, &mut im);
        (0..=half).map(|k| re[k] * re[k] + im[k] * im[k]).collect()
    } else {
        (0..=half)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in values.iter().enumerate() {
                    let t = -2.0 * PI * ((k * i) % m) as f64 / m as f64;
                    let (s, c) = math::sin_cos(t);
                    re += v * c;
                    im += v * s;
                }
                re * re + im * im
            })
            .collect()
    }
}

fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let half = len / 2;
        // twiddles computed directly per index to avoid recurrence drift
        let tw: Vec<(f64, f64)> = (0..half)
            .map(|k| {
                let (s, c) = math::sin_cos(ang * k as f64);
                (c, s)
            })
            .collect();
        for start in (0..n).step_by(len) {
            for (k, &(c, s)) in tw.iter().enumerate() {
                let a = start + k;
                let b = a + half;
                let tr = re[b] * c - im[b] * s;
                let ti = re[b] * s + im[b] * c;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn oracle(values: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        buf[..=values.len() / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    #[test]
    fn matches_rustfft_power_of_two_and_general() {
        for m in [16usize, 64, 1024, 18, 30] {
            let v: Vec<f64> = (0..m).map(|i| ((i * 7919) % 113) as f64 / 50.0 - 1.0).collect();
            let got = power_spectrum(&v);
            let want = oracle(&v);
            let scale = want.iter().cloned().fold(0.0, f64::max);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * scale, "m={m}: {g} vs {w}");
            }
        }
    }
}
