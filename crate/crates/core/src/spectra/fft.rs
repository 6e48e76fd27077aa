//! Discrete Fourier transforms of arbitrary length: iterative radix-2 for
//! powers of two, Bluestein's chirp-z reduction otherwise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Forward DFT in place: `X[k] = Σ x[j]·exp(−2πi·jk/n)`.
pub fn fft(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, false);
    } else {
        bluestein(buf);
    }
}

/// Inverse DFT in place, including the 1/n factor.
pub fn ifft(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    buf.iter_mut().for_each(|v| *v = v.conj());
    fft(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v = v.conj() * scale);
}

fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|j| Complex64::from_polar(1.0, sign * 2.0 * PI * j as f64 / n as f64))
        .collect();
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..len / 2 {
                let t = buf[start + j + len / 2] * twiddles[j * stride];
                let u = buf[start + j];
                buf[start + j] = u + t;
                buf[start + j + len / 2] = u - t;
            }
        }
        len <<= 1;
    }
}

fn bluestein(buf: &mut [Complex64]) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    // exp(−iπk²/n); k² is reduced mod 2n to keep the angle small.
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            Complex64::from_polar(1.0, -PI * k2 / n as f64)
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = buf[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        buf[k] = chirp[k] * a[k] * scale;
    }
}

/// Row-major 2-D forward DFT of a `height × width` grid.
pub fn fft2(data: &mut [Complex64], width: usize, height: usize) {
    assert_eq!(data.len(), width * height, "fft2: grid size");
    for row in data.chunks_exact_mut(width) {
        fft(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = data[y * width + x];
        }
        fft(&mut col);
        for y in 0..height {
            data[y * width + x] = col[y];
        }
    }
}
