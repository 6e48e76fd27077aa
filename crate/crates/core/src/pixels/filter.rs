use alloc::vec::Vec;

use super::image::Plane;

/// Normalized Gaussian taps over `[-r, r]` with `r = ceil(3σ)`.
/// A non-positive sigma yields the identity kernel.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return alloc::vec![1.0];
    }
    let radius = libm::ceil(3.0 * sigma) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur(plane: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma);
    if k.len() == 1 {
        return plane.clone();
    }
    let r = (k.len() / 2) as isize;
    let (w, h) = (plane.width, plane.height);
    let horizontal = Plane::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * plane.at_clamped(x as isize + i as isize - r, y as isize))
            .sum()
    });
    Plane::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * horizontal.at_clamped(x as isize, y as isize + i as isize - r))
            .sum()
    })
}

/// 3×3 median with edge replication.
pub fn median3(plane: &Plane) -> Plane {
    Plane::from_fn(plane.width, plane.height, |x, y| {
        let mut win = [0.0f64; 9];
        let mut n = 0;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                win[n] = plane.at_clamped(x as isize + dx, y as isize + dy);
                n += 1;
            }
        }
        win.sort_unstable_by(f64::total_cmp);
        win[4]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(n: usize) -> Plane {
        Plane::from_fn(n, n, |x, y| if x == n / 2 && y == n / 2 { 1.0 } else { 0.0 })
    }

    #[test]
    fn kernel_sigma_two_matches_closed_form() {
        // exp(-i²/8) for i = 0..=6, normalized over i ∈ [-6, 6].
        let raw = [
            1.0,
            0.882_496_902_584_595_4,
            0.606_530_659_712_633_4,
            0.324_652_467_358_349_7,
            0.135_335_283_236_612_7,
            0.043_936_933_623_407_42,
            0.011_108_996_538_242_31,
        ];
        let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 13);
        for (i, v) in k.iter().enumerate() {
            let d = (i as isize - 6).unsigned_abs();
            assert!((v - raw[d] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn blurred_impulse_is_outer_product() {
        let sigma = 2.0;
        let k = gaussian_kernel(sigma);
        let out = gaussian_blur(&impulse(31), sigma);
        for y in 0..31 {
            for x in 0..31 {
                let (dx, dy) = (x as isize - 15, y as isize - 15);
                let want = if dx.abs() <= 6 && dy.abs() <= 6 {
                    k[(dx + 6) as usize] * k[(dy + 6) as usize]
                } else {
                    0.0
                };
                assert!((out.at(x, y) - want).abs() < 1e-6, "({x},{y})");
            }
        }
    }

    #[test]
    fn median_removes_impulse() {
        let out = median3(&impulse(5));
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filters_keep_constants() {
        let p = Plane::from_fn(7, 5, |_, _| 0.25);
        assert_eq!(median3(&p), p);
        assert!(gaussian_blur(&p, 1.3).data.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }
}
