use std::f64::consts::TAU;

pub const ORIENTATION_BINS: usize = 36;

/// Bin of an angle in radians; bin i is centred on i·10°.
#[inline]
pub fn orientation_bin(angle: f64) -> usize {
    let w = TAU / ORIENTATION_BINS as f64;
    let a = angle.rem_euclid(TAU);
    ((a / w + 0.5).floor() as usize) % ORIENTATION_BINS
}

/// Magnitude-weighted histogram of central-difference gradient angles over
/// interior pixels of an n×n intensity image.
pub fn orientation_histogram(intensity: &[f32], n: usize) -> [f64; ORIENTATION_BINS] {
    let mut hist = [0.0; ORIENTATION_BINS];
    let w = std::f32::consts::TAU / ORIENTATION_BINS as f32;
    for r in 1..n.saturating_sub(1) {
        for c in 1..n - 1 {
            let gx = intensity[r * n + c + 1] - intensity[r * n + c - 1];
            let gy = intensity[(r + 1) * n + c] - intensity[(r - 1) * n + c];
            let m = (gx * gx + gy * gy).sqrt();
            if m > 0.0 {
                let a = fast_atan2(gy, gx);
                let a = if a < 0.0 { a + std::f32::consts::TAU } else { a };
                let b = (a / w + 0.5) as usize;
                hist[if b >= ORIENTATION_BINS { b - ORIENTATION_BINS } else { b }] += m as f64;
            }
        }
    }
    hist
}

/// atan2 via octant reduction and a minimax polynomial (max error about
/// 2e-4 rad, far below the 10° bin width).
#[inline]
fn fast_atan2(y: f32, x: f32) -> f32 {
    use std::f32::consts::{FRAC_PI_2, PI};
    let (ax, ay) = (x.abs(), y.abs());
    let a = ax.min(ay) / ax.max(ay);
    let s = a * a;
    let mut r = ((-0.046_496_475 * s + 0.159_314_22) * s - 0.327_622_76) * s * a + a;
    if ay > ax {
        r = FRAC_PI_2 - r;
    }
    if x < 0.0 {
        r = PI - r;
    }
    if y < 0.0 {
        -r
    } else {
        r
    }
}

/// Centre angle (radians, in [0, 2π)) of the heaviest bin; ties and the
/// all-zero histogram give the smallest angle.
pub fn dominant_orientation(intensity: &[f32], n: usize) -> f64 {
    let hist = orientation_histogram(intensity, n);
    let mut best = 0;
    for i in 1..ORIENTATION_BINS {
        if hist[i] > hist[best] {
            best = i;
        }
    }
    best as f64 * TAU / ORIENTATION_BINS as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, angle_deg: f64) -> Vec<f32> {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let mut v = Vec::new();
        for r in 0..n {
            for col in 0..n {
                v.push((c * col as f64 + s * r as f64) as f32);
            }
        }
        v
    }

    #[test]
    fn constant_patch_is_zero() {
        assert_eq!(dominant_orientation(&[5.0; 169], 13), 0.0);
    }

    #[test]
    fn ramps() {
        for deg in [0.0, 40.0, 90.0, 215.0] {
            let a = dominant_orientation(&ramp(13, deg), 13).to_degrees();
            let diff = ((a - deg + 180.0).rem_euclid(360.0) - 180.0).abs();
            assert!(diff <= 10.0, "{deg} -> {a}");
        }
    }

    #[test]
    fn fast_atan2_is_close() {
        for i in 0..3600 {
            let t = (i as f32 / 10.0).to_radians();
            let (y, x) = (t.sin() * 3.0, t.cos() * 3.0);
            let d = (fast_atan2(y, x) - y.atan2(x)).abs();
            assert!(d < 3e-4 || (d - std::f32::consts::TAU).abs() < 3e-4, "{i}: {d}");
        }
    }

    #[test]
    fn bins_are_centred() {
        assert_eq!(orientation_bin(0.0), 0);
        assert_eq!(orientation_bin((-4.9f64).to_radians()), 0);
        assert_eq!(orientation_bin(5.1f64.to_radians()), 1);
        assert_eq!(orientation_bin(355.1f64.to_radians()), 0);
    }
}
