//! Closest point on the planar parabola `(t, α t²)`.
//!
//! Stationarity of `(t − u)² + (α t² − v)²` is the cubic
//! `2α²t³ + (1 − 2αv)t − u = 0`. Substituting `s = α t` gives the
//! scale-free depressed cubic `s³ + p s + q = 0` with `p = (1 − 2αv)/2`,
//! `q = −αu/2`, solved with the trigonometric/hyperbolic closed forms.

use crate::scalar::Real;

/// Real roots of `s³ + p s + q = 0`.
pub fn depressed_cubic_roots<T: Real>(p: T, q: T) -> Vec<T> {
    let zero = T::zero();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    if p == zero {
        return vec![(-q).cbrt()];
    }
    let third = T::one() / three;
    let disc = (q / two) * (q / two) + (p / three) * (p / three) * (p / three);
    if p > zero {
        // strictly increasing: one real root
        let m = two * (p / three).sqrt();
        let arg = (three * q / (two * p)) * (three / p).sqrt();
        return vec![-m * (arg.asinh() * third).sinh()];
    }
    let m = two * (-p / three).sqrt();
    let arg = (three * q / (two * p)) * (-three / p).sqrt();
    if disc > zero {
        // p < 0 with a single real root
        let s = -q.signum() * m * (arg.abs().acosh() * third).cosh();
        return vec![s];
    }
    let phi = arg.max(-T::one()).min(T::one()).acos() * third;
    let step = two * T::PI() * third;
    (0..3)
        .map(|k| m * (phi - step * T::from_count(k)).cos())
        .collect()
}

#[inline]
fn planar_distance_sq<T: Real>(alpha: T, u: T, v: T, t: T) -> T {
    let du = t - u;
    let dv = alpha * t * t - v;
    du * du + dv * dv
}

/// Parameter `t` minimizing the distance from `(u, v)` to `(t, α t²)`.
/// Ties between equally distant roots go to the smaller `t`.
pub fn closest_parameter<T: Real>(alpha: T, u: T, v: T) -> T {
    if alpha == T::zero() {
        return u;
    }
    let two = T::lit(2.0);
    let big_u = alpha * u;
    let lin = T::one() - two * alpha * v;
    let p = lin / two;
    let q = -big_u / two;
    let mut best: Option<(T, T)> = None;
    for s in depressed_cubic_roots(p, q) {
        // Newton polish on 2s³ + (1 − 2αv)s − αu
        let mut s = s;
        for _ in 0..2 {
            let g = two * s * s * s + lin * s - big_u;
            let dg = T::lit(6.0) * s * s + lin;
            if dg == T::zero() {
                break;
            }
            let next = s - g / dg;
            let g_next = two * next * next * next + lin * next - big_u;
            if g_next.abs() < g.abs() {
                s = next;
            } else {
                break;
            }
        }
        let t = s / alpha;
        let d = planar_distance_sq(alpha, u, v, t);
        best = match best {
            None => Some((t, d)),
            Some((bt, bd)) if d < bd || (d == bd && t < bt) => Some((t, d)),
            keep => keep,
        };
    }
    best.map(|(t, _)| t).unwrap_or(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_search(alpha: f64, u: f64, v: f64) -> f64 {
        // coarse grid then golden refinement around the best cell
        let (lo, hi) = (-50.0, 50.0);
        let n = 200_000;
        let mut best = (lo, f64::INFINITY);
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let d = planar_distance_sq(alpha, u, v, t);
            if d < best.1 {
                best = (t, d);
            }
        }
        let h = (hi - lo) / n as f64;
        let (mut a, mut b) = (best.0 - h, best.0 + h);
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if planar_distance_sq(alpha, u, v, m1) < planar_distance_sq(alpha, u, v, m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn roots_satisfy_cubic() {
        for &(p, q) in &[(1.0, 0.3), (-3.0, 1.0), (-3.0, 2.5), (0.0, -8.0), (-1e-3, 1e-6)] {
            for s in depressed_cubic_roots::<f64>(p, q) {
                assert!((s * s * s + p * s + q).abs() < 1e-12, "p={p} q={q} s={s}");
            }
        }
        assert_eq!(depressed_cubic_roots::<f64>(-3.0, 0.0).len(), 3);
    }

    #[test]
    fn on_curve_points_project_to_themselves() {
        let alpha = 0.2f64;
        for &t in &[-7.0f64, -1.0, 0.0, 0.5, 9.0] {
            let got = closest_parameter(alpha, t, alpha * t * t);
            assert!((got - t).abs() < 1e-12, "{t} -> {got}");
        }
    }

    #[test]
    fn symmetric_point_on_axis_picks_smaller_root() {
        // above the focus the two side roots are equally close
        let alpha = 0.5;
        let t = closest_parameter(alpha, 0.0, 10.0f64);
        assert!((t.abs() - 18f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_dense_search() {
        let cases = [
            (0.05, 3.0, 1.0),
            (0.2, -4.0, 6.0),
            (0.2, 0.1, 8.0),
            (1e-9, 5.0, -2.0),
            (-0.3, 2.0, -1.0),
            (0.15, 12.0, -3.0),
        ];
        for &(a, u, v) in &cases {
            let t = closest_parameter(a, u, v);
            let oracle = dense_search(a, u, v);
            let dt = planar_distance_sq(a, u, v, t);
            let doracle = planar_distance_sq(a, u, v, oracle);
            assert!(dt <= doracle + 1e-12, "case {a} {u} {v}");
            assert!((t - oracle).abs() < 1e-6, "case {a} {u} {v}: {t} vs {oracle}");
        }
    }

    #[test]
    fn single_precision_small_curvature() {
        let t = closest_parameter(1e-7f32, 3.0, 0.5);
        assert!((t - 3.0).abs() < 1e-4);
    }
}
