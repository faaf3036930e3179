//! Oriented spatial parabolas `γ(t) = R·(t, α t², 0) + a` fitted to instance
//! point clouds.
//!
//! The fit alternates between projecting every point onto the current curve
//! and re-estimating the curve for fixed parameters: a rigid alignment of
//! the model points `(t, α t², 0)` to the data, then `α` by 1D least
//! squares. Each block step minimizes the same objective, so the residual
//! sum never increases. The result is oriented so that at least as many
//! points project onto the upper half `[t_mid, t_max]` as onto the lower one.

mod projection;

use serde::{Deserialize, Serialize};

pub use projection::{closest_parameter, depressed_cubic_roots};

use crate::linalg::{
    centroid_covariance, orthonormal_frame, rigid_alignment, rotation_vector, solve_linear, symmetric_eigen, Mat3,
    Vec3,
};
use crate::scalar::Real;

/// Point clouds smaller than this are fitted as a line.
pub const MIN_FIT_POINTS: usize = 10;
/// Second PCA eigenvalue below this fraction of the first means a line.
pub const LINE_EIGEN_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    pub degenerate_line: bool,
    pub low_point_count: bool,
    /// `t_min == t_max`: no orientation information.
    pub collapsed: bool,
}

impl FitFlags {
    pub fn any(&self) -> bool {
        self.degenerate_line || self.low_point_count || self.collapsed
    }

    /// `|`-joined flag names, `None` when no flag is set.
    pub fn describe(&self) -> Option<String> {
        let names: Vec<&str> = [
            (self.degenerate_line, "degenerate_line"),
            (self.low_point_count, "low_point_count"),
            (self.collapsed, "collapsed"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        (!names.is_empty()).then(|| names.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parabola<T: Real> {
    /// Columns are the parabola axis, the curvature direction and the plane normal.
    pub rotation: Mat3<T>,
    pub anchor: Vec3<T>,
    /// Curvature, always `≥ 0` after a fit.
    pub alpha: T,
    pub t_min: T,
    pub t_max: T,
    /// Closest-point parameter of every fitted point, in input order.
    pub params: Vec<T>,
    /// Distance of every fitted point to the curve.
    pub residuals: Vec<T>,
    pub flags: FitFlags,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when the residual sum changes by less than this fraction.
    pub relative_tolerance: f64,
    /// Smallest admissible radius of curvature, as a multiple of the cloud's
    /// radius across the bending plane.
    pub min_bend_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_tolerance: 1e-8,
            min_bend_ratio: 4.0,
        }
    }
}

/// Residual sum of squares after each projection step of the alternation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace<T> {
    pub residual_sums: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats<T> {
    pub mean: T,
    pub std: T,
    pub skew: T,
}

impl<T: Real> Parabola<T> {
    /// Curve point `γ(t)`.
    pub fn point(&self, t: T) -> Vec3<T> {
        self.rotation.mul_vec(&Vec3::new(t, self.alpha * t * t, T::zero())) + self.anchor
    }

    /// Unit tangent `γ'(t)/‖γ'(t)‖`.
    pub fn tangent(&self, t: T) -> Vec3<T> {
        self.rotation
            .mul_vec(&Vec3::new(T::one(), T::lit(2.0) * self.alpha * t, T::zero()))
            .normalized()
    }

    /// Coordinates of `x` in the parabola frame.
    pub fn local(&self, x: &Vec3<T>) -> Vec3<T> {
        self.rotation.tr_mul_vec(&(*x - self.anchor))
    }

    /// Closest-point parameter `t_x`.
    pub fn project(&self, x: &Vec3<T>) -> T {
        let l = self.local(x);
        closest_parameter(self.alpha, l.x(), l.y())
    }

    pub fn distance(&self, x: &Vec3<T>) -> T {
        (self.point(self.project(x)) - *x).norm()
    }

    pub fn t_mid(&self) -> T {
        (self.t_min + self.t_max) / T::lit(2.0)
    }

    pub fn is_collapsed(&self) -> bool {
        !(self.t_max > self.t_min)
    }

    /// Relative position of `x` along the fitted range: 0 at or below the
    /// bottom, 1 at or beyond the top, linear in between. A collapsed
    /// parameter range has no orientation and yields 0.5.
    pub fn height(&self, x: &Vec3<T>) -> T {
        self.height_at(self.project(x))
    }

    pub fn height_at(&self, t: T) -> T {
        if self.is_collapsed() {
            return T::lit(0.5);
        }
        if t < self.t_min {
            T::zero()
        } else if t > self.t_max {
            T::one()
        } else {
            (t - self.t_min) / (self.t_max - self.t_min)
        }
    }

    pub fn arc_length(&self) -> T {
        arc_length(self.alpha, self.t_min, self.t_max)
    }

    pub fn residual_stats(&self) -> ResidualStats<T> {
        residual_stats(&self.residuals)
    }

    /// Reparametrizes `t → −t`. The curve is unchanged; the frame gets a
    /// proper rotation `diag(−1, 1, −1)`.
    fn reverse(&mut self) {
        let one = T::one();
        self.rotation = self.rotation.scale_columns([-one, one, -one]);
        for t in self.params.iter_mut() {
            *t = -*t;
        }
        let (lo, hi) = (self.t_min, self.t_max);
        self.t_min = -hi;
        self.t_max = -lo;
    }
}

/// `∫ √(1 + 4α²t²) dt` over `[t0, t1]` in closed form.
pub fn arc_length<T: Real>(alpha: T, t0: T, t1: T) -> T {
    if t1 == t0 {
        return T::zero();
    }
    let a = alpha.abs();
    if a == T::zero() {
        return t1 - t0;
    }
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let prim = |t: T| {
        let s = two * a * t;
        t / two * (T::one() + s * s).sqrt() + s.asinh() / (four * a)
    };
    prim(t1) - prim(t0)
}

/// Sample mean, sample standard deviation (`n − 1` denominator, 0 for a
/// single value) and Fisher skewness `m₃ / m₂^{3/2}` (0 when the spread is 0).
pub fn residual_stats<T: Real>(values: &[T]) -> ResidualStats<T> {
    let zero = T::zero();
    if values.is_empty() {
        return ResidualStats {
            mean: zero,
            std: zero,
            skew: zero,
        };
    }
    let n = T::from_count(values.len());
    let mean = values.iter().fold(zero, |a, &v| a + v) / n;
    let (mut m2, mut m3) = (zero, zero);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let std = if values.len() > 1 {
        (m2 / (n - T::one())).sqrt()
    } else {
        zero
    };
    let m2 = m2 / n;
    let m3 = m3 / n;
    let skew = if std == zero || m2 == zero {
        zero
    } else {
        m3 / (m2 * m2 * m2).sqrt()
    };
    ResidualStats { mean, std, skew }
}

pub fn fit_parabola<T: Real>(points: &[Vec3<T>]) -> Parabola<T> {
    fit_parabola_traced(points, &FitOptions::default()).0
}

pub fn fit_parabola_traced<T: Real>(points: &[Vec3<T>], options: &FitOptions) -> (Parabola<T>, FitTrace<T>) {
    let mut trace = FitTrace::default();
    let (centroid, cov) = centroid_covariance(points);
    let (eigvals, eigvecs) = symmetric_eigen(cov);
    let e1 = Vec3(eigvecs[0]);
    let e2 = Vec3(eigvecs[1]);
    let low_count = points.len() < MIN_FIT_POINTS;
    let line_like = !(eigvals[1] >= T::lit(LINE_EIGEN_RATIO) * eigvals[0]) || eigvals[0] <= T::zero();

    let mut fit = if low_count || line_like {
        let frame = if eigvals[0] > T::zero() {
            orthonormal_frame(e1)
        } else {
            Mat3::identity()
        };
        let mut p = Parabola {
            rotation: frame,
            anchor: centroid,
            alpha: T::zero(),
            t_min: T::zero(),
            t_max: T::zero(),
            params: Vec::new(),
            residuals: Vec::new(),
            flags: FitFlags {
                degenerate_line: true,
                low_point_count: low_count,
                collapsed: false,
            },
            iterations: 0,
        };
        let sum = project_all(&mut p, points);
        trace.residual_sums.push(sum);
        p
    } else {
        let pca_frame = Mat3::from_columns(e1, e2, e1.cross(&e2));
        let alpha_max = curvature_bound(eigvals[2], options.min_bend_ratio);
        let mut candidates = vec![pca_frame];
        if let Some(frame) = conic_axis_frame(points, centroid, pca_frame) {
            candidates.push(frame);
        }
        let mut p = candidates
            .into_iter()
            .map(|frame| {
                let mut p = initial_guess(points, centroid, frame);
                p.alpha = clamp_alpha(p.alpha, alpha_max);
                let sum = project_all(&mut p, points);
                (p, sum)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(p, _)| p)
            .expect("at least one candidate");
        alternate(&mut p, points, alpha_max, options, &mut trace);
        p
    };

    finalize(&mut fit, points);
    (fit, trace)
}

/// Largest admissible `|α|` for a cloud whose variance across the bending
/// plane is `across`. A filled tube of radius `R` has variance `R²/4` along
/// any diameter of its cross-section; the vertex curvature of the parabola is
/// `2|α|` and must not exceed `1 / (ratio · R)`.
///
/// Without a bound, filled tubes and cones are fitted better by a curled or
/// folded parabola (two nearly parallel arms both running along the tube)
/// than by their centreline.
fn curvature_bound<T: Real>(across: T, ratio: f64) -> T {
    if across > T::zero() && ratio > 0.0 {
        T::one() / (T::lit(4.0 * ratio) * across.sqrt())
    } else {
        T::infinity()
    }
}

fn clamp_alpha<T: Real>(alpha: T, alpha_max: T) -> T {
    alpha.max(-alpha_max).min(alpha_max)
}

/// PCA frame plus a quadratic regression `v ≈ A u² + B u + C` in the plane of
/// the first two principal axes; the vertex of that quadratic is the anchor.
fn initial_guess<T: Real>(points: &[Vec3<T>], centroid: Vec3<T>, frame: Mat3<T>) -> Parabola<T> {
    let e1 = frame.column(0);
    let e2 = frame.column(1);
    let uv: Vec<(T, T)> = points
        .iter()
        .map(|x| {
            let d = *x - centroid;
            (e1.dot(&d), e2.dot(&d))
        })
        .collect();
    let scale = uv.iter().fold(T::zero(), |m, &(u, _)| m.max(u.abs())).max(T::epsilon());

    // normal equations in the scaled variable r = u/scale
    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    for &(u, v) in &uv {
        let r = u / scale;
        let row = [r * r, r, T::one()];
        for i in 0..3 {
            atb[i] += row[i] * v;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let (a, b, c) = match solve_linear(ata, atb) {
        Some([a, b, c]) => (a / (scale * scale), b / scale, c),
        None => (T::zero(), T::zero(), T::zero()),
    };

    let two = T::lit(2.0);
    let (alpha, anchor) = if a != T::zero() && (b / (two * a)).abs() <= T::lit(10.0) * scale {
        let u0 = -b / (two * a);
        let v0 = c - b * b / (T::lit(4.0) * a);
        (a, centroid + e1.scale(u0) + e2.scale(v0))
    } else {
        (a, centroid + e2.scale(c))
    };

    Parabola {
        rotation: frame,
        anchor,
        alpha,
        t_min: T::zero(),
        t_max: T::zero(),
        params: Vec::new(),
        residuals: Vec::new(),
        flags: FitFlags::default(),
        iterations: 0,
    }
}

/// In-plane rotation of the PCA frame whose first axis is perpendicular to
/// the symmetry axis of an algebraic conic fit `A u² + B uv + C v² + D u + E v + F = 0`
/// in the PC1–PC2 plane. For a parabola the quadratic part is `(n·p)²`, so
/// `n` is the direction of the parabola's `t` axis.
fn conic_axis_frame<T: Real>(points: &[Vec3<T>], centroid: Vec3<T>, frame: Mat3<T>) -> Option<Mat3<T>> {
    let e1 = frame.column(0);
    let e2 = frame.column(1);
    let scale = points
        .iter()
        .fold(T::zero(), |m, x| m.max((*x - centroid).norm()))
        .max(T::epsilon());
    let mut scatter = [[T::zero(); 6]; 6];
    for x in points {
        let d = *x - centroid;
        let (u, v) = (e1.dot(&d) / scale, e2.dot(&d) / scale);
        let z = [u * u, u * v, v * v, u, v, T::one()];
        for i in 0..6 {
            for j in 0..6 {
                scatter[i][j] += z[i] * z[j];
            }
        }
    }
    let (_, vecs) = symmetric_eigen(scatter);
    let [a, b, c, ..] = vecs[5];
    let half_b = b / T::lit(2.0);
    let (vals, qvecs) = symmetric_eigen([[a, half_b], [half_b, c]]);
    let k = if vals[0].abs() >= vals[1].abs() { 0 } else { 1 };
    let [n1, n2] = qvecs[k];
    if !(n1.is_finite() && n2.is_finite()) || vals[k] == T::zero() {
        return None;
    }
    let d1 = (e1.scale(n1) + e2.scale(n2)).normalized();
    let d2 = (e2.scale(n1) - e1.scale(n2)).normalized();
    Some(Mat3::from_columns(d1, d2, d1.cross(&d2)))
}

/// Sets `params` to the closest-point parameters and returns the residual
/// sum of squares.
fn project_all<T: Real>(p: &mut Parabola<T>, points: &[Vec3<T>]) -> T {
    p.params.clear();
    p.params.reserve(points.len());
    let mut sum = T::zero();
    for x in points {
        let l = p.local(x);
        let t = closest_parameter(p.alpha, l.x(), l.y());
        let du = t - l.x();
        let dv = p.alpha * t * t - l.y();
        sum += du * du + dv * dv + l.z() * l.z();
        p.params.push(t);
    }
    sum
}

fn alternate<T: Real>(
    p: &mut Parabola<T>,
    points: &[Vec3<T>],
    alpha_max: T,
    options: &FitOptions,
    trace: &mut FitTrace<T>,
) {
    let tol = T::lit(options.relative_tolerance);
    // below this the residual sum is rounding noise of the coordinates
    let (centroid, _) = centroid_covariance(points);
    let spread = points.iter().fold(T::zero(), |acc, x| acc + (*x - centroid).norm_squared());
    let noise_floor = spread * (T::lit(64.0) * T::epsilon()).powi(2);
    let mut sum = project_all(p, points);
    trace.residual_sums.push(sum);
    let mut damping = T::lit(1e-3);
    for iter in 0..options.max_iterations {
        if sum <= noise_floor {
            break;
        }
        let mut next = p.clone();
        let mut next_sum = block_step(&mut next, points, alpha_max);
        if next_sum > sum {
            next = p.clone();
            next_sum = sum;
        }
        if let Some((refined, refined_sum)) = refine_step(&next, next_sum, points, alpha_max, &mut damping) {
            next = refined;
            next_sum = refined_sum;
        }
        trace.residual_sums.push(next_sum);
        p.iterations = iter + 1;
        let change = sum - next_sum;
        *p = next;
        p.iterations = iter + 1;
        sum = next_sum;
        if change <= tol * sum.max(T::min_positive_value()) {
            break;
        }
    }
}

/// Rigid alignment of the model points for fixed `t` and `α`, then `α` by
/// least squares for fixed frame; returns the re-projected residual sum.
fn block_step<T: Real>(p: &mut Parabola<T>, points: &[Vec3<T>], alpha_max: T) -> T {
    let model: Vec<Vec3<T>> = p
        .params
        .iter()
        .map(|&t| Vec3::new(t, p.alpha * t * t, T::zero()))
        .collect();
    let (rot, anchor) = rigid_alignment(&model, points);
    p.rotation = rot;
    p.anchor = anchor;

    let (mut num, mut den) = (T::zero(), T::zero());
    for (x, &t) in points.iter().zip(&p.params) {
        let v = p.local(x).y();
        let t2 = t * t;
        num += t2 * v;
        den += t2 * t2;
    }
    if den > T::zero() {
        p.alpha = clamp_alpha(num / den, alpha_max);
    }
    project_all(p, points)
}

/// Damped Gauss-Newton step on `(rotation, anchor, α)` using the
/// closest-point residuals with their tangential component removed. Only
/// returned if it lowers the residual sum.
fn refine_step<T: Real>(
    p: &Parabola<T>,
    sum: T,
    points: &[Vec3<T>],
    alpha_max: T,
    damping: &mut T,
) -> Option<(Parabola<T>, T)> {
    let mut normal = [[T::zero(); 7]; 7];
    let mut grad = [T::zero(); 7];
    for (x, &t) in points.iter().zip(&p.params) {
        let m = Vec3::new(t, p.alpha * t * t, T::zero());
        let e = p.rotation.mul_vec(&m) + p.anchor - *x;
        let tau = p.tangent(t);
        let axes = [
            Vec3::new(T::one(), T::zero(), T::zero()),
            Vec3::new(T::zero(), T::one(), T::zero()),
            Vec3::new(T::zero(), T::zero(), T::one()),
        ];
        let mut cols = [Vec3::zero(); 7];
        for k in 0..3 {
            cols[k] = p.rotation.mul_vec(&axes[k].cross(&m));
            cols[3 + k] = axes[k];
        }
        cols[6] = p.rotation.mul_vec(&Vec3::new(T::zero(), t * t, T::zero()));
        for c in cols.iter_mut() {
            *c = *c - tau.scale(tau.dot(c));
        }
        for i in 0..7 {
            grad[i] += cols[i].dot(&e);
            for j in i..7 {
                normal[i][j] += cols[i].dot(&cols[j]);
            }
        }
    }
    for i in 0..7 {
        for j in 0..i {
            normal[i][j] = normal[j][i];
        }
    }
    for _ in 0..6 {
        let mut damped = normal;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += *damping * normal[i][i].max(T::min_positive_value());
        }
        let Some(delta) = solve_linear(damped, grad.map(|g| -g)) else {
            *damping *= T::lit(10.0);
            continue;
        };
        let mut trial = p.clone();
        trial.rotation = p.rotation * rotation_vector(Vec3::new(delta[0], delta[1], delta[2]));
        trial.anchor = p.anchor + Vec3::new(delta[3], delta[4], delta[5]);
        trial.alpha = clamp_alpha(p.alpha + delta[6], alpha_max);
        let trial_sum = project_all(&mut trial, points);
        if trial_sum < sum {
            *damping = (*damping / T::lit(3.0)).max(T::lit(1e-12));
            return Some((trial, trial_sum));
        }
        *damping = (*damping * T::lit(4.0)).min(T::lit(1e12));
    }
    None
}

/// Orientation rule, curvature sign normalization, parameter range and
/// residuals.
fn finalize<T: Real>(p: &mut Parabola<T>, points: &[Vec3<T>]) {
    let (lo, hi) = p
        .params
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if lo.is_finite() {
        p.t_min = lo;
        p.t_max = hi;
    }
    let mid = p.t_mid();
    let lower = p.params.iter().filter(|&&t| t < mid).count();
    if lower > p.params.len() - lower {
        p.reverse();
    }
    if p.alpha < T::zero() {
        // rotate π about the parabola axis: (t, αt², 0) ↦ (t, −αt², 0)
        let one = T::one();
        p.rotation = p.rotation.scale_columns([one, -one, -one]);
        p.alpha = -p.alpha;
    }
    p.flags.collapsed = p.is_collapsed();
    p.residuals = points
        .iter()
        .zip(&p.params)
        .map(|(x, &t)| (p.point(t) - *x).norm())
        .collect();
}
