//! Small fixed-size linear algebra: 3-vectors, 3×3 matrices, a cyclic Jacobi
//! eigensolver for symmetric matrices and closed-form rigid alignment.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    #[inline]
    pub fn x(&self) -> T {
        self.0[0]
    }
    #[inline]
    pub fn y(&self) -> T {
        self.0[1]
    }
    #[inline]
    pub fn z(&self) -> T {
        self.0[2]
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        let [a, b, c] = self.0;
        let [d, e, f] = o.0;
        Vec3([b * f - c * e, c * d - a * f, a * e - b * d])
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    /// Unit vector in the same direction; the zero vector maps to itself.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self.scale(T::one() / n)
        } else {
            *self
        }
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3(self.0.map(|v| U::lit(v.as_f64())))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3(self.0.map(|v| -v))
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn from_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Mat3([
            [c0.0[0], c1.0[0], c2.0[0]],
            [c0.0[1], c1.0[1], c2.0[1]],
            [c0.0[2], c1.0[2], c2.0[2]],
        ])
    }

    #[inline]
    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let m = &self.0;
        Vec3([
            m[0][0] * v.0[0] + m[0][1] * v.0[1] + m[0][2] * v.0[2],
            m[1][0] * v.0[0] + m[1][1] * v.0[1] + m[1][2] * v.0[2],
            m[2][0] * v.0[0] + m[2][1] * v.0[1] + m[2][2] * v.0[2],
        ])
    }

    /// `selfᵀ · v`, i.e. the coordinates of `v` in the column frame.
    #[inline]
    pub fn tr_mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        Vec3([
            self.column(0).dot(v),
            self.column(1).dot(v),
            self.column(2).dot(v),
        ])
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `selfᵀ·self − I`.
    pub fn orthonormality_error(&self) -> T {
        let p = self.transpose() * *self;
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }

    /// Right-multiplies by `diag(d0, d1, d2)`, scaling columns.
    pub fn scale_columns(&self, d: [T; 3]) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v *= d[j];
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        Mat3(self.0.map(|r| r.map(|v| U::lit(v.as_f64()))))
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).fold(T::zero(), |acc, k| acc + self.0[i][k] * o.0[k][j]);
            }
        }
        Mat3(out)
    }
}

/// Eigen-decomposition of a symmetric `N×N` matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted in decreasing order and the matching unit
/// eigenvectors as `vectors[k]`.
pub fn symmetric_eigen<T: Real, const N: usize>(matrix: [[T; N]; N]) -> ([T; N], [[T; N]; N]) {
    let mut a = matrix;
    let mut v = [[T::zero(); N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }

    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..N {
            diag += a[i][i] * a[i][i];
            for j in (i + 1)..N {
                off += a[i][j] * a[i][j];
            }
        }
        if off == T::zero() || off <= T::epsilon() * T::epsilon() * diag {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.map(|i| a[i][i]);
    let vectors = order.map(|i| std::array::from_fn(|k| v[k][i]));
    (values, vectors)
}

/// Centroid and covariance (divided by `n`) of a point set.
pub fn centroid_covariance<T: Real>(points: &[Vec3<T>]) -> (Vec3<T>, [[T; 3]; 3]) {
    let n = T::from_count(points.len().max(1));
    let mut c = Vec3::zero();
    for p in points {
        c += *p;
    }
    let c = c.scale(T::one() / n);
    let mut cov = [[T::zero(); 3]; 3];
    for p in points {
        let d = *p - c;
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d.0[i] * d.0[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    (c, cov)
}

/// Proper rotation `R` and translation `a` minimizing `Σ ‖R·mᵢ + a − xᵢ‖²`.
///
/// Uses the unit-quaternion formulation: the optimal rotation is the
/// eigenvector of the largest eigenvalue of a symmetric 4×4 matrix built from
/// the cross-covariance of the centered point sets.
pub fn rigid_alignment<T: Real>(model: &[Vec3<T>], data: &[Vec3<T>]) -> (Mat3<T>, Vec3<T>) {
    assert_eq!(model.len(), data.len());
    let n = T::from_count(model.len().max(1));
    let mut cm = Vec3::zero();
    let mut cd = Vec3::zero();
    for (m, d) in model.iter().zip(data) {
        cm += *m;
        cd += *d;
    }
    let cm = cm.scale(T::one() / n);
    let cd = cd.scale(T::one() / n);

    // s[i][j] = Σ m_i d_j
    let mut s = [[T::zero(); 3]; 3];
    for (m, d) in model.iter().zip(data) {
        let m = *m - cm;
        let d = *d - cd;
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += m.0[i] * d.0[j];
            }
        }
    }
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = s;
    let k = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ];
    let (_, vecs) = symmetric_eigen(k);
    let rot = quaternion_to_matrix(vecs[0]);
    let trans = cd - rot.mul_vec(&cm);
    (rot, trans)
}

fn quaternion_to_matrix<T: Real>(q: [T; 4]) -> Mat3<T> {
    let norm = q.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
    let [w, x, y, z] = q.map(|v| v / norm);
    let two = T::lit(2.0);
    Mat3([
        [
            w * w + x * x - y * y - z * z,
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            w * w - x * x + y * y - z * z,
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            w * w - x * x - y * y + z * z,
        ],
    ])
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting. `None` if
/// `A` is numerically singular.
pub fn solve_linear<T: Real, const N: usize>(mut a: [[T; N]; N], mut b: [T; N]) -> Option<[T; N]> {
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::from_count(N);
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[pivot][col].abs() > tiny) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut s = b[row];
        for k in (row + 1)..N {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Rotation `exp([ω]×)` for a rotation vector `ω`.
pub fn rotation_vector<T: Real>(omega: Vec3<T>) -> Mat3<T> {
    let angle = omega.norm();
    if angle == T::zero() {
        Mat3::identity()
    } else {
        axis_angle(omega, angle)
    }
}

/// Rotation about a unit axis by `angle` radians (Rodrigues).
pub fn axis_angle<T: Real>(axis: Vec3<T>, angle: T) -> Mat3<T> {
    let half = angle / T::lit(2.0);
    let s = half.sin();
    let a = axis.normalized();
    quaternion_to_matrix([half.cos(), a.0[0] * s, a.0[1] * s, a.0[2] * s])
}

/// Completes `e1` to a right-handed orthonormal frame `(e1, e2, e3)`.
pub fn orthonormal_frame<T: Real>(e1: Vec3<T>) -> Mat3<T> {
    let e1 = e1.normalized();
    let helper = if e1.x().abs() < T::lit(0.9) {
        Vec3::new(T::one(), T::zero(), T::zero())
    } else {
        Vec3::new(T::zero(), T::one(), T::zero())
    };
    let e2 = (helper - e1.scale(e1.dot(&helper))).normalized();
    let e3 = e1.cross(&e2);
    Mat3::from_columns(e1, e2, e3)
}
