//! Fixed-size vectors for d ∈ {2, 3}.
//!
//! Every vector carries three components. Two-dimensional models keep the
//! third component at zero; all operations used by the model (sums, scaling,
//! dot products, reflections about planes through the origin of the plane)
//! preserve that, so 2D dynamics never leave the plane.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vector(pub [f64; MAX_DIM]);

impl Vector {
    pub const ZERO: Vector = Vector([0.0; MAX_DIM]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector([x, y, z])
    }

    pub const fn xy(x: f64, y: f64) -> Self {
        Vector([x, y, 0.0])
    }

    /// Builds a vector from `d ≤ 3` leading components.
    pub fn from_slice(components: &[f64]) -> Self {
        assert!(components.len() <= MAX_DIM, "at most {MAX_DIM} components");
        let mut v = [0.0; MAX_DIM];
        v[..components.len()].copy_from_slice(components);
        Vector(v)
    }

    pub fn to_vec(self, dim: usize) -> Vec<f64> {
        self.0[..dim].to_vec()
    }

    /// The axis-aligned unit vector along the first coordinate.
    pub const fn e1() -> Self {
        Vector([1.0, 0.0, 0.0])
    }

    #[inline]
    pub fn dot(self, other: Vector) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vector> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance to `other`.
    #[inline]
    pub fn distance(self, other: Vector) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(self, rhs: Vector) -> Vector {
        Vector([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(self, rhs: Vector) -> Vector {
        Vector([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(self, k: f64) -> Vector {
        Vector([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    #[inline]
    fn mul(self, v: Vector) -> Vector {
        v * self
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        Vector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, rhs: Vector) {
        self.0[0] += rhs.0[0];
        self.0[1] += rhs.0[1];
        self.0[2] += rhs.0[2];
    }
}

impl SubAssign for Vector {
    #[inline]
    fn sub_assign(&mut self, rhs: Vector) {
        self.0[0] -= rhs.0[0];
        self.0[1] -= rhs.0[1];
        self.0[2] -= rhs.0[2];
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Arithmetic mean of a non-empty set of vectors.
pub fn mean(vectors: &[Vector]) -> Vector {
    let mut sum = Vector::ZERO;
    for v in vectors {
        sum += *v;
    }
    sum * (1.0 / vectors.len() as f64)
}
