//! Small fixed-size vector and colour types.

use std::ops::{Add, AddAssign, Div, Index, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::Float;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Float> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> T {
        self.length_squared().sqrt()
    }

    /// Unit vector in the same direction; zero stays zero.
    #[inline]
    pub fn normalized(self) -> Self {
        let len = self.length();
        if len > T::zero() {
            self * (T::one() / len)
        } else {
            self
        }
    }

    #[inline]
    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Largest component.
    #[inline]
    pub fn max_element(self) -> T {
        self.x.max(self.y).max(self.z)
    }
}

impl Vec3<f64> {
    #[inline]
    pub fn cast<T: Scalar>(self) -> Vec3<T> {
        Vec3::new(T::of(self.x), T::of(self.y), T::of(self.z))
    }

    /// Any unit vector orthogonal to `self` (assumed unit).
    pub fn any_orthonormal(self) -> Vec3<f64> {
        let helper = if self.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
        helper.cross(self).normalized()
    }
}

impl<T: Float> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

macro_rules! vec_binop {
    ($ty:ident, $trait:ident, $fn:ident, $op:tt, $($f:ident),+) => {
        impl<T: Float> $trait for $ty<T> {
            type Output = Self;
            #[inline]
            fn $fn(self, o: Self) -> Self {
                Self { $($f: self.$f $op o.$f),+ }
            }
        }
        impl<T: Float> $trait<T> for $ty<T> {
            type Output = Self;
            #[inline]
            fn $fn(self, s: T) -> Self {
                Self { $($f: self.$f $op s),+ }
            }
        }
    };
}

vec_binop!(Vec3, Add, add, +, x, y, z);
vec_binop!(Vec3, Sub, sub, -, x, y, z);
vec_binop!(Vec3, Mul, mul, *, x, y, z);
vec_binop!(Vec3, Div, div, /, x, y, z);

impl<T: Float> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Float> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Float> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

/// Linear RGB triple.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rgb<T> {
    pub r: T,
    pub g: T,
    pub b: T,
}

impl<T: Float> Rgb<T> {
    #[inline]
    pub fn new(r: T, g: T, b: T) -> Self {
        Self { r, g, b }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::splat(T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.r, self.g, self.b]
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn channel(self, c: usize) -> T {
        match c {
            0 => self.r,
            1 => self.g,
            2 => self.b,
            _ => panic!("colour channel {c} out of range"),
        }
    }

    #[inline]
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.r), f(self.g), f(self.b))
    }

    #[inline]
    pub fn sum(self) -> T {
        self.r + self.g + self.b
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.r * o.r + self.g * o.g + self.b * o.b
    }

    #[inline]
    pub fn max_channel(self) -> T {
        self.r.max(self.g).max(self.b)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }

    /// Rec. 709 relative luminance.
    #[inline]
    pub fn luminance(self) -> T {
        let c = |v: f64| T::from(v).unwrap();
        c(0.2126) * self.r + c(0.7152) * self.g + c(0.0722) * self.b
    }
}

impl Rgb<f64> {
    #[inline]
    pub fn cast<T: Scalar>(self) -> Rgb<T> {
        Rgb::new(T::of(self.r), T::of(self.g), T::of(self.b))
    }
}

impl Rgb<f32> {
    #[inline]
    pub fn to_f64(self) -> Rgb<f64> {
        Rgb::new(self.r as f64, self.g as f64, self.b as f64)
    }
}

vec_binop!(Rgb, Add, add, +, r, g, b);
vec_binop!(Rgb, Sub, sub, -, r, g, b);
vec_binop!(Rgb, Mul, mul, *, r, g, b);
vec_binop!(Rgb, Div, div, /, r, g, b);

impl<T: Float> AddAssign for Rgb<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Float> MulAssign<T> for Rgb<T> {
    #[inline]
    fn mul_assign(&mut self, s: T) {
        *self = *self * s;
    }
}

/// Ray with unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3<f64>,
    pub direction: Vec3<f64>,
}

impl Ray {
    pub fn new(origin: Vec3<f64>, direction: Vec3<f64>) -> Self {
        Self { origin, direction }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3<f64> {
        self.origin + self.direction * t
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3<f64>,
    pub max: Vec3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::splat(f64::INFINITY), max: Vec3::splat(f64::NEG_INFINITY) }
    }

    pub fn grow(&mut self, p: Vec3<f64>) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(mut self, o: &Aabb) -> Aabb {
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        self
    }

    pub fn centroid(&self) -> Vec3<f64> {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3<f64> {
        self.max - self.min
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extent();
        if e.x < 0.0 {
            return 0.0;
        }
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn contains(&self, p: Vec3<f64>, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.y >= self.min.y - tol
            && p.z >= self.min.z - tol
            && p.x <= self.max.x + tol
            && p.y <= self.max.y + tol
            && p.z <= self.max.z + tol
    }

    /// Slab test; returns the entry distance if the ray overlaps `[0, t_max]`.
    #[inline]
    pub fn hit(&self, origin: Vec3<f64>, inv_dir: Vec3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let inv = inv_dir[axis];
            let mut near = (self.min[axis] - origin[axis]) * inv;
            let mut far = (self.max[axis] - origin[axis]) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf must not shrink the interval.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Mirror of `incident` (pointing away from the surface) about `normal`.
#[inline]
pub fn reflect<T: Float>(incident: Vec3<T>, normal: Vec3<T>) -> Vec3<T> {
    let two = T::one() + T::one();
    normal * (two * incident.dot(normal)) - incident
}
