//! Orientation math.
//!
//! Orientations travel as unit quaternions `(w, x, y, z)`. Arithmetic keeps
//! full `f64` precision. [`UnitQuaternion::canonical`] rounds each component
//! to nine significant decimal digits while keeping the norm within
//! [`NORM_TOLERANCE`]; that is exactly what the wire format carries, so
//! canonical values survive an encode/decode cycle bit for bit.

use std::ops::Mul;

/// Allowed deviation of `w² + x² + y² + z²` from one.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Significant decimal digits kept per component.
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MathError {
    #[error("quaternion has non-finite component")]
    NonFinite,
    #[error("quaternion has zero length")]
    ZeroLength,
    #[error("quaternion norm² {norm_sq} is not within {NORM_TOLERANCE} of 1")]
    NotUnit { norm_sq: f64 },
}

/// A raw quaternion with no invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn norm_sq(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion::new(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

fn round_significant(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    // `{:.8e}` rounds to nine significant digits exactly.
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses")
}

/// Value of one unit in the last kept digit of `v`.
fn last_digit_unit(v: f64) -> f64 {
    let exp = v.abs().log10().floor() as i32;
    10f64.powi(exp - (SIGNIFICANT_DIGITS as i32 - 1))
}

/// The two grid values bracketing `v`, nearest first.
fn grid_neighbors(v: f64) -> [f64; 2] {
    let near = round_significant(v);
    if near == v || v == 0.0 {
        return [near, near];
    }
    let unit = last_digit_unit(v);
    let far = if near > v { near - unit } else { near + unit };
    [near, round_significant(far)]
}

/// Rounds each component onto the nine-digit grid while keeping the norm
/// within tolerance. Every component moves by at most one last-digit unit;
/// among the 16 floor/ceil combinations the valid one closest to the input
/// wins, so on-grid input is returned unchanged.
fn snap(q: Quaternion) -> Quaternion {
    let exact = q.to_array();
    let options = exact.map(grid_neighbors);
    let mut best: Option<([f64; 4], f64)> = None;
    for mask in 0u8..16 {
        let c: [f64; 4] = std::array::from_fn(|i| options[i][usize::from(mask >> i & 1)]);
        let norm_err = (c.iter().map(|v| v * v).sum::<f64>() - 1.0).abs();
        if norm_err > NORM_TOLERANCE {
            continue;
        }
        let dev = (0..4).map(|i| (c[i] - exact[i]).abs()).fold(0.0, f64::max);
        if best.is_none_or(|(_, d)| dev < d) {
            best = Some((c, dev));
        }
    }
    // Unreachable for unit-norm input; fall back to plain rounding.
    let c = best.map_or_else(|| exact.map(round_significant), |(c, _)| c);
    Quaternion::new(c[0], c[1], c[2], c[3])
}

/// A quaternion with unit norm within [`NORM_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::new(1.0, 0.0, 0.0, 0.0));

    /// Normalizes any finite, non-zero quaternion.
    pub fn normalize(q: Quaternion) -> Result<Self, MathError> {
        if !q.is_finite() {
            return Err(MathError::NonFinite);
        }
        let n2 = q.norm_sq();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(MathError::ZeroLength);
        }
        // Leave near-unit input undivided so canonical values are fixed points.
        if (n2 - 1.0).abs() <= NORM_TOLERANCE {
            return Ok(UnitQuaternion(q));
        }
        let n = n2.sqrt();
        Ok(UnitQuaternion(Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n)))
    }

    /// Accepts a quaternion only if it is already unit-norm within tolerance.
    pub fn try_unit(q: Quaternion) -> Result<Self, MathError> {
        if !q.is_finite() {
            return Err(MathError::NonFinite);
        }
        let n2 = q.norm_sq();
        if (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(MathError::NotUnit { norm_sq: n2 });
        }
        Ok(UnitQuaternion(q))
    }

    /// Rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self, MathError> {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !len.is_finite() || !angle.is_finite() {
            return Err(MathError::NonFinite);
        }
        if len == 0.0 {
            return Err(MathError::ZeroLength);
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Self::normalize(Quaternion::new(
            c,
            s * axis[0] / len,
            s * axis[1] / len,
            s * axis[2] / len,
        ))
    }

    /// Wire form: every component on the nine-digit grid, each moved by at
    /// most one unit in its last digit.
    pub fn canonical(&self) -> UnitQuaternion {
        UnitQuaternion(snap(self.0))
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical() == *self
    }

    pub fn quaternion(&self) -> Quaternion {
        self.0
    }

    pub fn to_array(&self) -> [f64; 4] {
        self.0.to_array()
    }

    pub fn conjugate(&self) -> Self {
        UnitQuaternion(self.0.conjugate())
    }

    /// Applies `self` first, then `then`.
    pub fn then(&self, then: &UnitQuaternion) -> UnitQuaternion {
        let p = then.0 * self.0;
        let n = p.norm_sq().sqrt();
        UnitQuaternion(Quaternion::new(p.w / n, p.x / n, p.y / n, p.z / n))
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = self.0;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Composes two rotations: `first` is applied, then `second`. The result is
/// the normalized Hamilton product `second · first`.
pub fn compose_rotation(first: Quaternion, second: Quaternion) -> Result<UnitQuaternion, MathError> {
    let first = UnitQuaternion::try_unit(first)?;
    let second = UnitQuaternion::try_unit(second)?;
    Ok(first.then(&second))
}
