//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Ordered field used by the solvers.
///
/// Floating point types get IEEE arithmetic. `Ratio<i128>` gets exact
/// arithmetic for every field operation; only `sqrt` goes through `f64`.
pub trait Scalar:
    Num + NumAssign + Signed + Copy + PartialOrd + Debug + Display + Sum + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;

    /// Membership tolerance used when the caller does not pass one.
    fn default_tol() -> Self;

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn default_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn default_tol() -> Self {
        1e-5
    }
}

/// Exact rational scalar.
pub type Rational = Ratio<i128>;

impl Scalar for Rational {
    fn from_f64(v: f64) -> Self {
        Ratio::approximate_float(v)
            .or_else(|| <Ratio<i128> as FromPrimitive>::from_f64(v))
            .expect("finite value representable as a rational")
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
    fn sqrt(self) -> Self {
        let f = Scalar::to_f64(self).sqrt();
        // keep perfect squares exact
        let r = <Self as Scalar>::from_f64(f);
        if r * r == self {
            return r;
        }
        let (n, d) = (*self.numer(), *self.denom());
        match (isqrt(n), isqrt(d)) {
            (Some(a), Some(b)) => Ratio::new(a, b),
            _ => r,
        }
    }
    fn default_tol() -> Self {
        Ratio::from_integer(0)
    }
}

fn isqrt(v: i128) -> Option<i128> {
    if v < 0 {
        return None;
    }
    let r = (v as f64).sqrt() as i128;
    (r.saturating_sub(1)..=r + 1).find(|c| c * c == v)
}

/// Builds an exact rational `n/d`.
pub fn rational(n: i128, d: i128) -> Rational {
    Ratio::new(n, d)
}
