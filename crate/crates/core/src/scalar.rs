use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Real element type the codecs, bounds and simulator are generic over.
///
/// The wire format always carries 32-bit reals; `f64` is used where extra
/// precision matters (finite-difference gradient checks, the simulator).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this type, rounding if needed.
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
