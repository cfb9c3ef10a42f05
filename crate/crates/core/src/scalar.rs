//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Real`], which is implemented for `f32` and
//! `f64`. The dense SVD is the only routine that needs a concrete backend, so
//! it is exposed as a trait method and dispatched per type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use nalgebra::DMatrix;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Raw output of the backend SVD: `u` is `rows x p` and `vt` is `p x cols`,
/// both row-major, with `p = min(rows, cols)`. Singular values are not sorted.
pub struct RawSvd<T> {
    pub u: Vec<T>,
    pub s: Vec<T>,
    pub vt: Vec<T>,
}

/// A real floating-point scalar.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in target scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Dense SVD of a row-major `rows x cols` matrix. Returns `None` when the
    /// iteration does not converge.
    fn svd_raw(rows: usize, cols: usize, data: &[Self], vectors: bool) -> Option<RawSvd<Self>>;
}

const MAX_SVD_ITERATIONS: usize = 100_000;

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn svd_raw(
                rows: usize,
                cols: usize,
                data: &[Self],
                vectors: bool,
            ) -> Option<RawSvd<Self>> {
                let m = DMatrix::<$t>::from_row_slice(rows, cols, data);
                let svd = m.try_svd(vectors, vectors, <$t>::EPSILON, MAX_SVD_ITERATIONS)?;
                let s = svd.singular_values.iter().copied().collect();
                let (u, vt) = match (svd.u, svd.v_t) {
                    (Some(u), Some(vt)) => (row_major(&u), row_major(&vt)),
                    _ => (Vec::new(), Vec::new()),
                };
                Some(RawSvd { u, s, vt })
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

fn row_major<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
