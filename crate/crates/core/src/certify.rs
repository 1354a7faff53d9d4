//! Upper-bound arithmetic for rounding-error bars.
//!
//! Error bars are carried as 64-bit MPFR floats and every operation on them
//! rounds toward `+inf`, so a bar computed here is never smaller than the true
//! bound it tracks.

use rug::float::Round;
use rug::ops::{AddAssignRound, MulAssignRound};
use rug::Float;

pub(crate) const BAR_PREC: u32 = 64;

/// `value` rounded up to bar precision.
pub(crate) fn up<T>(value: T) -> Float
where
    Float: rug::Assign<T> + rug::ops::AssignRound<T, Round = Round, Ordering = std::cmp::Ordering>,
{
    Float::with_val_round(BAR_PREC, value, Round::Up).0
}

pub(crate) fn zero() -> Float {
    Float::new(BAR_PREC)
}

pub(crate) fn add_up(a: &Float, b: &Float) -> Float {
    let mut r = up(a);
    r.add_assign_round(b, Round::Up);
    r
}

pub(crate) fn mul_up(a: &Float, b: &Float) -> Float {
    let mut r = up(a);
    r.mul_assign_round(b, Round::Up);
    r
}

/// `|x|` rounded up.
pub(crate) fn abs_up(x: &Float) -> Float {
    up(&*x.as_abs())
}

/// The unit roundoff bound `2^-prec` for round-to-nearest at `prec` bits.
pub(crate) fn unit(prec: u32) -> Float {
    let mut u = Float::with_val(BAR_PREC, 1);
    u >>= prec;
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_goes_up() {
        let third = up(rug::Rational::from((1, 3)));
        assert!(third > rug::Rational::from((1, 3)));
        let sum = add_up(&third, &third);
        assert!(sum >= rug::Rational::from((2, 3)));
        assert_eq!(unit(53), f64::EPSILON / 2.0);
        assert!(mul_up(&third, &up(3)) >= 1);
        assert_eq!(abs_up(&Float::with_val(53, -2.5)), 2.5);
    }
}
