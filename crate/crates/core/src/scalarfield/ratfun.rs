//! Reduced multivariate rational functions over ℚ.

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::MultiPoly;
use crate::error::{Error, Result};

/// `num / den` with `gcd(num, den) = 1` and `den` monic. Zero is `0 / 1`.
///
/// The representation is canonical, so structural equality is equality of
/// rational functions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: MultiPoly,
    den: MultiPoly,
}

impl RationalFunction {
    pub fn from_poly(p: MultiPoly) -> Self {
        let nvars = p.nvars();
        RationalFunction { num: p, den: MultiPoly::one(nvars) }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        Self::from_poly(MultiPoly::constant(nvars, c))
    }

    pub fn zero(nvars: usize) -> Self {
        Self::from_poly(MultiPoly::zero(nvars))
    }

    pub fn one(nvars: usize) -> Self {
        Self::from_poly(MultiPoly::one(nvars))
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::from_poly(MultiPoly::var(nvars, i))
    }

    /// Builds and reduces `num / den`.
    pub fn new(num: MultiPoly, den: MultiPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Pole("denominator is the zero polynomial".into()));
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: MultiPoly, den: MultiPoly) -> Self {
        let nvars = num.nvars();
        if num.is_zero() {
            return Self::zero(nvars);
        }
        let g = num.gcd(&den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_exact(&g).expect("gcd divides"), den.div_exact(&g).expect("gcd divides"))
        };
        let lc = den.leading_coeff();
        if lc.is_one() {
            RationalFunction { num, den }
        } else {
            let inv = lc.recip();
            RationalFunction { num: num.scale(&inv), den: den.scale(&inv) }
        }
    }

    pub fn numer(&self) -> &MultiPoly {
        &self.num
    }

    pub fn denom(&self) -> &MultiPoly {
        &self.den
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            return Self::reduce(self.num.add(&other.num), self.den.clone());
        }
        if self.den.is_one() {
            return Self::reduce(self.num.mul(&other.den).add(&other.num), other.den.clone());
        }
        if other.den.is_one() {
            return Self::reduce(self.num.add(&other.num.mul(&self.den)), self.den.clone());
        }
        let g = self.den.gcd(&other.den);
        let a_cof = self.den.div_exact(&g).expect("gcd divides");
        let b_cof = other.den.div_exact(&g).expect("gcd divides");
        let num = self.num.mul(&b_cof).add(&other.num.mul(&a_cof));
        let den = self.den.mul(&b_cof);
        Self::reduce(num, den)
    }

    pub fn neg(&self) -> Self {
        RationalFunction { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.nvars());
        }
        // Cross-cancel first so the product is already reduced.
        let g1 = self.num.gcd(&other.den);
        let g2 = other.num.gcd(&self.den);
        let n1 = self.num.div_exact(&g1).expect("gcd divides");
        let d2 = other.den.div_exact(&g1).expect("gcd divides");
        let n2 = other.num.div_exact(&g2).expect("gcd divides");
        let d1 = self.den.div_exact(&g2).expect("gcd divides");
        let num = n1.mul(&n2);
        let den = d1.mul(&d2);
        let lc = den.leading_coeff();
        let inv = lc.recip();
        RationalFunction { num: num.scale(&inv), den: den.scale(&inv) }
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        if k.is_zero() {
            return Self::zero(self.nvars());
        }
        RationalFunction { num: self.num.scale(k), den: self.den.clone() }
    }

    pub fn recip(&self) -> Result<Self> {
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn powi(&self, k: i32) -> Result<Self> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let e = k.unsigned_abs();
        Ok(RationalFunction { num: base.num.pow(e), den: base.den.pow(e) })
    }

    /// Quotient rule; the result is reduced.
    pub fn partial(&self, i: usize) -> Self {
        if self.den.is_one() {
            return Self::from_poly(self.num.partial(i));
        }
        let dn = self.num.partial(i);
        let dd = self.den.partial(i);
        if dd.is_zero() {
            return Self::reduce(dn, self.den.clone());
        }
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        Self::reduce(num, self.den.mul(&self.den))
    }

    pub fn variables(&self) -> Vec<usize> {
        let mut v = self.num.variables();
        v.extend(self.den.variables());
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn eval_rational(&self, point: &[BigRational]) -> Result<BigRational> {
        let d = self.den.eval_rational(point);
        if d.is_zero() {
            return Err(Error::Pole(format!("denominator {:?} vanishes", self.den)));
        }
        Ok(self.num.eval_rational(point) / d)
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<f64> {
        let d = self.den.eval_f64(point);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Pole(format!("denominator {:?} vanishes", self.den)));
        }
        Ok(self.num.eval_f64(point) / d)
    }

    pub fn to_expr_string(&self, names: &[String]) -> String {
        let num = self.num.to_expr_string(names);
        if self.den.is_one() {
            return num;
        }
        let num = if self.num.len() > 1 { format!("({num})") } else { num };
        let den = self.den.to_expr_string(names);
        let den_is_atom = self.den.len() == 1 && {
            let (m, c) = self.den.leading().unwrap();
            c.is_one() && m.iter().filter(|&&e| e > 0).count() == 1
        };
        if den_is_atom {
            format!("{num}/{den}")
        } else {
            format!("{num}/({den})")
        }
    }
}

impl std::fmt::Debug for RationalFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den.is_one() {
            write!(f, "{:?}", self.num)
        } else {
            write!(f, "({:?})/({:?})", self.num, self.den)
        }
    }
}
