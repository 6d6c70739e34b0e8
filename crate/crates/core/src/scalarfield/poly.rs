//! Sparse multivariate polynomials over ℚ with exact GCD.
//!
//! Monomials are exponent vectors ordered lexicographically with the first
//! variable most significant; the leading term is the last map entry.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Monomial = Vec<u32>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        MultiPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, BigRational::one())
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; nvars], c);
        }
        MultiPoly { nvars, terms }
    }

    /// The coordinate polynomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut m = vec![0; nvars];
        m[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(m, BigRational::one());
        MultiPoly { nvars, terms }
    }

    pub fn monomial(nvars: usize, exps: Monomial, c: BigRational) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exps, c);
        }
        MultiPoly { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        match self.terms.len() {
            0 => true,
            1 => self.terms.keys().next().unwrap().iter().all(|&e| e == 0),
            _ => false,
        }
    }

    /// Constant value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            Some(BigRational::zero())
        } else if self.is_constant() {
            self.terms.values().next().cloned()
        } else {
            None
        }
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> BigRational {
        self.leading().map(|(_, c)| c.clone()).unwrap_or_else(BigRational::zero)
    }

    fn insert_add(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars, other.nvars);
        let (mut out, rhs) = if self.terms.len() >= other.terms.len() {
            (self.clone(), other)
        } else {
            (other.clone(), self)
        };
        for (m, c) in &rhs.terms {
            out.insert_add(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_add(m.clone(), -c);
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        if k.is_zero() {
            return Self::zero(self.nvars);
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Self::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                out.insert_add(m, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut result = Self::one(self.nvars);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Multiply by `x_v^k`.
    fn shift(&self, v: usize, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut m = m.clone();
                    m[v] += k;
                    (m, c.clone())
                })
                .collect(),
        }
    }

    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            if m[i] > 0 {
                let mut dm = m.clone();
                dm[i] -= 1;
                out.insert_add(dm, c * BigRational::from_integer(BigInt::from(m[i])));
            }
        }
        out
    }

    pub fn degree_in(&self, v: usize) -> u32 {
        self.terms.keys().map(|m| m[v]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    /// Variables with a positive exponent in some term.
    pub fn variables(&self) -> Vec<usize> {
        (0..self.nvars)
            .filter(|&v| self.terms.keys().any(|m| m[v] > 0))
            .collect()
    }

    /// Coefficient of `x_v^k`, as a polynomial free of `x_v`.
    pub fn coeff_in(&self, v: usize, k: u32) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            if m[v] == k {
                let mut m = m.clone();
                m[v] = 0;
                out.terms.insert(m, c.clone());
            }
        }
        out
    }

    fn coeffs_in(&self, v: usize) -> Vec<Self> {
        let d = self.degree_in(v);
        let mut out = vec![Self::zero(self.nvars); d as usize + 1];
        for (m, c) in &self.terms {
            let k = m[v] as usize;
            let mut m = m.clone();
            m[v] = 0;
            out[k].terms.insert(m, c.clone());
        }
        out
    }

    pub fn eval_rational(&self, point: &[BigRational]) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (e, x) in m.iter().zip(point) {
                if *e > 0 {
                    t *= num_traits::pow(x.clone(), *e as usize);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = rational_to_f64(c);
                for (e, x) in m.iter().zip(point) {
                    if *e > 0 {
                        t *= x.powi(*e as i32);
                    }
                }
                t
            })
            .sum()
    }

    /// Terms with coefficients rounded to `f64`, for repeated numeric evaluation.
    pub fn to_f64_terms(&self) -> Vec<(Monomial, f64)> {
        self.terms
            .iter()
            .map(|(m, c)| (m.clone(), rational_to_f64(c)))
            .collect()
    }

    /// Divide by the leading coefficient.
    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some((_, lc)) if lc.is_one() => self.clone(),
            Some((_, lc)) => self.scale(&lc.recip()),
        }
    }

    /// Scale to coprime integer coefficients with positive leading coefficient.
    fn integer_primitive(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            let n = c.numer() * (&den_lcm / c.denom());
            num_gcd = num_gcd.gcd(&n);
        }
        let mut k = BigRational::new(den_lcm, num_gcd);
        if self.leading_coeff().is_negative() {
            k = -k;
        }
        self.scale(&k)
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a remainder.
    pub fn div_exact(&self, divisor: &Self) -> Option<Self> {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        if let Some(c) = divisor.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (lm_d, lc_d) = divisor.leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let mut rem = self.clone();
        let mut quot = Self::zero(self.nvars);
        while let Some((lm_r, lc_r)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            if lm_r.iter().zip(&lm_d).any(|(r, d)| r < d) {
                return None;
            }
            let m: Monomial = lm_r.iter().zip(&lm_d).map(|(r, d)| r - d).collect();
            let t = Self::monomial(self.nvars, m, lc_r / &lc_d);
            rem = rem.sub(&t.mul(divisor));
            quot = quot.add(&t);
        }
        Some(quot)
    }

    /// Monic greatest common divisor. `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.monic();
        }
        if other.is_zero() {
            return self.monic();
        }
        if self.is_constant() || other.is_constant() {
            return Self::one(self.nvars);
        }
        if self == other {
            return self.monic();
        }
        if provably_coprime(self, other) {
            return Self::one(self.nvars);
        }
        if self.len() <= other.len() && other.div_exact(self).is_some() {
            return self.monic();
        }
        if other.len() <= self.len() && self.div_exact(other).is_some() {
            return other.monic();
        }
        if let Some(g) = heuristic_gcd(&self.integer_primitive(), &other.integer_primitive(), 0) {
            return g.monic();
        }
        self.prs_gcd(other)
    }

    /// Recursive primitive-PRS GCD; the slow but unconditional path.
    fn prs_gcd(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.monic();
        }
        if other.is_zero() {
            return self.monic();
        }
        if self.is_constant() || other.is_constant() {
            return Self::one(self.nvars);
        }
        let va = self.variables();
        let vb = other.variables();
        let v = *va.iter().chain(vb.iter()).max().unwrap();
        let in_a = va.contains(&v);
        let in_b = vb.contains(&v);
        if !in_a {
            return self.gcd(&other.content_in(v));
        }
        if !in_b {
            return self.content_in(v).gcd(other);
        }
        let ca = self.content_in(v);
        let cb = other.content_in(v);
        let c = ca.gcd(&cb);
        let pa = self.div_exact(&ca).expect("content divides");
        let pb = other.div_exact(&cb).expect("content divides");
        let g = primitive_prs_gcd(pa, pb, v);
        c.mul(&g).monic()
    }

    /// GCD of the coefficients with respect to `x_v`.
    pub fn content_in(&self, v: usize) -> Self {
        let mut g = Self::zero(self.nvars);
        for c in self.coeffs_in(v) {
            if c.is_zero() {
                continue;
            }
            g = g.gcd(&c);
            if g.is_constant() {
                return Self::one(self.nvars);
            }
        }
        g
    }

    fn primitive_part_in(&self, v: usize) -> Self {
        let c = self.content_in(v);
        let p = if c.is_one() { self.clone() } else { self.div_exact(&c).expect("content divides") };
        p.integer_primitive()
    }
}

/// Substitutes `values` for every variable except `v`.
fn specialize(p: &MultiPoly, v: usize, values: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); p.degree_in(v) as usize + 1];
    for (m, c) in &p.terms {
        let mut t = c.clone();
        for (k, (&e, x)) in m.iter().zip(values).enumerate() {
            if k != v && e > 0 {
                t *= num_traits::pow(x.clone(), e as usize);
            }
        }
        out[m[v] as usize] += t;
    }
    while out.len() > 1 && out.last().is_some_and(Zero::is_zero) {
        out.pop();
    }
    out
}

fn trim(v: &mut Vec<BigRational>) {
    while v.len() > 1 && v.last().is_some_and(Zero::is_zero) {
        v.pop();
    }
}

fn is_zero_dense(v: &[BigRational]) -> bool {
    v.iter().all(Zero::is_zero)
}

/// `a mod b` for dense univariate polynomials; `b` is nonzero and trimmed.
fn rem_dense(mut a: Vec<BigRational>, b: &[BigRational]) -> Vec<BigRational> {
    trim(&mut a);
    let lb = b.last().expect("nonzero divisor");
    while a.len() >= b.len() && !is_zero_dense(&a) {
        let shift = a.len() - b.len();
        let f = a.last().unwrap() / lb;
        for (i, bc) in b.iter().enumerate() {
            a[i + shift] -= &f * bc;
        }
        a.pop();
        trim(&mut a);
    }
    a
}

/// Degree of the univariate GCD of two dense coefficient vectors over ℚ.
fn univariate_gcd_degree(mut a: Vec<BigRational>, mut b: Vec<BigRational>) -> usize {
    trim(&mut a);
    trim(&mut b);
    loop {
        if is_zero_dense(&b) {
            return a.len() - 1;
        }
        let r = rem_dense(a, &b);
        a = b;
        b = r;
    }
}

/// Exact certificate that `gcd(a, b) = 1`. A nonconstant common factor has
/// positive degree in some variable `v`; specializing the other variables at
/// a point where both leading coefficients in `v` survive keeps that factor
/// visible in the univariate images. `false` means "not certified".
fn provably_coprime(a: &MultiPoly, b: &MultiPoly) -> bool {
    const TRIAL_VALUES: [i64; 6] = [3, -2, 5, 7, -11, 13];
    let n = a.nvars;
    for v in 0..n {
        if a.degree_in(v) == 0 || b.degree_in(v) == 0 {
            continue;
        }
        let lca = a.coeff_in(v, a.degree_in(v));
        let lcb = b.coeff_in(v, b.degree_in(v));
        let mut certified = false;
        for attempt in 0..4 {
            let values: Vec<BigRational> = (0..n)
                .map(|k| BigRational::from_integer(BigInt::from(TRIAL_VALUES[(k + attempt) % 6] + attempt as i64)))
                .collect();
            if lca.eval_rational(&values).is_zero() || lcb.eval_rational(&values).is_zero() {
                continue;
            }
            let ua = specialize(a, v, &values);
            let ub = specialize(b, v, &values);
            if univariate_gcd_degree(ua, ub) == 0 {
                certified = true;
            }
            break;
        }
        if !certified {
            return false;
        }
    }
    true
}

impl MultiPoly {
    fn subst(&self, v: usize, value: &BigRational) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut m = m.clone();
            let e = std::mem::replace(&mut m[v], 0);
            out.insert_add(m, c * num_traits::pow(value.clone(), e as usize));
        }
        out
    }

    /// Largest |coefficient| numerator; meaningful for integer polynomials.
    fn max_norm(&self) -> BigInt {
        self.terms.values().map(|c| c.numer().abs()).max().unwrap_or_else(BigInt::zero)
    }

    fn integer_content(&self) -> BigInt {
        self.terms.values().fold(BigInt::zero(), |g, c| g.gcd(c.numer()))
    }
}

/// Writes each integer coefficient of `h` in symmetric base `xi` and reads
/// the digits back as coefficients of powers of `x_v`.
fn interpolate(h: &MultiPoly, xi: &BigInt, v: usize) -> MultiPoly {
    let half = xi / 2;
    let mut out = MultiPoly::zero(h.nvars);
    for (m, c) in &h.terms {
        let mut rest = c.numer().clone();
        let mut k = 0u32;
        while !rest.is_zero() {
            let mut d = rest.mod_floor(xi);
            if d > half {
                d -= xi;
            }
            let mut mk = m.clone();
            mk[v] = k;
            out.insert_add(mk, BigRational::from_integer(d.clone()));
            rest = (rest - d) / xi;
            k += 1;
        }
    }
    out
}

/// Heuristic GCD over ℤ of integer-coefficient polynomials. Returns the
/// GCD (with integer content) on success, `None` when the evaluation
/// points were unlucky. Any returned value divides both inputs.
fn heuristic_gcd(f: &MultiPoly, g: &MultiPoly, depth: usize) -> Option<MultiPoly> {
    let n = f.nvars;
    if f.is_zero() || g.is_zero() {
        return None;
    }
    let c = f.integer_content().gcd(&g.integer_content());
    let cq = BigRational::from_integer(c.clone());
    let (f, g) = (f.scale(&cq.recip()), g.scale(&cq.recip()));
    if f.is_constant() {
        let k = f.integer_content().gcd(&g.integer_content()) * &c;
        return Some(MultiPoly::constant(n, BigRational::from_integer(k)));
    }
    if g.is_constant() {
        let k = g.integer_content().gcd(&f.integer_content()) * &c;
        return Some(MultiPoly::constant(n, BigRational::from_integer(k)));
    }
    if depth > 8 {
        return None;
    }
    let v = *f.variables().iter().chain(g.variables().iter()).max().unwrap();
    let mut xi: BigInt = f.max_norm().min(g.max_norm()) * 2 + 29;
    for _ in 0..6 {
        let xq = BigRational::from_integer(xi.clone());
        let fe = f.subst(v, &xq);
        let ge = g.subst(v, &xq);
        if !fe.is_zero() && !ge.is_zero() {
            if let Some(h) = heuristic_gcd(&fe, &ge, depth + 1) {
                let cand = interpolate(&h, &xi, v).integer_primitive();
                if !cand.is_zero() && f.div_exact(&cand).is_some() && g.div_exact(&cand).is_some() {
                    return Some(cand.scale(&BigRational::from_integer(c)));
                }
            }
        }
        xi = xi * 73794 / 27011;
    }
    None
}

/// Pseudo-remainder of `a` by `b` with respect to `x_v`.
fn pseudo_rem(a: &MultiPoly, b: &MultiPoly, v: usize) -> MultiPoly {
    let db = b.degree_in(v);
    let lcb = b.coeff_in(v, db);
    let mut r = a.clone();
    while !r.is_zero() && r.degree_in(v) >= db {
        let dr = r.degree_in(v);
        let lcr = r.coeff_in(v, dr);
        r = r.mul(&lcb).sub(&lcr.mul(&b.shift(v, dr - db)));
    }
    r
}

/// GCD of two polynomials that are primitive with respect to `x_v`.
fn primitive_prs_gcd(a: MultiPoly, b: MultiPoly, v: usize) -> MultiPoly {
    let (mut a, mut b) = if a.degree_in(v) >= b.degree_in(v) { (a, b) } else { (b, a) };
    a = a.integer_primitive();
    b = b.integer_primitive();
    loop {
        if b.degree_in(v) == 0 {
            return MultiPoly::one(a.nvars);
        }
        let r = pseudo_rem(&a, &b, v);
        if r.is_zero() {
            return b.primitive_part_in(v);
        }
        if r.degree_in(v) == 0 {
            return MultiPoly::one(a.nvars);
        }
        a = b;
        b = r.primitive_part_in(v);
    }
}

pub fn rational_to_f64(c: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (c.numer().to_f64(), c.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    c.to_f64().unwrap_or(f64::NAN)
}

/// Writes a rational in the expression grammar: `3`, `-3/4`.
pub fn fmt_rational(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl MultiPoly {
    /// Renders the polynomial in the expression grammar using `names` for the
    /// variables, highest monomial first.
    pub fn to_expr_string(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            let is_const = m.iter().all(|&e| e == 0);
            if !abs.is_one() || is_const {
                factors.push(fmt_rational(&abs));
            }
            for (v, &e) in m.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(names[v].clone()),
                    _ => factors.push(format!("{}^{}", names[v], e)),
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("x{i}")).collect();
        write!(f, "{}", self.to_expr_string(&names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn x(i: usize) -> MultiPoly {
        MultiPoly::var(3, i)
    }

    fn c(n: i64) -> MultiPoly {
        MultiPoly::constant(3, q(n, 1))
    }

    #[test]
    fn gcd_of_shared_factor() {
        // (x0 + x1)(x0 - 2 x2) and (x0 + x1)(x1 + 3)
        let f = x(0).add(&x(1));
        let a = f.mul(&x(0).sub(&x(2).scale(&q(2, 1))));
        let b = f.mul(&x(1).add(&c(3)));
        assert_eq!(a.gcd(&b), f.monic());
    }

    #[test]
    fn gcd_coprime_is_one() {
        let a = x(0).mul(&x(0)).add(&c(1));
        let b = x(1).sub(&x(0));
        assert!(a.gcd(&b).is_one());
    }

    #[test]
    fn gcd_with_multivariate_content() {
        // x1 * (x0 - 1)^2 and x1^2 * (x0 - 1)
        let f = x(0).sub(&c(1));
        let a = x(1).mul(&f).mul(&f);
        let b = x(1).mul(&x(1)).mul(&f);
        assert_eq!(a.gcd(&b), x(1).mul(&f).monic());
    }

    #[test]
    fn exact_division_detects_remainder() {
        let a = x(0).mul(&x(0)).sub(&c(1));
        let b = x(0).sub(&c(1));
        assert_eq!(a.div_exact(&b).unwrap(), x(0).add(&c(1)));
        assert!(a.div_exact(&x(1)).is_none());
    }

    #[test]
    fn partial_and_eval() {
        let p = x(0).pow(3).scale(&q(1, 2)).add(&x(1));
        assert_eq!(p.partial(0), x(0).pow(2).scale(&q(3, 2)));
        assert_eq!(p.eval_rational(&[q(2, 1), q(1, 3), q(0, 1)]), q(13, 3));
    }

    #[test]
    fn renders_in_grammar() {
        let p = x(0).pow(2).sub(&x(1).scale(&q(3, 4))).add(&c(-2));
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(p.to_expr_string(&names), "a^2 - 3/4*b - 2");
    }
}
