//! Exact rational algebra on `A_i = x_i |x|^-2`, `B = |x|^-2`, `C = |x|^-alpha`.
//!
//! The functions obey the closed differentiation rules
//!
//! ```text
//! d_j A_i = delta_ij B - 2 A_i A_j,   d_j B = -2 A_j B,   d_j C = -alpha A_j C,
//! ```
//!
//! so every derivative of the Riesz kernel `K = C` is a finite sum of
//! monomials `A^gamma B^b C`. In the other direction, any product
//! `D_{i_1..i_n} = A_{i_1} ... A_{i_n} C` is a finite combination of `n`-th
//! order derivatives of `K`, obtained by the recursion
//!
//! ```text
//! D_{i_1..i_m} = ( d_{i_m} D_{i_1..i_{m-1}}
//!                  - 1/(d-m-alpha) sum_{j : i_j = i_m} sum_k d_k D_{i_1..k..i_{m-1}} )
//!                / (2-2m-alpha),
//! ```
//!
//! with the `k` replacing position `j`. Coefficients are kept as rational
//! functions of a symbolic `alpha` whose denominators are products of the
//! linear factors `(c - alpha)` met in the recursion.
//!
//! Indices are 0-based throughout the API; text dumps print them 1-based.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exponent vector `beta` of a partial derivative `d^beta`, one entry per axis.
pub type MultiIndex = Vec<u32>;

/// Largest derivative order accepted by [`kernel_derivative`].
pub const MAX_DERIVATIVE_ORDER: u32 = 24;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational function of `alpha`: a polynomial with rational coefficients over
/// a product of linear factors `(c - alpha)^e`, `c` an integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlphaRatio {
    /// Ascending coefficients of the numerator polynomial in `alpha`.
    num: Vec<BigRational>,
    /// Multiplicity of each root `c` in the denominator.
    den: BTreeMap<i64, u32>,
}

impl AlphaRatio {
    pub fn zero() -> Self {
        AlphaRatio {
            num: Vec::new(),
            den: BTreeMap::new(),
        }
    }

    pub fn constant(q: BigRational) -> Self {
        let mut r = AlphaRatio {
            num: vec![q],
            den: BTreeMap::new(),
        };
        r.normalize();
        r
    }

    pub fn int(n: i64) -> Self {
        AlphaRatio::constant(rat(n))
    }

    /// The polynomial `c0 + c1 alpha`.
    pub fn linear(c0: i64, c1: i64) -> Self {
        let mut r = AlphaRatio {
            num: vec![rat(c0), rat(c1)],
            den: BTreeMap::new(),
        };
        r.normalize();
        r
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    pub fn numerator(&self) -> &[BigRational] {
        &self.num
    }

    /// Denominator roots `c` with multiplicities.
    pub fn denominator(&self) -> &BTreeMap<i64, u32> {
        &self.den
    }

    fn normalize(&mut self) {
        while self.num.last().is_some_and(|c| c.is_zero()) {
            self.num.pop();
        }
        if self.num.is_empty() {
            self.den.clear();
            return;
        }
        let roots: Vec<i64> = self.den.keys().copied().collect();
        for c in roots {
            let cq = rat(c);
            loop {
                let e = self.den[&c];
                if e == 0 || !poly_eval(&self.num, &cq).is_zero() {
                    break;
                }
                // num / (c - alpha) = -(num / (alpha - c))
                self.num = poly_div_root(&self.num, &cq)
                    .into_iter()
                    .map(|v| -v)
                    .collect();
                if e == 1 {
                    self.den.remove(&c);
                    break;
                }
                self.den.insert(c, e - 1);
            }
        }
    }

    pub fn add(&self, other: &AlphaRatio) -> AlphaRatio {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let mut den = self.den.clone();
        for (c, e) in &other.den {
            let slot = den.entry(*c).or_insert(0);
            *slot = (*slot).max(*e);
        }
        let lift = |r: &AlphaRatio| {
            let mut p = r.num.clone();
            for (c, e) in &den {
                let have = r.den.get(c).copied().unwrap_or(0);
                for _ in have..*e {
                    p = poly_mul(&p, &[rat(*c), rat(-1)]);
                }
            }
            p
        };
        let (a, b) = (lift(self), lift(other));
        let len = a.len().max(b.len());
        let num = (0..len)
            .map(|i| {
                a.get(i).cloned().unwrap_or_else(BigRational::zero)
                    + b.get(i).cloned().unwrap_or_else(BigRational::zero)
            })
            .collect();
        let mut r = AlphaRatio { num, den };
        r.normalize();
        r
    }

    pub fn neg(&self) -> AlphaRatio {
        AlphaRatio {
            num: self.num.iter().map(|c| -c).collect(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &AlphaRatio) -> AlphaRatio {
        if self.is_zero() || other.is_zero() {
            return AlphaRatio::zero();
        }
        let mut den = self.den.clone();
        for (c, e) in &other.den {
            *den.entry(*c).or_insert(0) += e;
        }
        let mut r = AlphaRatio {
            num: poly_mul(&self.num, &other.num),
            den,
        };
        r.normalize();
        r
    }

    pub fn scale(&self, q: &BigRational) -> AlphaRatio {
        let mut r = AlphaRatio {
            num: self.num.iter().map(|c| c * q).collect(),
            den: self.den.clone(),
        };
        r.normalize();
        r
    }

    /// Divides by the linear factor `(c - alpha)`.
    pub fn div_linear(&self, c: i64) -> AlphaRatio {
        if self.is_zero() {
            return AlphaRatio::zero();
        }
        let mut r = self.clone();
        *r.den.entry(c).or_insert(0) += 1;
        r.normalize();
        r
    }

    /// Exact value at rational `alpha`; `None` on a vanishing denominator.
    pub fn eval(&self, alpha: &BigRational) -> Option<BigRational> {
        let mut den = BigRational::one();
        for (c, e) in &self.den {
            let f = rat(*c) - alpha;
            if f.is_zero() {
                return None;
            }
            for _ in 0..*e {
                den *= &f;
            }
        }
        Some(poly_eval(&self.num, alpha) / den)
    }

    pub fn eval_f64(&self, alpha: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.num.iter().rev() {
            acc = acc * alpha + c.to_f64().unwrap_or(f64::NAN);
        }
        for (c, e) in &self.den {
            acc /= (*c as f64 - alpha).powi(*e as i32);
        }
        acc
    }
}

impl fmt::Display for AlphaRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for (p, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let coef = c.to_string();
            parts.push(match p {
                0 => coef,
                1 => format!("{coef}*alpha"),
                _ => format!("{coef}*alpha^{p}"),
            });
        }
        write!(f, "({})", parts.join(" + "))?;
        if !self.den.is_empty() {
            let facs: Vec<String> = self
                .den
                .iter()
                .map(|(c, e)| {
                    if *e == 1 {
                        format!("({c} - alpha)")
                    } else {
                        format!("({c} - alpha)^{e}")
                    }
                })
                .collect();
            write!(f, "/({})", facs.join("*"))?;
        }
        Ok(())
    }
}

fn poly_eval(p: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Quotient of `p` by `(alpha - c)`, assuming `c` is a root.
fn poly_div_root(p: &[BigRational], c: &BigRational) -> Vec<BigRational> {
    let deg = p.len() - 1;
    let mut q = vec![BigRational::zero(); deg];
    let mut carry = BigRational::zero();
    for k in (1..=deg).rev() {
        carry = &p[k] + carry * c;
        q[k - 1] = carry.clone();
    }
    q
}

/// `A_{i_1} ... A_{i_k} B^b C`, with the indices kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    a_indices: Vec<u8>,
    b_power: u32,
}

impl Monomial {
    pub fn new(mut a_indices: Vec<u8>, b_power: u32) -> Self {
        a_indices.sort_unstable();
        Monomial { a_indices, b_power }
    }

    /// The bare kernel `C`.
    pub fn kernel() -> Self {
        Monomial::new(Vec::new(), 0)
    }

    pub fn a_indices(&self) -> &[u8] {
        &self.a_indices
    }

    pub fn b_power(&self) -> u32 {
        self.b_power
    }

    /// Minus the homogeneity degree excluding `C`: each `A` counts 1, each `B` 2.
    pub fn degree(&self) -> u32 {
        self.a_indices.len() as u32 + 2 * self.b_power
    }

    fn with_a(&self, j: u8) -> Monomial {
        let mut a = self.a_indices.clone();
        let pos = a.partition_point(|x| *x <= j);
        a.insert(pos, j);
        Monomial {
            a_indices: a,
            b_power: self.b_power,
        }
    }

    /// Value of the monomial at `x` divided by `|x|^-alpha`, exactly.
    pub fn eval_exact(&self, x: &[BigRational]) -> BigRational {
        let r2: BigRational = x.iter().map(|v| v * v).fold(BigRational::zero(), |a, b| a + b);
        let mut v = BigRational::one();
        for i in &self.a_indices {
            v *= &x[*i as usize];
        }
        let k = self.a_indices.len() as u32 + self.b_power;
        let mut p = BigRational::one();
        for _ in 0..k {
            p *= &r2;
        }
        v / p
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.a_indices {
            write!(f, "A{}*", i + 1)?;
        }
        if self.b_power > 0 {
            write!(f, "B^{}*", self.b_power)?;
        }
        write!(f, "C")
    }
}

/// Finite linear combination of basis keys with coefficients rational in `alpha`.
///
/// Keys are [`Monomial`]s (monomial basis) or [`MultiIndex`]es standing for
/// `d^beta K_alpha` (derivative basis). Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicExpansion<K: Ord> {
    terms: BTreeMap<K, AlphaRatio>,
}

pub type MonomialExpansion = SymbolicExpansion<Monomial>;
pub type DerivativeExpansion = SymbolicExpansion<MultiIndex>;

impl<K: Ord + Clone> Default for SymbolicExpansion<K> {
    fn default() -> Self {
        SymbolicExpansion {
            terms: BTreeMap::new(),
        }
    }
}

impl<K: Ord + Clone> SymbolicExpansion<K> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(key: K, coeff: AlphaRatio) -> Self {
        let mut e = Self::zero();
        e.add_term(key, &coeff);
        e
    }

    pub fn add_term(&mut self, key: K, coeff: &AlphaRatio) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(c) => {
                let s = c.add(coeff);
                if s.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *c = s;
                }
            }
            None => {
                self.terms.insert(key, coeff.clone());
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c);
        }
        out
    }

    pub fn mul_coeff(&self, c: &AlphaRatio) -> Self {
        let mut out = Self::zero();
        for (k, v) in &self.terms {
            out.add_term(k.clone(), &v.mul(c));
        }
        out
    }

    pub fn terms(&self) -> &BTreeMap<K, AlphaRatio> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &AlphaRatio)> {
        self.terms.iter()
    }
}

/// `d_j` of a monomial-basis expansion.
pub fn differentiate(expr: &MonomialExpansion, j: usize) -> MonomialExpansion {
    let j = j as u8;
    let mut out = MonomialExpansion::zero();
    for (mono, coeff) in expr.iter() {
        // d_j A_i = delta_ij B - 2 A_i A_j, once per occurrence of A_i
        let seen = mono.a_indices.iter().filter(|i| **i == j).count();
        if seen > 0 {
            let mut a = mono.a_indices.clone();
            let p = a.iter().position(|x| *x == j).expect("index present");
            a.remove(p);
            let reduced = Monomial {
                a_indices: a,
                b_power: mono.b_power + 1,
            };
            out.add_term(reduced, &coeff.scale(&rat(seen as i64)));
        }
        // every A factor, every B factor and C each add one A_j
        let k = mono.a_indices.len() as i64;
        let b = mono.b_power as i64;
        let factor = AlphaRatio::linear(-2 * k - 2 * b, -1);
        out.add_term(mono.with_a(j), &coeff.mul(&factor));
    }
    out
}

/// Monomial expansion of `d^beta K_alpha`.
pub fn kernel_derivative(beta: &[u32]) -> Result<MonomialExpansion> {
    let order: u32 = beta.iter().sum();
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::Parameter(format!(
            "derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}"
        )));
    }
    let mut e = MonomialExpansion::single(Monomial::kernel(), AlphaRatio::int(1));
    for (axis, count) in beta.iter().enumerate() {
        for _ in 0..*count {
            e = differentiate(&e, axis);
        }
    }
    Ok(e)
}

/// Exact checks of the lemma hypothesis for products of up to `n` factors in
/// dimension `d`: fails on the first `m` whose denominator vanishes at `alpha`.
pub fn check_hypothesis(n: usize, d: usize, alpha: &BigRational) -> Result<()> {
    for m in 1..=n {
        if rat(2 - 2 * m as i64) == *alpha {
            return Err(Error::Hypothesis {
                m,
                denominator: format!("2 - 2m - alpha = {} - alpha", 2 - 2 * m as i64),
            });
        }
        if m >= 2 && rat(d as i64 - m as i64) == *alpha {
            return Err(Error::Hypothesis {
                m,
                denominator: format!("d - m - alpha = {} - alpha", d as i64 - m as i64),
            });
        }
    }
    Ok(())
}

/// The `alpha` values at which the recursion breaks down for some product of
/// at most `n` factors: `{2 - 2m : 1 <= m <= n} U {d - m : 2 <= m <= n}`.
pub fn rejected_alphas(d: usize, n: usize) -> BTreeSet<i64> {
    let mut s = BTreeSet::new();
    for m in 1..=n as i64 {
        s.insert(2 - 2 * m);
        if m >= 2 {
            s.insert(d as i64 - m);
        }
    }
    s
}

/// Memoized builder of `D_{i_1..i_n}` expansions in a fixed dimension.
#[derive(Debug)]
pub struct KernelAlgebra {
    d: usize,
    d_memo: HashMap<Vec<u8>, DerivativeExpansion>,
    kd_memo: HashMap<MultiIndex, MonomialExpansion>,
    divisors: BTreeSet<i64>,
}

impl KernelAlgebra {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter(format!("dimension must be >= 2, got {d}")));
        }
        Ok(KernelAlgebra {
            d,
            d_memo: HashMap::new(),
            kd_memo: HashMap::new(),
            divisors: BTreeSet::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Roots `c` of every factor `(c - alpha)` divided by so far.
    pub fn divisors_used(&self) -> &BTreeSet<i64> {
        &self.divisors
    }

    fn check_indices(&self, indices: &[usize]) -> Result<Vec<u8>> {
        let mut key = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.d {
                return Err(Error::Parameter(format!(
                    "index {i} out of range for d = {}",
                    self.d
                )));
            }
            key.push(i as u8);
        }
        key.sort_unstable();
        Ok(key)
    }

    /// Derivative-basis expansion of `D_indices` with symbolic `alpha`.
    pub fn expand_d_symbolic(&mut self, indices: &[usize]) -> Result<DerivativeExpansion> {
        let key = self.check_indices(indices)?;
        Ok(self.expand_sorted(&key))
    }

    fn expand_sorted(&mut self, key: &[u8]) -> DerivativeExpansion {
        if let Some(e) = self.d_memo.get(key) {
            return e.clone();
        }
        let d = self.d;
        let m = key.len();
        let result = if m == 0 {
            DerivativeExpansion::single(vec![0; d], AlphaRatio::int(1))
        } else {
            let last = key[m - 1];
            let rest = &key[..m - 1];
            let mut acc = shift(&self.expand_sorted(rest), last as usize);
            let repeats = rest.iter().filter(|i| **i == last).count();
            if repeats > 0 {
                let pos = rest.iter().position(|i| *i == last).expect("repeat present");
                let mut div = DerivativeExpansion::zero();
                for k in 0..d {
                    let mut replaced = rest.to_vec();
                    replaced[pos] = k as u8;
                    replaced.sort_unstable();
                    div = div.add(&shift(&self.expand_sorted(&replaced), k));
                }
                let c = d as i64 - m as i64;
                self.divisors.insert(c);
                let coeff = AlphaRatio::int(-(repeats as i64)).div_linear(c);
                acc = acc.add(&div.mul_coeff(&coeff));
            }
            let c = 2 - 2 * m as i64;
            self.divisors.insert(c);
            acc.mul_coeff(&AlphaRatio::int(1).div_linear(c))
        };
        self.d_memo.insert(key.to_vec(), result.clone());
        result
    }

    /// `D_indices = sum_beta c_beta d^beta K_alpha` at a rational `alpha`.
    pub fn expand_d(
        &mut self,
        indices: &[usize],
        alpha: &BigRational,
    ) -> Result<BTreeMap<MultiIndex, BigRational>> {
        check_hypothesis(indices.len(), self.d, alpha)?;
        let e = self.expand_d_symbolic(indices)?;
        specialize(&e, alpha)
    }

    /// Symbolic expansion of `p(x|x|^-2) |x|^-alpha` in the derivative basis.
    pub fn expand_polynomial_symbolic(&mut self, p: &Polynomial) -> Result<DerivativeExpansion> {
        let mut out = DerivativeExpansion::zero();
        for (gamma, c) in p.terms() {
            if gamma.len() != self.d {
                return Err(Error::Dimension(format!(
                    "monomial exponent has {} entries, d = {}",
                    gamma.len(),
                    self.d
                )));
            }
            let indices = exponent_to_indices(gamma);
            let e = self.expand_d_symbolic(&indices)?;
            out = out.add(&e.mul_coeff(&AlphaRatio::constant(c.clone())));
        }
        Ok(out)
    }

    /// [`Self::expand_polynomial_symbolic`] specialized to rational `alpha`.
    pub fn expand_polynomial_times_kernel(
        &mut self,
        p: &Polynomial,
        alpha: &BigRational,
    ) -> Result<BTreeMap<MultiIndex, BigRational>> {
        check_hypothesis(p.degree() as usize, self.d, alpha)?;
        let e = self.expand_polynomial_symbolic(p)?;
        specialize(&e, alpha)
    }

    /// Memoized [`kernel_derivative`].
    pub fn kernel_derivative(&mut self, beta: &[u32]) -> Result<MonomialExpansion> {
        if beta.len() != self.d {
            return Err(Error::Dimension(format!(
                "multi-index has {} entries, d = {}",
                beta.len(),
                self.d
            )));
        }
        if let Some(e) = self.kd_memo.get(beta) {
            return Ok(e.clone());
        }
        let order: u32 = beta.iter().sum();
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::Parameter(format!(
                "derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}"
            )));
        }
        let e = match beta.iter().rposition(|b| *b > 0) {
            None => MonomialExpansion::single(Monomial::kernel(), AlphaRatio::int(1)),
            Some(axis) => {
                let mut lower = beta.to_vec();
                lower[axis] -= 1;
                let prev = self.kernel_derivative(&lower)?;
                differentiate(&prev, axis)
            }
        };
        self.kd_memo.insert(beta.to_vec(), e.clone());
        Ok(e)
    }

    /// Exact value of `sum_beta c_beta d^beta K_alpha` at rational `x`,
    /// divided by the common factor `|x|^-alpha`.
    pub fn eval_derivative_expansion(
        &mut self,
        expansion: &BTreeMap<MultiIndex, BigRational>,
        alpha: &BigRational,
        x: &[BigRational],
    ) -> Result<BigRational> {
        let mut total = BigRational::zero();
        for (beta, c) in expansion {
            let kd = self.kernel_derivative(beta)?;
            total += c * eval_monomial_expansion(&kd, alpha, x)?;
        }
        Ok(total)
    }

    /// Checks `D_indices == sum c_beta d^beta K_alpha` exactly at each point.
    pub fn verify_d(
        &mut self,
        indices: &[usize],
        alpha: &BigRational,
        points: &[Vec<BigRational>],
    ) -> Result<bool> {
        let expansion = self.expand_d(indices, alpha)?;
        let product = Monomial::new(indices.iter().map(|i| *i as u8).collect(), 0);
        for x in points {
            let lhs = product.eval_exact(x);
            let rhs = self.eval_derivative_expansion(&expansion, alpha, x)?;
            if lhs != rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl KernelAlgebra {
    /// Checks `p(x|x|^-2) |x|^-alpha == sum c_beta d^beta K_alpha` exactly at
    /// each point.
    pub fn verify_polynomial(
        &mut self,
        p: &Polynomial,
        alpha: &BigRational,
        points: &[Vec<BigRational>],
    ) -> Result<bool> {
        let expansion = self.expand_polynomial_times_kernel(p, alpha)?;
        for x in points {
            let lhs = p.eval_kelvin(x);
            let rhs = self.eval_derivative_expansion(&expansion, alpha, x)?;
            if lhs != rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Adds one to `beta[axis]` in every key: `d_axis` applied to a derivative-basis expansion.
fn shift(e: &DerivativeExpansion, axis: usize) -> DerivativeExpansion {
    let mut out = DerivativeExpansion::zero();
    for (beta, c) in e.iter() {
        let mut b = beta.clone();
        b[axis] += 1;
        out.add_term(b, c);
    }
    out
}

fn specialize(
    e: &DerivativeExpansion,
    alpha: &BigRational,
) -> Result<BTreeMap<MultiIndex, BigRational>> {
    let mut out = BTreeMap::new();
    for (beta, c) in e.iter() {
        let v = c.eval(alpha).ok_or_else(|| Error::Hypothesis {
            m: beta.iter().sum::<u32>() as usize,
            denominator: c.to_string(),
        })?;
        if !v.is_zero() {
            out.insert(beta.clone(), v);
        }
    }
    Ok(out)
}

/// Exact value of a monomial expansion at rational `x`, divided by `|x|^-alpha`.
pub fn eval_monomial_expansion(
    e: &MonomialExpansion,
    alpha: &BigRational,
    x: &[BigRational],
) -> Result<BigRational> {
    if x.iter().all(|v| v.is_zero()) {
        return Err(Error::Parameter("evaluation point must be nonzero".into()));
    }
    let mut total = BigRational::zero();
    for (mono, c) in e.iter() {
        let cv = c
            .eval(alpha)
            .ok_or_else(|| Error::Parameter(format!("coefficient {c} singular at alpha")))?;
        total += cv * mono.eval_exact(x);
    }
    Ok(total)
}

fn exponent_to_indices(gamma: &[u32]) -> Vec<usize> {
    gamma
        .iter()
        .enumerate()
        .flat_map(|(i, e)| std::iter::repeat_n(i, *e as usize))
        .collect()
}

/// Polynomial in `d` variables with rational coefficients, keyed by exponent vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    d: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Polynomial {
    pub fn new(d: usize) -> Self {
        Polynomial {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(exponents: &[u32]) -> Self {
        let mut p = Polynomial::new(exponents.len());
        p.add_term(exponents, BigRational::one());
        p
    }

    pub fn add_term(&mut self, exponents: &[u32], c: BigRational) {
        assert_eq!(exponents.len(), self.d, "exponent length must equal d");
        let slot = self
            .terms
            .entry(exponents.to_vec())
            .or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(exponents);
        }
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, BigRational> {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|g| g.iter().sum()).max().unwrap_or(0)
    }

    /// Exact value of `p(x |x|^-2)` at rational `x`.
    pub fn eval_kelvin(&self, x: &[BigRational]) -> BigRational {
        let r2: BigRational = x.iter().map(|v| v * v).fold(BigRational::zero(), |a, b| a + b);
        let y: Vec<BigRational> = x.iter().map(|v| v / &r2).collect();
        let mut total = BigRational::zero();
        for (g, c) in &self.terms {
            let mut t = c.clone();
            for (yi, e) in y.iter().zip(g) {
                for _ in 0..*e {
                    t *= yi;
                }
            }
            total += t;
        }
        total
    }
}

/// All exponent vectors in `d` variables with total degree exactly `deg`.
pub fn exponents_of_degree(d: usize, deg: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == d - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(d, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, deg, &mut Vec::new(), &mut out);
    out
}

/// Plain-text dump, one line per term: `beta=(b1,...,bd) coeff=p(alpha)/q(alpha)`.
pub fn format_expansion(e: &DerivativeExpansion) -> String {
    let mut s = String::new();
    for (beta, c) in e.iter() {
        let b: Vec<String> = beta.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("beta=({}) coeff={}\n", b.join(","), c));
    }
    s
}

/// Parses `p/q` or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parameter(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(p, q))
    } else if let Ok(i) = s.parse::<BigInt>() {
        Ok(BigRational::from_integer(i))
    } else {
        // finite decimals such as 2.5
        let v: f64 = s.parse().map_err(|_| bad())?;
        BigRational::from_float(v).ok_or_else(bad)
    }
}

/// Numeric form of a monomial expansion, for fast floating-point evaluation.
#[derive(Clone, Debug)]
pub struct CompiledKernelDerivative {
    alpha: f64,
    /// (coefficient, per-axis power of x, power k of |x|^-2)
    terms: Vec<(f64, Vec<i32>, i32)>,
}

impl CompiledKernelDerivative {
    pub fn new(e: &MonomialExpansion, d: usize, alpha: f64) -> Self {
        let terms = e
            .iter()
            .map(|(mono, c)| {
                let mut pw = vec![0i32; d];
                for i in mono.a_indices() {
                    pw[*i as usize] += 1;
                }
                let k = mono.a_indices().len() as i32 + mono.b_power() as i32;
                (c.eval_f64(alpha), pw, k)
            })
            .collect();
        CompiledKernelDerivative { alpha, terms }
    }

    /// `d^beta |x|^-alpha` at `x != 0`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let inv_r2 = 1.0 / r2;
        let mut acc = 0.0;
        for (c, pw, k) in &self.terms {
            let mut t = *c * inv_r2.powi(*k);
            for (xi, p) in x.iter().zip(pw) {
                t *= xi.powi(*p);
            }
            acc += t;
        }
        acc * r2.powf(-0.5 * self.alpha)
    }
}

/// Kelvin transform `x |x|^-2`, an involution of `R^d \ {0}`.
pub fn kelvin(x: &[f64]) -> Result<Vec<f64>> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(Error::Parameter("Kelvin transform is undefined at 0".into()));
    }
    Ok(x.iter().map(|v| v / r2).collect())
}

/// `|det DK(x)| = |x|^-2d`.
pub fn kelvin_jacobian_abs(x: &[f64]) -> Result<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(Error::Parameter("Kelvin transform is undefined at 0".into()));
    }
    Ok(r2.powi(-(x.len() as i32)))
}

/// Random nonzero points with small rational coordinates.
pub fn rational_sample_points(d: usize, count: usize, seed: u64) -> Vec<Vec<BigRational>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<BigRational> = (0..d)
            .map(|_| {
                let p: i64 = rng.random_range(-9..=9);
                let q: i64 = rng.random_range(1..=7);
                BigRational::new(BigInt::from(p), BigInt::from(q))
            })
            .collect();
        if x.iter().any(|v| !v.is_zero()) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, r: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(r))
    }

    #[test]
    fn derivative_of_kernel() {
        let e = kernel_derivative(&[1, 0]).unwrap();
        assert_eq!(e.len(), 1);
        let (m, c) = e.iter().next().unwrap();
        assert_eq!(*m, Monomial::new(vec![0], 0));
        assert_eq!(*c, AlphaRatio::linear(0, -1));
        let e0 = kernel_derivative(&[0, 0, 0]).unwrap();
        assert_eq!(e0.len(), 1);
        assert!(e0.terms().contains_key(&Monomial::kernel()));
    }

    #[test]
    fn derivative_of_a_i_c() {
        // d_j (A_i C) = delta_ij B C - (2 + alpha) A_i A_j C
        let ai = MonomialExpansion::single(Monomial::new(vec![0], 0), AlphaRatio::int(1));
        let same = differentiate(&ai, 0);
        assert_eq!(same.terms()[&Monomial::new(vec![], 1)], AlphaRatio::int(1));
        assert_eq!(same.terms()[&Monomial::new(vec![0, 0], 0)], AlphaRatio::linear(-2, -1));
        let other = differentiate(&ai, 1);
        assert_eq!(other.len(), 1);
        assert_eq!(other.terms()[&Monomial::new(vec![0, 1], 0)], AlphaRatio::linear(-2, -1));
        assert!(differentiate(&MonomialExpansion::zero(), 0).is_empty());
    }

    #[test]
    fn second_derivative_value() {
        // d_1^2 |x|^-1 at (1, 0) is 2
        let e = kernel_derivative(&[2, 0]).unwrap();
        let c = CompiledKernelDerivative::new(&e, 2, 1.0);
        assert!((c.eval(&[1.0, 0.0]) - 2.0).abs() < 1e-14);
        let exact = eval_monomial_expansion(&e, &q(1, 1), &[q(1, 1), q(0, 1)]).unwrap();
        assert_eq!(exact, q(2, 1));
    }

    #[test]
    fn first_order_products() {
        let mut alg = KernelAlgebra::new(3).unwrap();
        let e = alg.expand_d_symbolic(&[1]).unwrap();
        assert_eq!(e.len(), 1);
        // -1/alpha = 1/(0 - alpha)
        assert_eq!(e.terms()[&vec![0, 1, 0]], AlphaRatio::int(1).div_linear(0));
    }

    #[test]
    fn second_order_products_match_closed_form() {
        // D_ij = 1/(2+alpha) (delta_ij/(d-2-alpha) sum_k d_k D_k - d_j D_i), D_k = -d_k K / alpha
        let d = 3;
        let mut alg = KernelAlgebra::new(d).unwrap();
        for i in 0..d {
            for j in 0..d {
                let e = alg.expand_d_symbolic(&[i, j]).unwrap();
                let mut expected = DerivativeExpansion::zero();
                let inv_alpha = AlphaRatio::int(1).div_linear(0); // -1/alpha
                let pre = AlphaRatio::int(-1).div_linear(-2); // 1/(2+alpha)
                let mut b = vec![0u32; d];
                b[i] += 1;
                b[j] += 1;
                expected.add_term(b, &pre.mul(&inv_alpha).neg());
                if i == j {
                    let div = AlphaRatio::int(1).div_linear(d as i64 - 2);
                    for k in 0..d {
                        let mut b = vec![0u32; d];
                        b[k] = 2;
                        expected.add_term(b, &pre.mul(&div).mul(&inv_alpha));
                    }
                }
                assert_eq!(e, expected, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn degree_three_product_evaluates_exactly() {
        let mut alg = KernelAlgebra::new(2).unwrap();
        let pts = rational_sample_points(2, 20, 7);
        assert!(alg.verify_d(&[0, 0, 1], &q(1, 1), &pts).unwrap());
    }

    #[test]
    fn polynomial_expansions() {
        let mut alg = KernelAlgebra::new(2).unwrap();
        let one = Polynomial::monomial(&[0, 0]);
        let e = alg.expand_polynomial_times_kernel(&one, &q(1, 1)).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[&vec![0, 0]], q(1, 1));
        let x1 = Polynomial::monomial(&[1, 0]);
        let e = alg.expand_polynomial_times_kernel(&x1, &q(1, 2)).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[&vec![1, 0]], q(-2, 1));

        let mut alg3 = KernelAlgebra::new(3).unwrap();
        let p = Polynomial::monomial(&[1, 1, 0]);
        let alpha = q(5, 2);
        let e = alg3.expand_polynomial_times_kernel(&p, &alpha).unwrap();
        for x in rational_sample_points(3, 20, 1) {
            let lhs = p.eval_kelvin(&x);
            let rhs = alg3.eval_derivative_expansion(&e, &alpha, &x).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn hypothesis_violations_name_m() {
        let mut alg = KernelAlgebra::new(3).unwrap();
        match alg.expand_d(&[0, 0], &q(1, 1)) {
            Err(Error::Hypothesis { m, .. }) => assert_eq!(m, 2),
            other => panic!("expected hypothesis error, got {other:?}"),
        }
        assert!(matches!(
            alg.expand_d(&[0], &q(0, 1)),
            Err(Error::Hypothesis { m: 1, .. })
        ));
        // alpha = d - 1 is admissible
        assert!(alg.expand_d(&[0, 1, 2], &q(2, 1)).is_ok());
    }

    #[test]
    fn homogeneity_of_kernel_derivatives() {
        for beta in [vec![3u32, 1], vec![0, 5], vec![2, 2]] {
            let n: u32 = beta.iter().sum();
            for (m, _) in kernel_derivative(&beta).unwrap().iter() {
                assert_eq!(m.degree(), n);
            }
        }
    }

    #[test]
    fn alpha_ratio_arithmetic() {
        // 1/(1-a) + 1/(2-a) = (3 - 2a)/((1-a)(2-a))
        let a = AlphaRatio::int(1).div_linear(1);
        let b = AlphaRatio::int(1).div_linear(2);
        let s = a.add(&b);
        assert_eq!(s.eval(&q(1, 2)).unwrap(), q(2, 1) + q(2, 3));
        assert!(s.eval(&q(1, 1)).is_none());
        // (1 - a)/(1 - a) cancels to 1
        let c = AlphaRatio::linear(1, -1).div_linear(1);
        assert_eq!(c, AlphaRatio::int(1));
        assert_eq!(s.to_string(), "(3 + -2*alpha)/((1 - alpha)*(2 - alpha))");
    }

    #[test]
    fn kelvin_basics() {
        let y = kelvin(&[2.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.5, 0.0]);
        assert!(kelvin(&[0.0, 0.0]).is_err());
        let j = kelvin_jacobian_abs(&[2.0, 0.0]).unwrap();
        assert!((j - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("5/2").unwrap(), q(5, 2));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert_eq!(parse_rational("0.5").unwrap(), q(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn exponent_enumeration() {
        assert_eq!(exponents_of_degree(2, 3).len(), 4);
        assert_eq!(exponents_of_degree(3, 2).len(), 6);
        assert_eq!(exponents_of_degree(3, 0), vec![vec![0, 0, 0]]);
    }
}
