//! Polynomials in finitely many i.i.d. standard normals `ξ_1..ξ_m`.
//!
//! Every smooth functional used by the integration layer is a polynomial in
//! the noise coordinates, so Gaussian expectations, Malliavin derivatives and
//! the divergence can be computed exactly in coefficient space.
//!
//! Variables are zero-based internally; the text format names them `x1..xm`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::spectral::RkhsElement;

/// `E[ξ^p]` for a standard normal: `(p − 1)!!` for even `p`, zero otherwise.
pub fn gaussian_moment(p: u32) -> f64 {
    if p % 2 == 1 {
        return 0.0;
    }
    (1..p).step_by(2).map(f64::from).product()
}

/// Sparse polynomial `Σ_α c_α ξ^α` keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChaosPolynomial {
    num_vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl ChaosPolynomial {
    pub fn zero(num_vars: usize) -> Self {
        Self {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: f64, num_vars: usize) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(vec![0; num_vars], c);
        p
    }

    /// The coordinate `ξ_k` (zero-based), in a ring of at least `k + 1` variables.
    pub fn variable(k: usize, num_vars: usize) -> Self {
        let num_vars = num_vars.max(k + 1);
        let mut exps = vec![0; num_vars];
        exps[k] = 1;
        let mut p = Self::zero(num_vars);
        p.add_term(exps, 1.0);
        p
    }

    /// Build from `(exponents, coefficient)` pairs; duplicates are summed.
    pub fn from_terms(num_vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Self::zero(num_vars);
        for (exps, c) in terms {
            check_len(num_vars, exps.len())?;
            p.add_term(exps, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `ξ^exps`; missing trailing exponents count as zero.
    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        if exps.len() > self.num_vars && exps[self.num_vars..].iter().any(|&e| e > 0) {
            return 0.0;
        }
        let mut key = exps[..exps.len().min(self.num_vars)].to_vec();
        key.resize(self.num_vars, 0);
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    /// Same polynomial in a ring of `num_vars ≥ self.num_vars()` variables.
    pub fn extended(&self, num_vars: usize) -> Self {
        if num_vars <= self.num_vars {
            return self.clone();
        }
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| {
                let mut k = k.clone();
                k.resize(num_vars, 0);
                (k, *v)
            })
            .collect();
        Self { num_vars, terms }
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero(self.num_vars);
        }
        let mut out = Self::zero(self.num_vars);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * s);
        }
        out
    }

    fn sum_with(&self, other: &Self, sign: f64) -> Self {
        let m = self.num_vars.max(other.num_vars);
        let mut out = self.extended(m);
        for (k, v) in other.extended(m).terms {
            out.add_term(k, sign * v);
        }
        out
    }

    fn product(&self, other: &Self) -> Self {
        let m = self.num_vars.max(other.num_vars);
        let (a, b) = (self.extended(m), other.extended(m));
        let mut out = Self::zero(m);
        for (ka, va) in &a.terms {
            for (kb, vb) in &b.terms {
                let exps = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
                out.add_term(exps, va * vb);
            }
        }
        out
    }

    /// `E[P]` under i.i.d. standard normal coordinates.
    pub fn expectation(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| v * k.iter().map(|&p| gaussian_moment(p)).product::<f64>())
            .sum()
    }

    /// Formal partial derivative `∂P/∂ξ_k` (zero-based `k`).
    pub fn partial(&self, k: usize) -> Self {
        let mut out = Self::zero(self.num_vars);
        if k >= self.num_vars {
            return out;
        }
        for (exps, v) in &self.terms {
            if exps[k] > 0 {
                let mut e = exps.clone();
                e[k] -= 1;
                out.add_term(e, v * f64::from(exps[k]));
            }
        }
        out
    }

    /// `DP = (∂P/∂ξ_1, …, ∂P/∂ξ_m)`, coordinates against `Φ_1..Φ_m`.
    pub fn malliavin_derivative(&self) -> HmuValuedPolynomial {
        HmuValuedPolynomial {
            components: (0..self.num_vars).map(|k| self.partial(k)).collect(),
        }
    }

    /// `D_a P = Σ_k a_k ∂P/∂ξ_k`. Directions shorter than the variable count
    /// are zero-padded; extra direction coordinates hit variables `P` does
    /// not depend on.
    pub fn directional_derivative(&self, direction: &RkhsElement) -> Self {
        let mut out = Self::zero(self.num_vars);
        for (k, &a) in direction.coeffs().iter().enumerate().take(self.num_vars) {
            if a != 0.0 {
                out = &out + &self.partial(k).scale(a);
            }
        }
        out
    }

    /// Evaluate at a realization of the noise.
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() < self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: xi.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(k, v)| {
                v * k
                    .iter()
                    .zip(xi)
                    .map(|(&p, &x)| x.powi(p as i32))
                    .product::<f64>()
            })
            .sum())
    }

    /// Largest coefficientwise difference, treating missing terms as zero.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let diff = self - other;
        diff.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Parse the text form with at least `num_vars` variables.
    pub fn parse_with_vars(s: &str, num_vars: usize) -> Result<Self> {
        let p: Self = s.parse()?;
        Ok(p.extended(num_vars))
    }

    /// Random sparse polynomial with coefficients uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_vars: usize, max_degree: u32, n_terms: usize) -> Self {
        let mut p = Self::zero(num_vars);
        for _ in 0..n_terms {
            let mut exps = vec![0u32; num_vars];
            if num_vars > 0 {
                let deg = rng.random_range(0..=max_degree);
                for _ in 0..deg {
                    exps[rng.random_range(0..num_vars)] += 1;
                }
            }
            p.add_term(exps, rng.random_range(-1.0..=1.0));
        }
        p
    }
}

/// `E[FG] + E[⟨DF, DG⟩]`, the inner product of the first Sobolev–Malliavin space.
pub fn sobolev_inner(f: &ChaosPolynomial, g: &ChaosPolynomial) -> f64 {
    let df = f.malliavin_derivative();
    let dg = g.malliavin_derivative();
    (f * g).expectation() + inner_hmu_padded(&df, &dg).expectation()
}

fn inner_hmu_padded(u: &HmuValuedPolynomial, v: &HmuValuedPolynomial) -> ChaosPolynomial {
    let m = u.len().max(v.len());
    inner_hmu(&u.padded(m), &v.padded(m)).expect("padded to equal length")
}

impl Add for &ChaosPolynomial {
    type Output = ChaosPolynomial;
    fn add(self, rhs: Self) -> ChaosPolynomial {
        self.sum_with(rhs, 1.0)
    }
}

impl Sub for &ChaosPolynomial {
    type Output = ChaosPolynomial;
    fn sub(self, rhs: Self) -> ChaosPolynomial {
        self.sum_with(rhs, -1.0)
    }
}

impl Mul for &ChaosPolynomial {
    type Output = ChaosPolynomial;
    fn mul(self, rhs: Self) -> ChaosPolynomial {
        self.product(rhs)
    }
}

impl Neg for &ChaosPolynomial {
    type Output = ChaosPolynomial;
    fn neg(self) -> ChaosPolynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for ChaosPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut ordered: Vec<(&Vec<u32>, f64)> = self.terms.iter().map(|(k, v)| (k, *v)).collect();
        ordered.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then_with(|| b.0.cmp(a.0))
        });
        for (idx, (exps, c)) in ordered.into_iter().enumerate() {
            let negative = c < 0.0;
            match (idx, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mag = c.abs();
            let monomial: Vec<String> = exps
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(k, &p)| if p == 1 { format!("x{}", k + 1) } else { format!("x{}^{p}", k + 1) })
                .collect();
            if monomial.is_empty() {
                f.write_str(&format_number(mag))?;
            } else {
                if mag != 1.0 {
                    write!(f, "{}*", format_number(mag))?;
                }
                f.write_str(&monomial.join("*"))?;
            }
        }
        Ok(())
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

impl FromStr for ChaosPolynomial {
    type Err = Error;

    /// Parse expanded sums of products such as `2*x1^2*x2 - 3*x3 + 0.5`.
    fn from_str(s: &str) -> Result<Self> {
        Parser::new(s).parse()
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {} in `{}`", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn parse(mut self) -> Result<ChaosPolynomial> {
        let mut terms: Vec<(BTreeMap<usize, u32>, f64)> = Vec::new();
        self.skip_ws();
        if self.peek().is_none() {
            return Err(self.err("empty polynomial"));
        }
        let mut sign = 1.0;
        if let Some(c @ ('+' | '-')) = self.peek() {
            sign = if c == '-' { -1.0 } else { 1.0 };
            self.pos += 1;
        }
        loop {
            let (mono, c) = self.term()?;
            terms.push((mono, sign * c));
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(_) => return Err(self.err("expected `+` or `-`")),
            }
            self.pos += 1;
        }
        let num_vars = terms
            .iter()
            .flat_map(|(m, _)| m.keys().map(|k| k + 1))
            .max()
            .unwrap_or(0);
        let mut p = ChaosPolynomial::zero(num_vars);
        for (mono, c) in terms {
            let mut exps = vec![0; num_vars];
            for (k, e) in mono {
                exps[k] += e;
            }
            p.add_term(exps, c);
        }
        Ok(p)
    }

    fn term(&mut self) -> Result<(BTreeMap<usize, u32>, f64)> {
        let mut coeff = 1.0;
        let mut mono = BTreeMap::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('x') => {
                    self.pos += 1;
                    let idx = self.integer()?;
                    if idx == 0 {
                        return Err(self.err("variables are numbered from x1"));
                    }
                    self.skip_ws();
                    let mut exp = 1;
                    if self.peek() == Some('^') {
                        self.pos += 1;
                        self.skip_ws();
                        exp = u32::try_from(self.integer()?).map_err(|_| self.err("exponent too large"))?;
                    }
                    *mono.entry(idx as usize - 1).or_insert(0) += exp;
                }
                Some(c) if c.is_ascii_digit() || c == '.' => coeff *= self.number()?,
                _ => return Err(self.err("expected a number or variable")),
            }
            self.skip_ws();
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                return Ok((mono, coeff));
            }
        }
    }

    fn integer(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.src[start..self.pos].parse().map_err(|_| self.err("expected an integer"))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if let Some('e' | 'E') = self.peek() {
            self.pos += 1;
            if let Some('+' | '-') = self.peek() {
                self.pos += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        self.src[start..self.pos].parse().map_err(|_| self.err("malformed number"))
    }
}

/// `H_μ`-valued random element `Σ_k P_k Φ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmuValuedPolynomial {
    components: Vec<ChaosPolynomial>,
}

impl HmuValuedPolynomial {
    /// Components are lifted to a common variable count.
    pub fn new(components: Vec<ChaosPolynomial>) -> Self {
        let m = components.iter().map(|p| p.num_vars()).max().unwrap_or(0);
        Self {
            components: components.into_iter().map(|p| p.extended(m)).collect(),
        }
    }

    pub fn components(&self) -> &[ChaosPolynomial] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &ChaosPolynomial {
        &self.components[k]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Zero-extend to `m` components.
    pub fn padded(&self, m: usize) -> Self {
        let mut components = self.components.clone();
        let vars = components.iter().map(|p| p.num_vars()).max().unwrap_or(0);
        while components.len() < m {
            components.push(ChaosPolynomial::zero(vars));
        }
        Self { components }
    }
}

/// Pointwise-in-Ω inner product `⟨u, v⟩_{H_μ} = Σ_k u_k v_k`.
pub fn inner_hmu(u: &HmuValuedPolynomial, v: &HmuValuedPolynomial) -> Result<ChaosPolynomial> {
    check_len(u.len(), v.len())?;
    let vars = u
        .components
        .iter()
        .chain(&v.components)
        .map(|p| p.num_vars())
        .max()
        .unwrap_or(0);
    Ok(u
        .components
        .iter()
        .zip(&v.components)
        .fold(ChaosPolynomial::zero(vars), |acc, (a, b)| &acc + &(a * b)))
}
