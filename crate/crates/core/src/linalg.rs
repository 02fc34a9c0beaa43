//! Minimal dense linear algebra: LU with partial pivoting on `f64` and on
//! truncated Taylor series (for exact derivative jets of log-determinants).

use crate::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone)]
pub struct Matrix {
    n: usize,
    a: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// In-place LU factorisation with partial pivoting.
    /// Returns the permutation sign, or an error if a pivot vanishes.
    fn lu_factor(&mut self, piv: &mut Vec<usize>) -> Result<f64> {
        let n = self.n;
        piv.clear();
        piv.extend(0..n);
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut pmax = self.get(k, k).abs();
            for i in k + 1..n {
                let v = self.get(i, k).abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot at column {k}")));
            }
            if p != k {
                for j in 0..n {
                    self.a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
                sign = -sign;
            }
            let pivot = self.get(k, k);
            for i in k + 1..n {
                let m = self.get(i, k) / pivot;
                self.set(i, k, m);
                for j in k + 1..n {
                    let v = self.get(i, j) - m * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(sign)
    }

    /// Solve `A x = b` by LU with partial pivoting. Consumes a copy of `A`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut lu = self.clone();
        let mut piv = Vec::new();
        lu.lu_factor(&mut piv)?;
        let mut x: Vec<f64> = piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= lu.get(i, j) * x[j];
            }
            x[i] = s / lu.get(i, i);
        }
        Ok(x)
    }

    /// `(sign, log|det|)` via LU.
    pub fn log_det(&self) -> Result<(f64, f64)> {
        let mut lu = self.clone();
        let mut piv = Vec::new();
        let mut sign = lu.lu_factor(&mut piv)?;
        let mut log_abs = 0.0;
        for k in 0..self.n {
            let p = lu.get(k, k);
            if p < 0.0 {
                sign = -sign;
            }
            log_abs += p.abs().ln();
        }
        Ok((sign, log_abs))
    }
}

/// Double-double value: an unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)`,
/// giving ~31 significant digits from pure f64 hardware ops (error-free
/// transformations). Used where unstructured elimination must resolve
/// exponentially small minors that sit below the f64 noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, o.hi);
        let p2 = p2 + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, o: Dd) -> Dd {
        let q0 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from_f64(q0)));
        let q1 = (r.hi + r.lo) / o.hi;
        let (hi, lo) = quick_two_sum(q0, q1);
        Dd { hi, lo }
    }

    #[inline]
    pub fn scale(self, v: f64) -> Dd {
        self.mul(Dd::from_f64(v))
    }

    /// Newton-refined square root; requires a nonnegative value.
    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let s0 = self.hi.sqrt();
        let r = self.sub(Dd::from_f64(s0).mul(Dd::from_f64(s0)));
        let corr = (r.hi + r.lo) / (2.0 * s0);
        let (hi, lo) = quick_two_sum(s0, corr);
        Dd { hi, lo }
    }

    /// Natural log to f64 accuracy (the low word only refines the mantissa).
    pub fn ln_f64(self) -> f64 {
        self.hi.ln() + self.lo / self.hi
    }
}

/// Maximum number of Taylor coefficients carried by [`Jet`]: derivatives up
/// to order 6.
pub const JET_LEN: usize = 7;

/// Truncated Taylor series `f(x₀+t) = Σₖ c[k] tᵏ` with double-double
/// coefficients `c[k] = f⁽ᵏ⁾(x₀)/k!` and a runtime length.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub c: [Dd; JET_LEN],
    pub len: usize,
}

impl Jet {
    pub fn constant(v: Dd, len: usize) -> Self {
        let mut c = [Dd::ZERO; JET_LEN];
        c[0] = v;
        Jet { c, len }
    }

    /// `a · e^{r t}` as a series.
    pub fn scaled_exp(a: Dd, r: f64, len: usize) -> Self {
        let mut c = [Dd::ZERO; JET_LEN];
        let mut term = a;
        c[0] = term;
        for k in 1..len {
            term = term.scale(r / k as f64);
            c[k] = term;
        }
        Jet { c, len }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let mut c = [Dd::ZERO; JET_LEN];
        for k in 0..self.len {
            c[k] = self.c[k].add(o.c[k]);
        }
        Jet { c, len: self.len }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        let mut c = [Dd::ZERO; JET_LEN];
        for k in 0..self.len {
            c[k] = self.c[k].sub(o.c[k]);
        }
        Jet { c, len: self.len }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut c = [Dd::ZERO; JET_LEN];
        for k in 0..self.len {
            let mut s = Dd::ZERO;
            for j in 0..=k {
                s = s.add(self.c[j].mul(o.c[k - j]));
            }
            c[k] = s;
        }
        Jet { c, len: self.len }
    }

    /// Series division `self / o`; requires `o.c[0] != 0`.
    pub fn div(&self, o: &Jet) -> Jet {
        let mut c = [Dd::ZERO; JET_LEN];
        for k in 0..self.len {
            let mut s = self.c[k];
            for j in 0..k {
                s = s.sub(c[j].mul(o.c[k - j]));
            }
            c[k] = s.div(o.c[0]);
        }
        Jet { c, len: self.len }
    }

    /// Series logarithm; requires `c[0] > 0`. Only the constant term takes
    /// an actual log (to f64 accuracy); the derivative coefficients follow
    /// the division recurrence at full double-double accuracy.
    pub fn ln(&self) -> Jet {
        let mut l = [Dd::ZERO; JET_LEN];
        l[0] = Dd::from_f64(self.c[0].ln_f64());
        for k in 1..self.len {
            let mut s = self.c[k].scale(k as f64);
            for j in 1..k {
                s = s.sub(l[j].scale(j as f64).mul(self.c[k - j]));
            }
            l[k] = s.div(self.c[0].scale(k as f64));
        }
        Jet { c: l, len: self.len }
    }

    /// Derivative values `f⁽ᵏ⁾(x₀)` for k = 0..len (zero beyond).
    pub fn derivatives(&self) -> [f64; JET_LEN] {
        let mut d = [0.0; JET_LEN];
        let mut fact = 1.0;
        for k in 0..self.len {
            if k > 0 {
                fact *= k as f64;
            }
            d[k] = self.c[k].to_f64() * fact;
        }
        d
    }
}

/// `log det` of a square Taylor-valued matrix via LU with partial pivoting
/// on the constant terms. The determinant must be positive at the expansion
/// point (tau functions are positive sums of exponentials); a non-positive
/// determinant, or any pivot below `pivot_floor` (where double-double
/// elimination no longer carries enough digits), means the representation
/// has broken down.
pub fn jet_log_det(mut m: Vec<Vec<Jet>>, pivot_floor: f64) -> Result<Jet> {
    let n = m.len();
    let len = m[0][0].len;
    let mut acc = Jet::constant(Dd::ZERO, len);
    let mut det_sign = 1.0;
    for k in 0..n {
        let mut p = k;
        let mut pmax = m[k][k].c[0].hi.abs();
        for i in k + 1..n {
            let v = m[i][k].c[0].hi.abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax <= pivot_floor {
            return Err(Error::RepresentationFailure(format!(
                "pivot {pmax:e} at or below the elimination noise floor"
            )));
        }
        if p != k {
            m.swap(k, p);
            det_sign = -det_sign;
        }
        let mut pivot = m[k][k];
        if pivot.c[0].hi < 0.0 {
            det_sign = -det_sign;
            for c in pivot.c.iter_mut() {
                *c = c.neg();
            }
        }
        // ln|det| = Σ ln|pivot_k|; each pivot series is nonzero at t = 0.
        acc = acc.add(&pivot.ln());
        let pivot = m[k][k];
        for i in k + 1..n {
            let f = m[i][k].div(&pivot);
            for j in k + 1..n {
                let t = f.mul(&m[k][j]);
                m[i][j] = m[i][j].sub(&t);
            }
        }
    }
    if det_sign < 0.0 {
        return Err(Error::RepresentationFailure(
            "negative tau determinant".into(),
        ));
    }
    Ok(acc)
}
