//! Truncated Taylor series in `t` whose coefficients are forward-mode dual
//! numbers in the family parameters. One pass yields every t-derivative of
//! `h(u; t)` together with its gradient in `u`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub g: Vec<f64>,
}

impl Dual {
    pub fn constant(v: f64, m: usize) -> Self {
        Dual { v, g: vec![0.0; m] }
    }

    /// The `i`-th coordinate variable evaluated at `v`.
    pub fn var(i: usize, v: f64, m: usize) -> Self {
        let mut g = vec![0.0; m];
        g[i] = 1.0;
        Dual { v, g }
    }

    fn map(&self, v: f64, dv: f64) -> Dual {
        Dual { v, g: self.g.iter().map(|x| x * dv).collect() }
    }

    pub fn scale(&self, s: f64) -> Dual {
        Dual { v: self.v * s, g: self.g.iter().map(|x| x * s).collect() }
    }

    pub fn recip(&self) -> Dual {
        self.map(1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sqrt(&self) -> Dual {
        let r = self.v.sqrt();
        self.map(r, 0.5 / r)
    }

    pub fn sin(&self) -> Dual {
        self.map(self.v.sin(), self.v.cos())
    }

    pub fn cos(&self) -> Dual {
        self.map(self.v.cos(), -self.v.sin())
    }

    pub fn powi(&self, n: i32) -> Dual {
        if n == 0 {
            return Dual::constant(1.0, self.g.len());
        }
        self.map(self.v.powi(n), n as f64 * self.v.powi(n - 1))
    }
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, o: &Dual) -> Dual {
        Dual { v: self.v + o.v, g: self.g.iter().zip(&o.g).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, o: &Dual) -> Dual {
        Dual { v: self.v - o.v, g: self.g.iter().zip(&o.g).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, o: &Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a * o.v + self.v * b).collect(),
        }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.scale(-1.0)
    }
}

/// Coefficients `c_i = (d/dt)^i h / i!` at a fixed base time, `i <= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub c: Vec<Dual>,
}

impl Series {
    pub fn constant(v: &Dual, order: usize) -> Self {
        let m = v.g.len();
        let mut c = vec![Dual::constant(0.0, m); order + 1];
        c[0] = v.clone();
        Series { c }
    }

    /// `t0 + tau` with `t0` independent of the parameters.
    pub fn time(t0: f64, order: usize, m: usize) -> Self {
        let mut c = vec![Dual::constant(0.0, m); order + 1];
        c[0] = Dual::constant(t0, m);
        if order >= 1 {
            c[1] = Dual::constant(1.0, m);
        }
        Series { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn add(&self, o: &Series) -> Series {
        Series { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Series) -> Series {
        Series { c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Series {
        Series { c: self.c.iter().map(|a| a.scale(s)).collect() }
    }

    pub fn mul_dual(&self, d: &Dual) -> Series {
        Series { c: self.c.iter().map(|a| a * d).collect() }
    }

    pub fn add_dual(&self, d: &Dual) -> Series {
        let mut c = self.c.clone();
        c[0] = &c[0] + d;
        Series { c }
    }

    pub fn mul(&self, o: &Series) -> Series {
        let n = self.c.len();
        let m = self.c[0].g.len();
        let mut c = vec![Dual::constant(0.0, m); n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] = &c[i + j] + &(&self.c[i] * &o.c[j]);
            }
        }
        Series { c }
    }

    pub fn div(&self, o: &Series) -> Series {
        let n = self.c.len();
        let inv0 = o.c[0].recip();
        let mut q: Vec<Dual> = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = self.c[i].clone();
            for j in 0..i {
                acc = &acc - &(&q[j] * &o.c[i - j]);
            }
            q.push(&acc * &inv0);
        }
        Series { c: q }
    }

    /// Square root; requires a positive constant term.
    pub fn sqrt(&self) -> Option<Series> {
        if !(self.c[0].v > 0.0) {
            return None;
        }
        let n = self.c.len();
        let s0 = self.c[0].sqrt();
        let inv = s0.scale(2.0).recip();
        let mut s = vec![s0];
        for i in 1..n {
            let mut acc = self.c[i].clone();
            for j in 1..i {
                acc = &acc - &(&s[j] * &s[i - j]);
            }
            s.push(&acc * &inv);
        }
        Some(Series { c: s })
    }

    pub fn powi(&self, e: u32) -> Series {
        let mut r = Series::constant(&Dual::constant(1.0, self.c[0].g.len()), self.order());
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    /// `(d/dt)^i h` at the base time.
    pub fn derivative(&self, i: usize) -> Dual {
        let f: f64 = (1..=i).map(|x| x as f64).product();
        self.c[i].scale(f)
    }
}
