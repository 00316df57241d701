use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};

/// Natural cubic spline with linear extrapolation outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return domain("spline needs at least 3 knots and matching values");
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("spline knots must be strictly increasing");
        }
        // second derivatives m_i with m_0 = m_{n-1} = 0 (Thomas algorithm)
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let rhs = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (rhs - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(CubicSpline { xs, ys, m })
    }

    /// (value, first derivative, second derivative)
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        let (xs, ys) = (&self.xs, &self.ys);
        if x <= xs[0] {
            let (_, d, _) = self.piece(0, xs[0]);
            return (ys[0] + d * (x - xs[0]), d, 0.0);
        }
        if x >= xs[n - 1] {
            let (_, d, _) = self.piece(n - 2, xs[n - 1]);
            return (ys[n - 1] + d * (x - xs[n - 1]), d, 0.0);
        }
        let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        self.piece(i, x)
    }

    fn piece(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffKind {
    Constant(f64),
    Identity,
    TwoPlusSine,
    Spline(CubicSpline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSpec {
    pub name: String,
    pub kind: CoeffKind,
    pub lipschitz_bound: f64,
    pub growth_exponent: f64,
    pub lower_bound: f64,
}

impl CoefficientSpec {
    pub fn constant(c: f64) -> Self {
        CoefficientSpec {
            name: if c == 1.0 { "constant-1".into() } else { format!("constant-{c}") },
            kind: CoeffKind::Constant(c),
            lipschitz_bound: 0.0,
            growth_exponent: 0.0,
            lower_bound: c.abs(),
        }
    }

    pub fn constant_one() -> Self {
        Self::constant(1.0)
    }

    pub fn identity() -> Self {
        CoefficientSpec {
            name: "identity".into(),
            kind: CoeffKind::Identity,
            lipschitz_bound: 1.0,
            growth_exponent: 0.0,
            lower_bound: 0.0,
        }
    }

    pub fn two_plus_sine() -> Self {
        CoefficientSpec {
            name: "two-plus-sine".into(),
            kind: CoeffKind::TwoPlusSine,
            lipschitz_bound: 1.0,
            growth_exponent: 0.0,
            lower_bound: 1.0,
        }
    }

    pub fn spline(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let s = CubicSpline::new(xs.clone(), ys.clone())?;
        let mut lip: f64 = 0.0;
        let mut lo = f64::INFINITY;
        let a = xs[0] - 1.0;
        let b = xs[xs.len() - 1] + 1.0;
        for i in 0..=4000 {
            let x = a + (b - a) * i as f64 / 4000.0;
            let (v, d, _) = s.eval3(x);
            lip = lip.max(d.abs());
            lo = lo.min(v.abs());
        }
        Ok(CoefficientSpec {
            name: "custom-spline".into(),
            kind: CoeffKind::Spline(s),
            lipschitz_bound: lip * 1.01,
            growth_exponent: 0.0,
            lower_bound: lo,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "constant-1" => Ok(Self::constant_one()),
            "identity" => Ok(Self::identity()),
            "two-plus-sine" => Ok(Self::two_plus_sine()),
            other => domain(format!("unknown coefficient preset '{other}'")),
        }
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        match &self.kind {
            CoeffKind::Constant(c) => *c,
            CoeffKind::Identity => x,
            CoeffKind::TwoPlusSine => 2.0 + x.sin(),
            CoeffKind::Spline(s) => s.eval3(x).0,
        }
    }

    #[inline]
    pub fn sigma_prime(&self, x: f64) -> f64 {
        match &self.kind {
            CoeffKind::Constant(_) => 0.0,
            CoeffKind::Identity => 1.0,
            CoeffKind::TwoPlusSine => x.cos(),
            CoeffKind::Spline(s) => s.eval3(x).1,
        }
    }

    #[inline]
    pub fn sigma_second(&self, x: f64) -> f64 {
        match &self.kind {
            CoeffKind::Constant(_) | CoeffKind::Identity => 0.0,
            CoeffKind::TwoPlusSine => -x.sin(),
            CoeffKind::Spline(s) => s.eval3(x).2,
        }
    }

    #[inline]
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        match &self.kind {
            CoeffKind::Constant(c) => (*c, 0.0, 0.0),
            CoeffKind::Identity => (x, 1.0, 0.0),
            CoeffKind::TwoPlusSine => {
                let (s, c) = x.sin_cos();
                (2.0 + s, c, -s)
            }
            CoeffKind::Spline(s) => s.eval3(x),
        }
    }

    /// True when σ' and σ'' vanish identically.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, CoeffKind::Constant(_))
    }

    /// Spot-checks the Lipschitz bound and second-derivative growth on random pairs.
    pub fn validate(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut c2: f64 = 0.0;
        for _ in 0..2000 {
            let a: f64 = rng.random_range(-20.0..20.0);
            let b: f64 = rng.random_range(-20.0..20.0);
            let lhs = (self.sigma(a) - self.sigma(b)).abs();
            if lhs > self.lipschitz_bound * (a - b).abs() * (1.0 + 1e-9) + 1e-12 {
                return domain(format!("{}: Lipschitz bound violated at ({a}, {b})", self.name));
            }
            c2 = c2.max(self.sigma_second(a).abs() / (1.0 + a.abs().powf(self.growth_exponent)));
        }
        if !c2.is_finite() {
            return domain(format!("{}: second derivative is not finite", self.name));
        }
        Ok(())
    }

    /// Case 1 additionally needs σ(1) ≠ 0.
    pub fn validate_flat(&self) -> Result<()> {
        self.validate()?;
        if self.sigma(1.0) == 0.0 {
            return domain(format!("{}: σ(1) = 0 makes the flat case trivial", self.name));
        }
        Ok(())
    }
}
