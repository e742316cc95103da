use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::netcore::RepNet;

/// A real function on `W_n`, queried pointwise at quadrature nodes.
pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, w: &[f64]) -> f64;
    fn describe(&self) -> String;
}

/// Shared handle to a target function.
pub type FunctionOracle = Arc<dyn Oracle>;

impl Oracle for RepNet {
    fn dim(&self) -> usize {
        self.input_width()
    }

    fn eval(&self, w: &[f64]) -> f64 {
        self.eval_unchecked(w)
    }

    fn describe(&self) -> String {
        format!("net{:?} {}", self.widths(), self.cert())
    }
}

/// Closure-backed oracle.
pub struct FnOracle<F> {
    n: usize,
    name: String,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n: usize, name: impl Into<String>, f: F) -> Self {
        Self {
            n,
            name: name.into(),
            f,
        }
    }
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, w: &[f64]) -> f64 {
        (self.f)(w)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

pub struct Constant {
    pub n: usize,
    pub value: f64,
}

impl Oracle for Constant {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, _w: &[f64]) -> f64 {
        self.value
    }

    fn describe(&self) -> String {
        format!("const({})", self.value)
    }
}

/// Enforces the `[-1,1]` range of a target: out-of-range and non-finite
/// values are clamped (NaN maps to 0) and counted.
pub struct Bounded {
    inner: FunctionOracle,
    violations: AtomicUsize,
}

impl Bounded {
    pub fn new(inner: FunctionOracle) -> Self {
        Self {
            inner,
            violations: AtomicUsize::new(0),
        }
    }

    pub fn violations(&self) -> usize {
        self.violations.load(Ordering::Relaxed)
    }
}

impl Oracle for Bounded {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, w: &[f64]) -> f64 {
        let v = self.inner.eval(w);
        if (-1.0..=1.0).contains(&v) {
            v
        } else {
            self.violations.fetch_add(1, Ordering::Relaxed);
            if v.is_nan() {
                0.0
            } else {
                v.clamp(-1.0, 1.0)
            }
        }
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// Pointwise `a − b`.
pub struct Difference {
    pub a: FunctionOracle,
    pub b: FunctionOracle,
}

impl Oracle for Difference {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval(&self, w: &[f64]) -> f64 {
        self.a.eval(w) - self.b.eval(w)
    }

    fn describe(&self) -> String {
        format!("({}) - ({})", self.a.describe(), self.b.describe())
    }
}

/// Pointwise `Σ c_i·f_i`, summed in term order.
pub struct Combination {
    pub n: usize,
    pub terms: Vec<(f64, FunctionOracle)>,
}

impl Oracle for Combination {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, w: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(0.0, |acc, (c, f)| acc + c * f.eval(w))
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, f)| format!("{c}*({})", f.describe()))
            .collect();
        parts.join(" + ")
    }
}
