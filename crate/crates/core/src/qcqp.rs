//! Small dense convex QCQP solver (log-barrier interior point).
//!
//! Solves `min f0(x)  s.t.  fi(x) ≤ 0` where every `f` is a convex quadratic
//! `xᵀQx + qᵀx + c` with `Q ⪰ 0`. Problem sizes are tiny (the precoder step
//! has at most a few dozen real variables), so everything is dense. A phase-I
//! problem locates a strictly feasible start when the caller's point is not
//! one.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QcqpError {
    /// Phase I could not find a point with every constraint strictly negative.
    #[error("no strictly feasible point")]
    NoStrictInterior,
    #[error("dimension mismatch: problem has {expected} variables, got {actual}")]
    Dimension { expected: usize, actual: usize },
}

/// Convex quadratic `xᵀQx + lin·x + c`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    n: usize,
    /// Row-major `n × n`, symmetric positive semidefinite.
    q: Vec<f64>,
    lin: Vec<f64>,
    c: f64,
    has_quadratic: bool,
}

impl Quadratic {
    pub fn zero(n: usize) -> Self {
        Self { n, q: vec![0.0; n * n], lin: vec![0.0; n], c: 0.0, has_quadratic: false }
    }

    /// Affine function `lin·x + c`.
    pub fn affine(lin: Vec<f64>, c: f64) -> Self {
        let n = lin.len();
        Self { n, q: vec![0.0; n * n], lin, c, has_quadratic: false }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_quad(&mut self, i: usize, j: usize, v: f64) {
        self.q[i * self.n + j] += v;
        self.has_quadratic |= v != 0.0;
    }

    pub fn add_lin(&mut self, i: usize, v: f64) {
        self.lin[i] += v;
    }

    pub fn add_const(&mut self, v: f64) {
        self.c += v;
    }

    /// `self + scale·other`.
    pub fn add_scaled(&mut self, other: &Quadratic, scale: f64) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += scale * b;
        }
        for (a, b) in self.lin.iter_mut().zip(&other.lin) {
            *a += scale * b;
        }
        self.c += scale * other.c;
        self.has_quadratic |= other.has_quadratic && scale != 0.0;
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.c;
        for i in 0..self.n {
            v += self.lin[i] * x[i];
        }
        if self.has_quadratic {
            for i in 0..self.n {
                let row = &self.q[i * self.n..(i + 1) * self.n];
                let s: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                v += x[i] * s;
            }
        }
        v
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.lin);
        if self.has_quadratic {
            for i in 0..self.n {
                let row = &self.q[i * self.n..(i + 1) * self.n];
                let s: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                out[i] += 2.0 * s;
            }
        }
    }

    /// Appends a variable that enters with coefficient `coef` linearly.
    fn extended(&self, coef: f64) -> Quadratic {
        let n = self.n + 1;
        let mut q = vec![0.0; n * n];
        for i in 0..self.n {
            q[i * n..i * n + self.n].copy_from_slice(&self.q[i * self.n..(i + 1) * self.n]);
        }
        let mut lin = self.lin.clone();
        lin.push(coef);
        Quadratic { n, q, lin, c: self.c, has_quadratic: self.has_quadratic }
    }
}

/// `min objective  s.t.  constraints[i] ≤ 0`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub objective: Quadratic,
    pub constraints: Vec<Quadratic>,
}

#[derive(Clone, Copy, Debug)]
pub struct BarrierOptions {
    /// Target duality gap `m / t`.
    pub gap: f64,
    /// Barrier parameter growth factor.
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { gap: 1e-8, mu: 50.0, max_newton: 60 }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
    pub newton_steps: usize,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|f| f.value(x) < 0.0)
    }

    /// Runs phase I (when needed) and the barrier method from `x0`.
    pub fn solve(&self, x0: &[f64], opts: &BarrierOptions) -> Result<Solution, QcqpError> {
        let n = self.dim();
        if x0.len() != n {
            return Err(QcqpError::Dimension { expected: n, actual: x0.len() });
        }
        let mut steps = 0;
        let start = if self.strictly_feasible(x0) {
            x0.to_vec()
        } else {
            let (x, s) = self.phase_one(x0, opts)?;
            steps += s;
            x
        };
        let (x, s) = barrier(&self.objective, &self.constraints, start, opts, None);
        steps += s;
        let value = self.objective.value(&x);
        Ok(Solution { x, value, newton_steps: steps })
    }

    fn phase_one(&self, x0: &[f64], opts: &BarrierOptions) -> Result<(Vec<f64>, usize), QcqpError> {
        let n = self.dim();
        let worst = self.constraints.iter().map(|f| f.value(x0)).fold(f64::NEG_INFINITY, f64::max);
        let mut objective = Quadratic::zero(n + 1);
        objective.add_lin(n, 1.0);
        let mut constraints: Vec<Quadratic> = self.constraints.iter().map(|f| f.extended(-1.0)).collect();
        // keep phase I bounded below: s ≥ −1
        let mut floor = Quadratic::zero(n + 1);
        floor.add_lin(n, -1.0);
        floor.add_const(-1.0);
        constraints.push(floor);
        let mut start = x0.to_vec();
        start.push(worst.max(-0.5) + 1.0);
        let (z, steps) = barrier(&objective, &constraints, start, opts, Some(n));
        let x = z[..n].to_vec();
        if self.strictly_feasible(&x) {
            Ok((x, steps))
        } else {
            Err(QcqpError::NoStrictInterior)
        }
    }
}

/// Barrier method from a strictly feasible `x`. With `stop_below_zero =
/// Some(i)` the run ends as soon as a centered iterate has `x[i] < 0`.
fn barrier(
    objective: &Quadratic,
    constraints: &[Quadratic],
    mut x: Vec<f64>,
    opts: &BarrierOptions,
    stop_below_zero: Option<usize>,
) -> (Vec<f64>, usize) {
    let n = x.len();
    let m = constraints.len().max(1) as f64;
    let mut t = 1.0;
    let mut steps = 0;
    let mut grad = vec![0.0; n];
    let mut gi = vec![0.0; n];
    let mut trial = vec![0.0; n];
    loop {
        // centering
        for _ in 0..opts.max_newton {
            let mut h = DMatrix::<f64>::zeros(n, n);
            objective.gradient_into(&x, &mut grad);
            grad.iter_mut().for_each(|g| *g *= t);
            if objective.has_quadratic {
                for i in 0..n {
                    for j in 0..n {
                        h[(i, j)] += 2.0 * t * objective.q[i * n + j];
                    }
                }
            }
            for f in constraints {
                let v = f.value(&x);
                let inv = -1.0 / v;
                f.gradient_into(&x, &mut gi);
                for i in 0..n {
                    grad[i] += inv * gi[i];
                }
                for i in 0..n {
                    if gi[i] == 0.0 && !f.has_quadratic {
                        continue;
                    }
                    for j in 0..n {
                        h[(i, j)] += inv * inv * gi[i] * gi[j];
                    }
                }
                if f.has_quadratic {
                    for i in 0..n {
                        for j in 0..n {
                            h[(i, j)] += 2.0 * inv * f.q[i * n + j];
                        }
                    }
                }
            }
            let Some(step) = newton_direction(&h, &grad) else { break };
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
            if decrement / 2.0 <= 1e-12 || !decrement.is_finite() {
                break;
            }
            steps += 1;
            let phi0 = potential(objective, constraints, &x, t).unwrap_or(f64::INFINITY);
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-16 {
                for i in 0..n {
                    trial[i] = x[i] + s * step[i];
                }
                if let Some(phi) = potential(objective, constraints, &trial, t) {
                    if phi <= phi0 - 0.25 * s * decrement {
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
            x.copy_from_slice(&trial);
        }
        if let Some(i) = stop_below_zero {
            if x[i] < 0.0 {
                return (x, steps);
            }
        }
        if m / t < opts.gap {
            return (x, steps);
        }
        t *= opts.mu;
    }
}

fn potential(objective: &Quadratic, constraints: &[Quadratic], x: &[f64], t: f64) -> Option<f64> {
    let mut phi = t * objective.value(x);
    for f in constraints {
        let v = f.value(x);
        if !(v < 0.0) {
            return None;
        }
        phi -= (-v).ln();
    }
    Some(phi)
}

fn newton_direction(h: &DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let n = grad.len();
    let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        if reg > 0.0 {
            for i in 0..n {
                hr[(i, i)] += reg;
            }
        }
        if let Some(ch) = hr.cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.iter().copied().collect());
            }
        }
        reg = if reg == 0.0 { scale * 1e-12 } else { reg * 100.0 };
    }
    None
}
