//! A small affine-expression layer for building cone programs, plus the
//! bridge to the Clarabel interior-point solver.
//!
//! Every constraint states that a list of affine expressions lies in a cone:
//! nonnegative orthant, zero cone, second-order cone `s0 >= ||s[1..]||`, or
//! the exponential cone `s2 >= s1 * exp(s0 / s1)`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(i: usize) -> Self {
        LinExpr { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn term(i: usize, a: f64) -> Self {
        LinExpr { terms: vec![(i, a)], constant: 0.0 }
    }

    pub fn add_term(&mut self, i: usize, a: f64) -> &mut Self {
        if a != 0.0 {
            self.terms.push((i, a));
        }
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(i, a) in &other.terms {
            self.add_term(i, a * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.add_expr(other, 1.0);
        self
    }

    pub fn minus(mut self, other: &LinExpr) -> Self {
        self.add_expr(other, -1.0);
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

/// Complex affine expression over real variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl ComplexExpr {
    /// Complex variable stored as `(re_index, im_index)`.
    pub fn var(re: usize, im: usize) -> Self {
        ComplexExpr { re: LinExpr::var(re), im: LinExpr::var(im) }
    }

    /// `self += a * v` for a complex constant `a` and complex variable `v`.
    pub fn add_scaled_var(&mut self, a: Complex64, v: (usize, usize)) {
        // (ar + i ai)(xr + i xi) = (ar xr - ai xi) + i (ai xr + ar xi)
        self.re.add_term(v.0, a.re).add_term(v.1, -a.im);
        self.im.add_term(v.0, a.im).add_term(v.1, a.re);
    }

    /// `self += conj(v) * a`.
    pub fn add_conj_var_scaled(&mut self, v: (usize, usize), a: Complex64) {
        // (xr - i xi)(ar + i ai) = (ar xr + ai xi) + i (ai xr - ar xi)
        self.re.add_term(v.0, a.re).add_term(v.1, a.im);
        self.im.add_term(v.0, a.im).add_term(v.1, -a.re);
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero,
    Nonneg,
    SecondOrder,
    Exp,
}

#[derive(Debug, Clone)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub rows: Vec<LinExpr>,
    pub family: &'static str,
    pub user: Option<usize>,
}

impl ConeConstraint {
    /// Distance-like violation of the cone membership at `x`; 0 when satisfied.
    /// The exponential cone is measured in log space.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let s: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        if s.iter().any(|v| v.is_nan()) {
            return f64::INFINITY;
        }
        match self.cone {
            Cone::Zero => s.iter().fold(0.0, |m, v| m.max(v.abs())),
            Cone::Nonneg => s.iter().fold(0.0, |m, v| m.max(-v)),
            Cone::SecondOrder => {
                let tail = s[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                (tail - s[0]).max(0.0)
            }
            Cone::Exp => {
                let (a, b, z) = (s[0], s[1], s[2]);
                if b > 0.0 && z > 0.0 {
                    (a - b * (z / b).ln()).max(0.0)
                } else if b == 0.0 {
                    a.max(0.0).max(-z)
                } else if b < 0.0 {
                    -b
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConeProgram {
    pub n_vars: usize,
    pub objective: LinExpr,
    pub constraints: Vec<ConeConstraint>,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolverStatus,
    pub iterations: u32,
}

impl ConeProgram {
    pub fn new_var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn new_vars(&mut self, n: usize) -> std::ops::Range<usize> {
        let start = self.n_vars;
        self.n_vars += n;
        start..self.n_vars
    }

    pub fn push(&mut self, cone: Cone, rows: Vec<LinExpr>, family: &'static str, user: Option<usize>) {
        self.constraints.push(ConeConstraint { cone, rows, family, user });
    }

    /// `lhs >= rhs`.
    pub fn geq(&mut self, lhs: LinExpr, rhs: &LinExpr, family: &'static str, user: Option<usize>) {
        self.push(Cone::Nonneg, vec![lhs.minus(rhs)], family, user);
    }

    /// `||z||^2 <= a * b` with `a, b >= 0`, as `(a + b, a - b, 2 z) in SOC`.
    pub fn rotated(&mut self, a: &LinExpr, b: &LinExpr, z: &[LinExpr], family: &'static str, user: Option<usize>) {
        let mut rows = Vec::with_capacity(z.len() + 2);
        rows.push(a.clone().plus(b));
        rows.push(a.clone().minus(b));
        rows.extend(z.iter().map(|e| e.clone().scaled(2.0)));
        self.push(Cone::SecondOrder, rows, family, user);
    }

    /// `||z|| <= t`.
    pub fn norm_leq(&mut self, t: LinExpr, z: Vec<LinExpr>, family: &'static str, user: Option<usize>) {
        let mut rows = Vec::with_capacity(z.len() + 1);
        rows.push(t);
        rows.extend(z);
        self.push(Cone::SecondOrder, rows, family, user);
    }

    /// `a <= ln(z)`, i.e. `(a, 1, z)` in the exponential cone.
    pub fn log_epigraph(&mut self, a: LinExpr, z: LinExpr, family: &'static str, user: Option<usize>) {
        self.push(Cone::Exp, vec![a, LinExpr::constant(1.0), z], family, user);
    }

    pub fn count(&self, family: &str) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    /// Largest violation over all constraints, with the offending family.
    pub fn max_violation(&self, x: &[f64]) -> (f64, &'static str, Option<usize>) {
        let mut worst = (0.0, "", None);
        for c in &self.constraints {
            let v = c.violation(x);
            if v > worst.0 || v.is_nan() {
                worst = (v, c.family, c.user);
            }
        }
        worst
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<ConicSolution> {
        let n = self.n_vars;
        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row = 0usize;
        // Clarabel wants A x + s = b, s in K, so s = expr gives A = -coef.
        for c in &self.constraints {
            for r in &c.rows {
                for &(j, a) in &r.terms {
                    ii.push(row);
                    jj.push(j);
                    vv.push(-a);
                }
                b.push(r.constant);
                row += 1;
            }
            let dim = c.rows.len();
            match (c.cone, cones.last_mut()) {
                (Cone::Nonneg, Some(SupportedConeT::NonnegativeConeT(d))) => *d += dim,
                (Cone::Zero, Some(SupportedConeT::ZeroConeT(d))) => *d += dim,
                (Cone::Nonneg, _) => cones.push(SupportedConeT::NonnegativeConeT(dim)),
                (Cone::Zero, _) => cones.push(SupportedConeT::ZeroConeT(dim)),
                (Cone::SecondOrder, _) => cones.push(SupportedConeT::SecondOrderConeT(dim)),
                (Cone::Exp, _) => {
                    debug_assert_eq!(dim, 3);
                    cones.push(SupportedConeT::ExponentialConeT());
                }
            }
        }
        let a = CscMatrix::new_from_triplets(row, n, ii, jj, vv);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &self.objective.terms {
            q[j] += c;
        }
        let clarabel_settings = DefaultSettings {
            verbose: false,
            max_iter: settings.max_iter,
            tol_gap_abs: settings.tol_gap,
            tol_gap_rel: settings.tol_gap,
            tol_feas: settings.tol_feas,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, clarabel_settings)
            .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let accept = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => true,
            // A stalled interior point can still sit on a usable point.
            SolverStatus::InsufficientProgress | SolverStatus::MaxIterations => {
                sol.x.iter().all(|v| v.is_finite()) && self.max_violation(&sol.x).0 <= settings.accept_violation
            }
            _ => false,
        };
        if !accept {
            let (v, family, _) = self.max_violation(&sol.x);
            return Err(Error::Solver(format!(
                "status {:?} after {} iterations (worst violation {v:.2e} in `{family}`)",
                sol.status, sol.iterations
            )));
        }
        Ok(ConicSolution {
            x: sol.x.clone(),
            objective: sol.obj_val + self.objective.constant,
            status: sol.status,
            iterations: sol.iterations,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverSettings {
    pub max_iter: u32,
    pub tol_gap: f64,
    pub tol_feas: f64,
    /// Largest constraint violation accepted from a solver that stalled.
    pub accept_violation: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { max_iter: 200, tol_gap: 1e-9, tol_feas: 1e-9, accept_violation: 1e-7 }
    }
}
