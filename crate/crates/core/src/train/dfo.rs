//! Unconstrained derivative-free minimization with linear models over a
//! simplex and a shrinking trust-region radius, in the COBYLA family.
//!
//! Each iteration fits the linear interpolant through the `n + 1` simplex
//! vertices, steps a distance `rho` down its gradient from the best vertex and
//! swaps the trial point into the simplex. When the model predicts poorly the
//! simplex geometry is repaired first; only once the vertices are within
//! `2 rho` of the best point is `rho` halved.

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DfoOptions {
    pub rho_begin: f64,
    pub rho_end: f64,
    pub max_evals: usize,
}

impl Default for DfoOptions {
    fn default() -> Self {
        Self {
            rho_begin: 0.5,
            rho_end: 1e-6,
            max_evals: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfoResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Radius fell below `rho_end`.
    pub converged: bool,
    pub budget_exhausted: bool,
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`. Returns `None` for a (numerically) singular matrix.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[piv * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Counter<'a, F> {
    f: F,
    evals: usize,
    max: usize,
    best_x: Vec<f64>,
    best_f: f64,
    on_eval: &'a mut dyn FnMut(usize, &[f64], f64),
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.evals >= self.max {
            return None;
        }
        let v = (self.f)(x);
        self.evals += 1;
        if v < self.best_f || self.evals == 1 {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        (self.on_eval)(self.evals, &self.best_x, self.best_f);
        Some(v)
    }
}

/// Minimizes `f` from `x0`. `on_eval(evals, best_x, best_f)` runs after every
/// evaluation.
pub fn minimize<F>(f: F, x0: &[f64], opts: &DfoOptions, on_eval: &mut dyn FnMut(usize, &[f64], f64)) -> DfoResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut c = Counter {
        f,
        evals: 0,
        max: opts.max_evals.max(1),
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
        on_eval,
    };
    let finish = |c: Counter<'_, F>, converged: bool| DfoResult {
        x: c.best_x,
        f: c.best_f,
        evals: c.evals,
        converged,
        budget_exhausted: !converged,
    };

    let f0 = c.eval(x0).expect("budget of at least one evaluation");
    if n == 0 {
        return finish(c, true);
    }
    let mut rho = opts.rho_begin;
    let mut pts = vec![x0.to_vec()];
    let mut vals = vec![f0];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += rho;
        let Some(v) = c.eval(&x) else { return finish(c, false) };
        pts.push(x);
        vals.push(v);
    }

    loop {
        let b = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
        let others: Vec<usize> = (0..=n).filter(|&i| i != b).collect();
        let mut dmat = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (r, &i) in others.iter().enumerate() {
            for k in 0..n {
                dmat[r * n + k] = pts[i][k] - pts[b][k];
            }
            rhs[r] = vals[i] - vals[b];
        }
        let Some(g) = solve(dmat.clone(), rhs, n) else {
            // Degenerate simplex: rebuild it around the best point.
            let xb = pts[b].clone();
            for (r, &i) in others.iter().enumerate() {
                let mut x = xb.clone();
                x[r] += rho;
                let Some(v) = c.eval(&x) else { return finish(c, false) };
                pts[i] = x;
                vals[i] = v;
            }
            continue;
        };
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut model_ok = false;
        if gnorm > 0.0 && gnorm.is_finite() {
            let step: Vec<f64> = g.iter().map(|v| -rho * v / gnorm).collect();
            let xt: Vec<f64> = pts[b].iter().zip(&step).map(|(x, s)| x + s).collect();
            let Some(ft) = c.eval(&xt) else { return finish(c, false) };
            let ratio = (vals[b] - ft) / (rho * gnorm);
            model_ok = ratio >= 0.1;

            // Barycentric weights of the step in the simplex edge basis pick the
            // vertex whose replacement keeps the simplex best conditioned.
            let mut dt = vec![0.0; n * n];
            for r in 0..n {
                for k in 0..n {
                    dt[k * n + r] = dmat[r * n + k];
                }
            }
            if let Some(coef) = solve(dt, step, n) {
                let (r, w) = coef
                    .iter()
                    .enumerate()
                    .map(|(r, cf)| {
                        let far = (dist(&pts[others[r]], &pts[b]) / rho).max(1.0);
                        (r, cf.abs() * far * far)
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                if ft < vals[b] || w > 1.0 {
                    pts[others[r]] = xt;
                    vals[others[r]] = ft;
                }
            }
        }
        if model_ok {
            continue;
        }

        // Geometry repair: pull the farthest vertex back in along the direction
        // that maximizes simplex volume.
        let (r, far) = others
            .iter()
            .enumerate()
            .map(|(r, &i)| (r, dist(&pts[i], &pts[b])))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if far > 2.0 * rho {
            let mut e = vec![0.0; n];
            e[r] = 1.0;
            let mut dir = solve(dmat, e, n).unwrap_or_else(|| {
                let mut d = vec![0.0; n];
                d[r % n] = 1.0;
                d
            });
            let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v *= rho / dn);
            let x: Vec<f64> = pts[b].iter().zip(&dir).map(|(a, d)| a + d).collect();
            let Some(v) = c.eval(&x) else { return finish(c, false) };
            pts[others[r]] = x;
            vals[others[r]] = v;
            continue;
        }

        rho *= 0.5;
        if rho < opts.rho_end {
            return finish(c, true);
        }
    }
}
