//! Parameter optimization against batched, possibly noisy energy oracles:
//! conjugate model gradient descent, its plain (non-conjugate) baseline, and
//! a deterministic quasi-Newton reference for producing noiseless optima.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Hyperparameters of the model-gradient loop.
#[derive(Clone, Debug)]
pub struct CmgdConfig {
    /// learning rate γ
    pub gamma: f64,
    /// sample radius δ
    pub delta: f64,
    /// iteration cap n
    pub max_iterations: usize,
    /// oracle samples per iteration k (current point is evaluated too)
    pub samples_per_iteration: usize,
    /// learning-rate decay exponent: γ′ = γ/(m+1+A)^α
    pub rate_decay: f64,
    /// stability constant A in the decay denominator
    pub stability: f64,
    /// sample-radius decay exponent: δ′ = δ/(m+1)^ξ
    pub radius_decay: f64,
    /// gradient-norm stopping tolerance ε
    pub tolerance: f64,
    /// replace the γ′ step with the model's exact line-search step
    /// t* = gᵀh/(2hᵀAh); analysis mode used by conjugacy tests
    pub line_search: bool,
}

/// Published defaults: δ=1, γ=0.15, A=0, ξ=0, α=0.2, n=12 and
/// k = round(0.409(d+1)(d+2)) for d parameters.
pub fn default_hyperparameters(n_params: usize) -> CmgdConfig {
    let d = n_params as f64;
    CmgdConfig {
        gamma: 0.15,
        delta: 1.0,
        max_iterations: 12,
        samples_per_iteration: (0.409 * (d + 1.0) * (d + 2.0)).round() as usize,
        rate_decay: 0.2,
        stability: 0.0,
        radius_decay: 0.0,
        tolerance: 0.0,
        line_search: false,
    }
}

/// One optimizer iteration's bookkeeping.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    /// oracle value at x
    pub energy: f64,
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
    pub beta: f64,
    pub direction: Vec<f64>,
    pub gamma_eff: f64,
    pub delta_eff: f64,
}

#[derive(Clone, Debug, Default)]
pub struct OptimizerTrace {
    pub iterations: Vec<IterationRecord>,
    pub oracle_calls: usize,
}

impl OptimizerTrace {
    /// CSV rows: iteration, energy, |g|, β, γ′.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,energy,gradient_norm,beta,gamma_eff\n");
        for it in &self.iterations {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                it.iteration, it.energy, it.gradient_norm, it.beta, it.gamma_eff
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub x: Vec<f64>,
    pub trace: OptimizerTrace,
    /// true when the |g| < ε criterion fired before the iteration cap
    pub converged: bool,
    /// set when the oracle failed mid-run; the trace covers what completed
    pub failure: Option<String>,
}

/// Least-squares quadratic model around `center`: f(center+d) ≈ dᵀAd + bᵀd + c.
/// The returned A is symmetric. Requires at least two distinct points; the
/// regression uses the minimum-norm solution when underdetermined.
pub fn fit_quadratic_model(
    points: &[(Vec<f64>, f64)],
    center: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let d = center.len();
    if points.len() < 2 {
        return Err(Error::invalid("quadratic fit needs at least two points"));
    }
    let n_features = 1 + d + d * (d + 1) / 2;
    let mut design = DMatrix::<f64>::zeros(points.len(), n_features);
    let mut rhs = DVector::<f64>::zeros(points.len());
    for (row, (x, y)) in points.iter().enumerate() {
        if x.len() != d {
            return Err(Error::dim("point dimension mismatch in quadratic fit"));
        }
        let dx: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
        design[(row, 0)] = 1.0;
        for i in 0..d {
            design[(row, 1 + i)] = dx[i];
        }
        let mut col = 1 + d;
        for i in 0..d {
            for j in i..d {
                design[(row, col)] = dx[i] * dx[j];
                col += 1;
            }
        }
        rhs[row] = *y;
    }
    let coeffs = min_norm_ls(&design, &rhs)?;
    let c = coeffs[0];
    let b = DVector::from_iterator(d, (0..d).map(|i| coeffs[1 + i]));
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut col = 1 + d;
    for i in 0..d {
        for j in i..d {
            if i == j {
                a[(i, i)] = coeffs[col];
            } else {
                a[(i, j)] = coeffs[col] / 2.0;
                a[(j, i)] = coeffs[col] / 2.0;
            }
            col += 1;
        }
    }
    Ok((a, b, c))
}

/// Minimum-norm least squares through the Gram matrix on the smaller side.
/// The symmetric eigendecomposition stays accurate on the degenerate spectra
/// these designs produce, where the general SVD solve can drift off the
/// least-squares optimum.
fn min_norm_ls(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let (gram, b, wide) = if m.nrows() >= m.ncols() {
        (m.transpose() * m, m.transpose() * rhs, false)
    } else {
        (m * m.transpose(), rhs.clone(), true)
    };
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if lmax <= 0.0 {
        return Err(Error::numerical("degenerate design matrix in quadratic fit"));
    }
    let tol = lmax * 1e-12;
    let mut y = DVector::zeros(b.len());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > tol {
            let u = eig.eigenvectors.column(i);
            y += u * (u.dot(&b) / l);
        }
    }
    Ok(if wide { m.transpose() * y } else { y })
}

/// Fletcher–Reeves conjugate update: β = gᵀg / g_prevᵀg_prev, h = g + βh_prev.
fn conjugate_update(g: &DVector<f64>, prev_g_norm2: f64, h_prev: &DVector<f64>) -> (f64, DVector<f64>) {
    let beta = if prev_g_norm2 > 0.0 {
        g.norm_squared() / prev_g_norm2
    } else {
        0.0
    };
    (beta, g + h_prev * beta)
}

fn sample_ball(rng: &mut ChaCha12Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    // Gaussian direction normalized onto the sphere, radial u^(1/d) for
    // uniform density in the ball
    let mut dir = vec![0.0; d];
    loop {
        let mut norm2 = 0.0;
        for v in dir.iter_mut() {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen::<f64>();
            *v = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            norm2 += *v * *v;
        }
        if norm2 > 1e-24 {
            let u: f64 = rng.gen::<f64>();
            let r = radius * u.powf(1.0 / d as f64) / norm2.sqrt();
            return center.iter().zip(&dir).map(|(c, v)| c + r * v).collect();
        }
    }
}

fn run_model_descent<F>(
    mut oracle: F,
    x0: &[f64],
    config: &CmgdConfig,
    seed: u64,
    conjugate: bool,
) -> Result<OptimizationResult>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    if config.gamma <= 0.0 || config.delta <= 0.0 {
        return Err(Error::invalid("learning rate and sample radius must be positive"));
    }
    if x0.is_empty() {
        return Err(Error::invalid("empty parameter vector"));
    }
    let d = x0.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = DVector::from_column_slice(x0);
    let mut history: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut trace = OptimizerTrace::default();
    let mut h_prev = DVector::<f64>::zeros(d);
    let mut prev_g_norm2 = 0.0;
    let mut converged = false;

    for m in 0..config.max_iterations {
        let delta_eff = config.delta / ((m + 1) as f64).powf(config.radius_decay);
        let mut batch: Vec<Vec<f64>> =
            Vec::with_capacity(config.samples_per_iteration + 1);
        for _ in 0..config.samples_per_iteration {
            batch.push(sample_ball(&mut rng, x.as_slice(), delta_eff));
        }
        batch.push(x.as_slice().to_vec());
        let values = match oracle(&batch) {
            Ok(v) => v,
            Err(e) => {
                return Ok(OptimizationResult {
                    x: x.as_slice().to_vec(),
                    trace,
                    converged: false,
                    failure: Some(format!("oracle failed at iteration {m}: {e}")),
                });
            }
        };
        if values.len() != batch.len() {
            return Err(Error::dim("oracle returned a mismatched batch"));
        }
        trace.oracle_calls += batch.len();
        let energy_here = *values.last().unwrap();
        for (pt, val) in batch.iter().zip(&values) {
            history.push((pt.clone(), *val));
        }
        // refit against every past point still within the (undecayed) radius
        let local: Vec<(Vec<f64>, f64)> = history
            .iter()
            .filter(|(p, _)| {
                p.iter()
                    .zip(x.as_slice())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    < config.delta
            })
            .cloned()
            .collect();
        let (a, g, _) = fit_quadratic_model(&local, x.as_slice())?;
        let g_norm = g.norm();
        let (beta, h) = if conjugate {
            conjugate_update(&g, prev_g_norm2, &h_prev)
        } else {
            (0.0, g.clone())
        };
        let gamma_eff = config.gamma / ((m + 1) as f64 + config.stability).powf(config.rate_decay);
        let step = if config.line_search {
            let hah = (h.transpose() * &a * &h)[(0, 0)];
            if hah > 1e-14 {
                g.dot(&h) / (2.0 * hah)
            } else {
                gamma_eff
            }
        } else {
            gamma_eff
        };
        trace.iterations.push(IterationRecord {
            iteration: m,
            x: x.as_slice().to_vec(),
            energy: energy_here,
            gradient: g.as_slice().to_vec(),
            gradient_norm: g_norm,
            beta,
            direction: h.as_slice().to_vec(),
            gamma_eff: step,
            delta_eff,
        });
        if g_norm < config.tolerance {
            converged = true;
            break;
        }
        x -= &h * step;
        prev_g_norm2 = g.norm_squared();
        h_prev = h;
    }
    Ok(OptimizationResult {
        x: x.as_slice().to_vec(),
        trace,
        converged,
        failure: None,
    })
}

/// Conjugate model gradient descent: per iteration, sample k points in the
/// shrinking ball, batch-evaluate them with the current point, refit a
/// quadratic surrogate on all history within the sample radius, and step
/// along the Fletcher–Reeves conjugate direction.
pub fn cmgd_minimize<F>(
    oracle: F,
    x0: &[f64],
    config: &CmgdConfig,
    seed: u64,
) -> Result<OptimizationResult>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    run_model_descent(oracle, x0, config, seed, true)
}

/// Plain model gradient descent: the same loop with the conjugate mixing
/// coefficient pinned to zero.
pub fn mgd_minimize<F>(
    oracle: F,
    x0: &[f64],
    config: &CmgdConfig,
    seed: u64,
) -> Result<OptimizationResult>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    run_model_descent(oracle, x0, config, seed, false)
}

fn fd_gradient<F>(oracle: &mut F, x: &[f64], h: f64) -> Result<DVector<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut g = DVector::zeros(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = oracle(&probe)?;
        probe[i] = x[i] - h;
        let dn = oracle(&probe)?;
        probe[i] = x[i];
        g[i] = (up - dn) / (2.0 * h);
    }
    Ok(g)
}

/// Deterministic noiseless reference optimizer: BFGS with central
/// finite-difference gradients and Armijo backtracking. Converges to
/// ‖g‖ < 1e−6 or errors.
pub fn reference_minimize<F>(mut oracle: F, x0: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    const GRAD_TOL: f64 = 1e-6;
    const FD_STEP: f64 = 1e-5;
    const MAX_ITER: usize = 1000;
    let d = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut f = oracle(x.as_slice())?;
    let mut g = fd_gradient(&mut oracle, x.as_slice(), FD_STEP)?;
    let mut h_inv = DMatrix::<f64>::identity(d, d);
    let mut restarted = false;
    for _ in 0..MAX_ITER {
        if g.norm() < GRAD_TOL {
            return Ok(x.as_slice().to_vec());
        }
        let dir = -(&h_inv * &g);
        let slope = g.dot(&dir);
        let (dir, slope) = if slope >= 0.0 {
            // curvature information went bad; restart from steepest descent
            h_inv = DMatrix::identity(d, d);
            let dir = -g.clone();
            let slope = -g.norm_squared();
            (dir, slope)
        } else {
            (dir, slope)
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + &dir * t;
            let fc = oracle(cand.as_slice())?;
            if fc <= f + 1e-4 * t * slope {
                let g_new = fd_gradient(&mut oracle, cand.as_slice(), FD_STEP)?;
                let s = &cand - &x;
                let y = &g_new - &g;
                let sy = s.dot(&y);
                if sy > 1e-12 {
                    let rho = 1.0 / sy;
                    let i_mat = DMatrix::<f64>::identity(d, d);
                    let left = &i_mat - &s * y.transpose() * rho;
                    let right = &i_mat - &y * s.transpose() * rho;
                    h_inv = &left * h_inv * &right + &s * s.transpose() * rho;
                }
                x = cand;
                f = fc;
                g = g_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if restarted {
                if g.norm() < 1e-4 {
                    // line search exhausted at the noise floor
                    return Ok(x.as_slice().to_vec());
                }
                return Err(Error::numerical(
                    "reference optimizer stalled before reaching gradient tolerance",
                ));
            }
            h_inv = DMatrix::identity(d, d);
            restarted = true;
        } else {
            restarted = false;
        }
    }
    if g.norm() < 1e-4 {
        return Ok(x.as_slice().to_vec());
    }
    Err(Error::numerical("reference optimizer hit the iteration cap"))
}
