//! Hard thresholding, the centralized IHT iteration, and the step-size
//! and error utilities shared with the distributed solver.

use std::cmp::Ordering;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::{cast, Float};
use crate::recovery::RecoveryProblem;

/// Iterates are declared divergent once their norm exceeds this multiple
/// of the planted signal's norm.
pub(crate) const DIVERGENCE_FACTOR: f64 = 1e6;

/// Keeps the `k` largest-magnitude entries of `v` and zeroes the rest.
///
/// Magnitude ties are broken toward the lower index, so the result is a
/// deterministic function of the input. `k >= v.len()` returns a copy.
pub fn hard_threshold<T: Float>(v: ArrayView1<'_, T>, k: usize) -> Array1<T> {
    if k >= v.len() {
        return v.to_owned();
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_unstable_by(|&i, &j| magnitude_rank(v[i], i, v[j], j));
    let mut out = Array1::zeros(v.len());
    for &i in &order[..k] {
        out[i] = v[i];
    }
    out
}

/// Orders `(value, index)` pairs by magnitude descending, index ascending.
pub(crate) fn magnitude_rank<T: Float>(a: T, ia: usize, b: T, ib: usize) -> Ordering {
    b.abs()
        .partial_cmp(&a.abs())
        .unwrap_or(Ordering::Equal)
        .then(ia.cmp(&ib))
}

/// `‖estimate − reference‖₂ / ‖reference‖₂`.
///
/// Errors when the reference has zero norm or the lengths differ.
pub fn relative_error<T: Float>(
    estimate: ArrayView1<'_, T>,
    reference: ArrayView1<'_, T>,
) -> Result<T> {
    if estimate.len() != reference.len() {
        return Err(Error::invalid(format!(
            "length mismatch: estimate has {}, reference has {}",
            estimate.len(),
            reference.len()
        )));
    }
    let ref_norm = l2_norm(reference);
    if ref_norm == T::zero() {
        return Err(Error::invalid("reference signal has zero norm"));
    }
    let diff = &estimate.to_owned() - &reference;
    Ok(l2_norm(diff.view()) / ref_norm)
}

pub(crate) fn l2_norm<T: Float>(v: ArrayView1<'_, T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Convergence measure used by the solvers: relative error when the
/// reference is nonzero, absolute error otherwise.
pub(crate) fn convergence_error<T: Float>(
    estimate: ArrayView1<'_, T>,
    reference: ArrayView1<'_, T>,
    ref_norm: T,
) -> T {
    let diff = &estimate.to_owned() - &reference;
    let norm = l2_norm(diff.view());
    if ref_norm > T::zero() {
        norm / ref_norm
    } else {
        norm
    }
}

/// Largest eigenvalue of `AᵀA`, estimated by power iteration without
/// forming the Gram matrix.
///
/// Converges to relative tolerance `1e-6`; errors after `1e4` steps
/// without convergence, or when `a` is zero or empty.
pub fn largest_gram_eigenvalue<T: Float>(a: ArrayView2<'_, T>) -> Result<T> {
    const REL_TOL: f64 = 1e-6;
    const MAX_STEPS: usize = 10_000;

    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::invalid("matrix must be non-empty"));
    }
    if a.iter().all(|&x| x == T::zero()) {
        return Err(Error::invalid("matrix is identically zero"));
    }

    // Fixed seed: the estimate must not depend on ambient state.
    let mut rng = ChaCha8Rng::seed_from_u64(0x7c0f_f336_41e5_209d);
    let mut v: Array1<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
    let norm = l2_norm(v.view());
    v.mapv_inplace(|x| x / norm);

    let rel_tol = cast::<T>(REL_TOL);
    let mut lambda = T::zero();
    for _ in 0..MAX_STEPS {
        let av = a.dot(&v);
        let next = av.dot(&av); // Rayleigh quotient vᵀAᵀAv with ‖v‖ = 1
        let atav = a.t().dot(&av);
        let norm = l2_norm(atav.view());
        if norm == T::zero() {
            // v landed in the null space; restart from a fresh direction.
            v = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
            let n0 = l2_norm(v.view());
            v.mapv_inplace(|x| x / n0);
            continue;
        }
        v = atav / norm;
        if (next - lambda).abs() <= rel_tol * next {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numerical(format!(
        "power iteration did not reach relative tolerance {REL_TOL:e} within {MAX_STEPS} steps"
    )))
}

/// Largest step size with the convergence guarantee, `1 / (2 λ_max(AᵀA))`.
pub fn max_step_size<T: Float>(a: ArrayView2<'_, T>) -> Result<T> {
    let lambda = largest_gram_eigenvalue(a)?;
    Ok(T::one() / (cast::<T>(2.0) * lambda))
}

#[derive(Clone, Debug)]
pub struct IhtOptions<T> {
    /// Gradient step size α.
    pub step_size: T,
    /// Stop once the error against the planted signal drops to this level.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Keep every iterate (for trajectory comparisons).
    pub record_iterates: bool,
}

impl<T: Float> IhtOptions<T> {
    pub fn new(step_size: T) -> Self {
        IhtOptions {
            step_size,
            tolerance: cast(1e-2),
            max_iterations: 2000,
            record_iterates: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IhtRun<T> {
    pub estimate: Array1<T>,
    /// Iterations actually performed.
    pub iterations: usize,
    pub converged: bool,
    /// `errors[t]` is the error against the planted signal after
    /// iteration `t + 1`. Empty when the start point already converges.
    pub errors: Vec<T>,
    /// Present when `record_iterates` was set; `iterates[t]` is the
    /// estimate after iteration `t + 1`.
    pub iterates: Option<Vec<Array1<T>>>,
}

/// Centralized IHT on the assembled system:
/// `x ← H_K(x + α Aᵀ(b − A x))` from `x = 0`.
///
/// Stops when the error against the planted signal reaches the
/// tolerance or after `max_iterations`. Errors when the iterate norm
/// exceeds `1e6` times the planted norm (divergent step size).
pub fn centralized_iht<T: Float>(
    problem: &RecoveryProblem<T>,
    options: &IhtOptions<T>,
) -> Result<IhtRun<T>> {
    if options.step_size <= T::zero() || !options.step_size.is_finite() {
        return Err(Error::invalid("step size must be positive and finite"));
    }
    let a = problem.full_matrix();
    let b = problem.full_measurements();
    let reference = problem.planted();
    let ref_norm = l2_norm(reference.view());
    let alpha = options.step_size;
    let k = problem.sparsity();
    let guard = cast::<T>(DIVERGENCE_FACTOR) * ref_norm;

    let mut x: Array1<T> = Array1::zeros(problem.n());
    let mut errors = Vec::new();
    let mut iterates = options.record_iterates.then(Vec::new);

    if convergence_error(x.view(), reference.view(), ref_norm) <= options.tolerance {
        return Ok(IhtRun {
            estimate: x,
            iterations: 0,
            converged: true,
            errors,
            iterates,
        });
    }

    for t in 1..=options.max_iterations {
        let residual = &b - &a.dot(&x);
        let v = &x + &(a.t().dot(&residual) * alpha);
        x = hard_threshold(v.view(), k);

        let err = convergence_error(x.view(), reference.view(), ref_norm);
        errors.push(err);
        if let Some(trace) = iterates.as_mut() {
            trace.push(x.clone());
        }
        if ref_norm > T::zero() && l2_norm(x.view()) > guard {
            return Err(Error::Diverged {
                iteration: t,
                step_size: alpha.to_f64().unwrap_or(f64::NAN),
            });
        }
        if err <= options.tolerance {
            return Ok(IhtRun {
                estimate: x,
                iterations: t,
                converged: true,
                errors,
                iterates,
            });
        }
    }

    Ok(IhtRun {
        estimate: x,
        iterations: options.max_iterations,
        converged: false,
        errors,
        iterates,
    })
}
