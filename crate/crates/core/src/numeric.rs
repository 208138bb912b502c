//! Matrix instantiation of recursion formulas.
//!
//! Each block symbol `W[k]` becomes a random `d x d` matrix. For affine specs
//! the Jacobian `dX[L]/dX[j]` is computed exactly by pushing basis vectors
//! through the recursion and compared with the symbolic derivative evaluated
//! on the same matrices. Plain chains and residual chains may also carry a
//! `tanh` after each junction, checked against central differences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expand::{Engine, ExpandError};
use crate::poly::PathPolynomial;
use crate::spec::{ArchitectureSpec, StateTerms};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("activation is only supported for the plain and residual chains, not `{spec}`")]
    Activation { spec: String },
    #[error("block index {index} is outside 1..={depth}")]
    Index { index: u32, depth: u32 },
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("finite-difference step {0} is outside (0, 1e-2]")]
    Epsilon(String),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Tanh,
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Activation::None),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(format!("unknown activation `{s}` (expected none or tanh)")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::None => "none",
            Activation::Tanh => "tanh",
        })
    }
}

/// The two lag-1 chains that admit an activation after each junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// `X[i] = W[i]*X[i-1]`
    Plain,
    /// `X[i] = (1 + W[i])*X[i-1]`
    Residual,
}

impl ChainKind {
    /// Classifies `spec` over states `1..=depth`.
    pub fn detect(spec: &ArchitectureSpec, depth: u32) -> Option<ChainKind> {
        [ChainKind::Plain, ChainKind::Residual]
            .into_iter()
            .find(|kind| {
                (1..=depth).all(|i| {
                    let mut expected = StateTerms::new();
                    expected.insert(i - 1, kind.step(i));
                    spec.state_terms(i) == expected
                })
            })
    }

    fn step(self, i: u32) -> PathPolynomial {
        match self {
            ChainKind::Plain => PathPolynomial::block(i),
            ChainKind::Residual => PathPolynomial::one().add(&PathPolynomial::block(i)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConcreteNet {
    pub spec: ArchitectureSpec,
    pub depth: u32,
    pub dim: usize,
    /// `matrices[k - 1]` realizes `W[k]`.
    pub matrices: Vec<DMatrix<f64>>,
    pub activation: Activation,
    pub seed: u64,
    chain: Option<ChainKind>,
}

/// Draws every block matrix i.i.d. uniform on `[-0.5, 0.5]`, scaled by
/// `1/sqrt(d)`, from a ChaCha8 stream seeded with `seed`.
pub fn instantiate(
    spec: &ArchitectureSpec,
    depth: u32,
    dim: usize,
    seed: u64,
    activation: Activation,
) -> Result<ConcreteNet, NumericError> {
    if dim == 0 {
        return Err(NumericError::ZeroDimension);
    }
    if depth == 0 {
        return Err(ExpandError::ZeroDepth.into());
    }
    let chain = ChainKind::detect(spec, depth);
    if activation != Activation::None && chain.is_none() {
        return Err(NumericError::Activation {
            spec: spec.name.clone(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let matrices = (0..depth)
        .map(|_| DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.5..=0.5) * scale))
        .collect();
    Ok(ConcreteNet {
        spec: spec.clone(),
        depth,
        dim,
        matrices,
        activation,
        seed,
        chain,
    })
}

impl ConcreteNet {
    /// Replaces every block matrix.
    pub fn with_matrices(mut self, matrices: Vec<DMatrix<f64>>) -> Self {
        assert_eq!(matrices.len(), self.depth as usize);
        assert!(matrices
            .iter()
            .all(|m| m.nrows() == self.dim && m.ncols() == self.dim));
        self.matrices = matrices;
        self
    }

    pub fn block(&self, k: u32) -> &DMatrix<f64> {
        &self.matrices[k as usize - 1]
    }

    /// Deterministic probe input for finite differences, independent of the
    /// matrix stream.
    pub fn probe_input(&self) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        DVector::from_fn(self.dim, |_, _| rng.random_range(-1.0..=1.0))
    }

    fn apply(&self, poly: &PathPolynomial, v: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim);
        for (word, c) in poly.iter() {
            let mut t = v.clone();
            for &k in word.factors().iter().rev() {
                t = self.block(k) * t;
            }
            acc.axpy(c as f64, &t, 1.0);
        }
        acc
    }

    /// Runs the affine recursion from state `start` set to `init`; states
    /// below `start` are zero. Returns `X[start..=depth]`, indexed by state.
    fn propagate_affine(&self, start: u32, init: DVector<f64>) -> Vec<DVector<f64>> {
        let mut states = vec![DVector::zeros(self.dim); self.depth as usize + 1];
        states[start as usize] = init;
        for i in start + 1..=self.depth {
            let mut acc = DVector::zeros(self.dim);
            for (src, coeff) in self.spec.state_terms(i) {
                if src >= start {
                    acc += self.apply(&coeff, &states[src as usize]);
                }
            }
            states[i as usize] = acc;
        }
        states
    }

    /// `tanh` chain from `start`; returns states and pre-activations.
    fn propagate_tanh(
        &self,
        start: u32,
        init: DVector<f64>,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let chain = self.chain.expect("activation requires a chain spec");
        let mut states = vec![DVector::zeros(self.dim); self.depth as usize + 1];
        let mut pre = vec![DVector::zeros(self.dim); self.depth as usize + 1];
        states[start as usize] = init;
        for i in start + 1..=self.depth {
            let prev = &states[i as usize - 1];
            let mapped = self.block(i) * prev;
            let z = match chain {
                ChainKind::Plain => mapped,
                ChainKind::Residual => prev + mapped,
            };
            states[i as usize] = z.map(f64::tanh);
            pre[i as usize] = z;
        }
        (states, pre)
    }
}

/// States of one forward pass. `states[i]` is `X[i]`, including `X[0]`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub states: Vec<DVector<f64>>,
    /// Junction sums before the activation, present only with `tanh`.
    pub pre_activations: Option<Vec<DVector<f64>>>,
}

impl ForwardPass {
    pub fn output(&self) -> &DVector<f64> {
        self.states.last().expect("at least X[0]")
    }
}

pub fn forward(net: &ConcreteNet, x0: &DVector<f64>) -> Result<ForwardPass, NumericError> {
    if x0.len() != net.dim {
        return Err(NumericError::Dimension {
            expected: net.dim,
            got: x0.len(),
        });
    }
    Ok(match net.activation {
        Activation::None => ForwardPass {
            states: net.propagate_affine(0, x0.clone()),
            pre_activations: None,
        },
        Activation::Tanh => {
            let (states, pre) = net.propagate_tanh(0, x0.clone());
            ForwardPass {
                states,
                pre_activations: Some(pre),
            }
        }
    })
}

/// `dX[L]/dX[j]` by propagating each basis vector from `X[j]`.
pub fn jacobian_exact(net: &ConcreteNet, wrt: u32) -> Result<DMatrix<f64>, NumericError> {
    if net.activation != Activation::None {
        return Err(NumericError::Activation {
            spec: net.spec.name.clone(),
        });
    }
    check_wrt(net, wrt)?;
    let d = net.dim;
    let mut jac = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut e = DVector::zeros(d);
        e[k] = 1.0;
        let states = net.propagate_affine(wrt, e);
        jac.set_column(k, &states[net.depth as usize]);
    }
    Ok(jac)
}

fn check_wrt(net: &ConcreteNet, wrt: u32) -> Result<(), NumericError> {
    if wrt > net.depth {
        return Err(ExpandError::Wrt {
            wrt,
            depth: net.depth,
        }
        .into());
    }
    Ok(())
}

/// `sum coeff * M[f1] * M[f2] * ...` in the listed factor order.
pub fn eval_polynomial(
    poly: &PathPolynomial,
    net: &ConcreteNet,
) -> Result<DMatrix<f64>, NumericError> {
    if let Some(index) = poly.max_index().filter(|&k| k > net.depth) {
        return Err(NumericError::Index {
            index,
            depth: net.depth,
        });
    }
    let d = net.dim;
    let mut acc = DMatrix::zeros(d, d);
    for (word, c) in poly.iter() {
        let mut t = DMatrix::identity(d, d);
        for &k in word.factors() {
            t *= net.block(k);
        }
        acc += t * c as f64;
    }
    Ok(acc)
}

/// `||a - b||_F / ||b||_F`, or the absolute difference when `b` is zero.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianCheckResult {
    pub spec: String,
    #[serde(rename = "L")]
    pub depth: u32,
    #[serde(rename = "j")]
    pub wrt: u32,
    #[serde(rename = "d")]
    pub dim: usize,
    pub seed: u64,
    pub activation: Activation,
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl JacobianCheckResult {
    fn new(net: &ConcreteNet, wrt: u32, error: f64, tol: f64) -> Self {
        JacobianCheckResult {
            spec: net.spec.name.clone(),
            depth: net.depth,
            wrt,
            dim: net.dim,
            seed: net.seed,
            activation: net.activation,
            error,
            tol,
            pass: error.is_finite() && error <= tol,
        }
    }
}

/// Symbolic derivative evaluated on the net against the basis-propagation
/// Jacobian.
pub fn polynomial_check(
    engine: &Engine,
    net: &ConcreteNet,
    wrt: u32,
    tol: f64,
) -> Result<JacobianCheckResult, NumericError> {
    let poly = engine.derivative(&net.spec, net.depth, wrt)?;
    let symbolic = eval_polynomial(&poly, net)?;
    let exact = jacobian_exact(net, wrt)?;
    Ok(JacobianCheckResult::new(
        net,
        wrt,
        relative_error(&symbolic, &exact),
        tol,
    ))
}

/// The chain-rule product `D[L] A[L] ... D[j+1] A[j+1]` with
/// `D[i] = diag(tanh'(pre[i]))` and `A[i]` equal to `M[i]` or `I + M[i]`.
pub fn activation_product(net: &ConcreteNet, pass: &ForwardPass, wrt: u32) -> DMatrix<f64> {
    let chain = net.chain.expect("activation requires a chain spec");
    let pre = pass
        .pre_activations
        .as_ref()
        .expect("forward pass ran with an activation");
    let d = net.dim;
    let mut jac = DMatrix::identity(d, d);
    for i in (wrt + 1..=net.depth).rev() {
        let slope = pre[i as usize].map(|z| 1.0 - z.tanh().powi(2));
        let step = match chain {
            ChainKind::Plain => net.block(i).clone(),
            ChainKind::Residual => DMatrix::identity(d, d) + net.block(i),
        };
        jac = jac * DMatrix::from_diagonal(&slope) * step;
    }
    jac
}

/// Central differences on `X[j]` of the probe pass against the activation
/// product formula.
pub fn finite_diff_check(
    net: &ConcreteNet,
    wrt: u32,
    epsilon: f64,
    tol: f64,
) -> Result<JacobianCheckResult, NumericError> {
    if net.activation != Activation::Tanh {
        return Err(NumericError::Activation {
            spec: net.spec.name.clone(),
        });
    }
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(NumericError::Epsilon(epsilon.to_string()));
    }
    check_wrt(net, wrt)?;
    let pass = forward(net, &net.probe_input())?;
    let analytic = activation_product(net, &pass, wrt);
    let base = pass.states[wrt as usize].clone();
    let d = net.dim;
    let mut numeric = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut plus = base.clone();
        plus[k] += epsilon;
        let mut minus = base.clone();
        minus[k] -= epsilon;
        let hi = net.propagate_tanh(wrt, plus).0;
        let lo = net.propagate_tanh(wrt, minus).0;
        let col = (&hi[net.depth as usize] - &lo[net.depth as usize]) / (2.0 * epsilon);
        numeric.set_column(k, &col);
    }
    Ok(JacobianCheckResult::new(
        net,
        wrt,
        relative_error(&numeric, &analytic),
        tol,
    ))
}
