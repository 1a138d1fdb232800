//! Feed-forward networks with exact reverse-mode derivatives.
//!
//! Parameters are kept in a flat vector ordered layer by layer: weights
//! row-major, then biases. The output layer is always affine so that factor
//! entries and stresses are unbounded in sign and scale.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SELU_LAMBDA: f64 = 1.0507009873554805;
const SELU_ALPHA: f64 = 1.6732632423543772;
const LEAKY_SLOPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    LeakyRelu,
    Selu,
    Elu,
}

impl Activation {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * (z.exp() - 1.0)
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp() - 1.0
                }
            }
        }
    }

    /// Derivative expressed through the post-activation value `a`.
    #[inline]
    fn deriv_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if a > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Selu => {
                if a > 0.0 {
                    SELU_LAMBDA
                } else {
                    a + SELU_LAMBDA * SELU_ALPHA
                }
            }
            Activation::Elu => {
                if a > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "leaky-relu" => Ok(Activation::LeakyRelu),
            "selu" => Ok(Activation::Selu),
            "elu" => Ok(Activation::Elu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky-relu",
            Activation::Selu => "selu",
            Activation::Elu => "elu",
        }
    }
}

/// Architecture description: layer widths from input to output, hidden
/// activation, and the initialization seed.
#[derive(Clone, Debug, PartialEq)]
pub struct NetSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl NetSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config("network needs at least input and output widths".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        Ok(NetSpec { widths, activation, seed })
    }

    /// Input/hidden/output widths for `depth` hidden layers of `width` nodes.
    pub fn mlp(input: usize, depth: usize, width: usize, output: usize, activation: Activation, seed: u64) -> Self {
        let mut widths = Vec::with_capacity(depth + 2);
        widths.push(input);
        widths.extend(std::iter::repeat(width).take(depth));
        widths.push(output);
        NetSpec { widths, activation, seed }
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    fn act_buf_len(&self) -> usize {
        self.widths.iter().sum()
    }
}

/// Xavier-uniform weights and zero biases, deterministic in the spec's seed.
pub fn init_params(spec: &NetSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut theta = Vec::with_capacity(spec.param_count());
    for w in spec.widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            theta.push(rng.gen_range(-bound..bound));
        }
        theta.extend(std::iter::repeat(0.0).take(fan_out));
    }
    theta
}

/// Post-activation values of every layer (input included), reusable across
/// calls to avoid reallocation in training loops.
#[derive(Clone, Debug, Default)]
pub struct Cache {
    acts: Vec<f64>,
    scratch_a: Vec<f64>,
    scratch_b: Vec<f64>,
}

fn check_shapes(spec: &NetSpec, theta: &[f64], x: &[f64]) -> Result<()> {
    if theta.len() != spec.param_count() {
        return Err(Error::InvalidArgument(format!(
            "parameter vector has length {}, spec needs {}",
            theta.len(),
            spec.param_count()
        )));
    }
    if x.len() != spec.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "input has length {}, spec expects {}",
            x.len(),
            spec.input_dim()
        )));
    }
    Ok(())
}

/// Runs the network, filling `cache` with all layer activations.
/// Returns the output as the tail slice of the cache.
pub fn forward_cached<'c>(
    spec: &NetSpec,
    theta: &[f64],
    x: &[f64],
    cache: &'c mut Cache,
) -> Result<&'c [f64]> {
    check_shapes(spec, theta, x)?;
    cache.acts.clear();
    cache.acts.reserve(spec.act_buf_len());
    cache.acts.extend_from_slice(x);
    let mut in_off = 0;
    let mut p = 0;
    let n_layers = spec.layer_count();
    for (l, w) in spec.widths.windows(2).enumerate() {
        let (nin, nout) = (w[0], w[1]);
        let weights = &theta[p..p + nout * nin];
        let biases = &theta[p + nout * nin..p + nout * nin + nout];
        p += nout * nin + nout;
        let out_off = cache.acts.len();
        let last = l + 1 == n_layers;
        for r in 0..nout {
            let row = &weights[r * nin..(r + 1) * nin];
            let mut z = biases[r];
            for (wi, ai) in row.iter().zip(&cache.acts[in_off..in_off + nin]) {
                z += wi * ai;
            }
            cache.acts.push(if last { z } else { spec.activation.apply(z) });
        }
        in_off = out_off;
    }
    Ok(&cache.acts[in_off..])
}

/// Convenience forward pass.
pub fn forward(spec: &NetSpec, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut cache = Cache::default();
    forward_cached(spec, theta, x, &mut cache).map(|y| y.to_vec())
}

/// Reverse-mode products for a cached forward pass: accumulates `ȳᵀ∂y/∂θ`
/// into `grad_theta` and writes `ȳᵀ∂y/∂x` into `grad_x`.
pub fn vjp_cached(
    spec: &NetSpec,
    theta: &[f64],
    cache: &Cache,
    ybar: &[f64],
    grad_theta: &mut [f64],
    grad_x: &mut [f64],
) -> Result<()> {
    if ybar.len() != spec.output_dim() {
        return Err(Error::InvalidArgument("cotangent length mismatch".into()));
    }
    if grad_theta.len() != spec.param_count() || grad_x.len() != spec.input_dim() {
        return Err(Error::InvalidArgument("gradient buffer length mismatch".into()));
    }
    let n_layers = spec.layer_count();
    // Offsets of each layer's activations and parameters.
    let mut act_offs = Vec::with_capacity(n_layers + 1);
    let mut par_offs = Vec::with_capacity(n_layers);
    let mut ao = 0;
    let mut po = 0;
    for w in spec.widths.windows(2) {
        act_offs.push(ao);
        par_offs.push(po);
        ao += w[0];
        po += w[1] * w[0] + w[1];
    }
    act_offs.push(ao);

    let mut delta = ybar.to_vec();
    let mut delta_prev: Vec<f64> = Vec::new();
    for l in (0..n_layers).rev() {
        let (nin, nout) = (spec.widths[l], spec.widths[l + 1]);
        let a_in = &cache.acts[act_offs[l]..act_offs[l] + nin];
        let a_out = &cache.acts[act_offs[l + 1]..act_offs[l + 1] + nout];
        // δ_z: multiply by activation derivative on hidden layers.
        if l + 1 != n_layers {
            for (d, &a) in delta.iter_mut().zip(a_out) {
                *d *= spec.activation.deriv_from_output(a);
            }
        }
        let wp = par_offs[l];
        let gw = &mut grad_theta[wp..wp + nout * nin + nout];
        for r in 0..nout {
            let dz = delta[r];
            if dz != 0.0 {
                let row = &mut gw[r * nin..(r + 1) * nin];
                for (g, &a) in row.iter_mut().zip(a_in) {
                    *g += dz * a;
                }
            }
            gw[nout * nin + r] += dz;
        }
        // δ_{a_in} = Wᵀ δ_z
        delta_prev.clear();
        delta_prev.resize(nin, 0.0);
        let weights = &theta[wp..wp + nout * nin];
        for r in 0..nout {
            let dz = delta[r];
            if dz != 0.0 {
                let row = &weights[r * nin..(r + 1) * nin];
                for (dp, &w) in delta_prev.iter_mut().zip(row) {
                    *dp += dz * w;
                }
            }
        }
        std::mem::swap(&mut delta, &mut delta_prev);
    }
    grad_x.copy_from_slice(&delta);
    Ok(())
}

/// One-shot reverse-mode products: `(ȳᵀ∂y/∂θ, ȳᵀ∂y/∂x)`.
pub fn vjp(spec: &NetSpec, theta: &[f64], x: &[f64], ybar: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cache = Cache::default();
    forward_cached(spec, theta, x, &mut cache)?;
    let mut gt = vec![0.0; spec.param_count()];
    let mut gx = vec![0.0; spec.input_dim()];
    vjp_cached(spec, theta, &cache, ybar, &mut gt, &mut gx)?;
    Ok((gt, gx))
}

/// Full Jacobian `∂y/∂x` (row-major, output_dim × input_dim) from a cached
/// forward pass. Row `i` equals the input-vjp with unit cotangent `eᵢ`.
pub fn jac_input_cached(spec: &NetSpec, theta: &[f64], cache: &mut Cache, jac: &mut [f64]) -> Result<()> {
    let (nin, nout) = (spec.input_dim(), spec.output_dim());
    if jac.len() != nin * nout {
        return Err(Error::InvalidArgument("jacobian buffer length mismatch".into()));
    }
    let n_layers = spec.layer_count();
    let mut act_offs = Vec::with_capacity(n_layers + 1);
    let mut par_offs = Vec::with_capacity(n_layers);
    let mut ao = 0;
    let mut po = 0;
    for w in spec.widths.windows(2) {
        act_offs.push(ao);
        par_offs.push(po);
        ao += w[0];
        po += w[1] * w[0] + w[1];
    }
    act_offs.push(ao);
    for row in 0..nout {
        cache.scratch_a.clear();
        cache.scratch_a.resize(nout, 0.0);
        cache.scratch_a[row] = 1.0;
        for l in (0..n_layers).rev() {
            let (lin, lout) = (spec.widths[l], spec.widths[l + 1]);
            let a_out = &cache.acts[act_offs[l + 1]..act_offs[l + 1] + lout];
            if l + 1 != n_layers {
                for (d, &a) in cache.scratch_a.iter_mut().zip(a_out) {
                    *d *= spec.activation.deriv_from_output(a);
                }
            }
            cache.scratch_b.clear();
            cache.scratch_b.resize(lin, 0.0);
            let weights = &theta[par_offs[l]..par_offs[l] + lout * lin];
            for r in 0..lout {
                let dz = cache.scratch_a[r];
                if dz != 0.0 {
                    let wrow = &weights[r * lin..(r + 1) * lin];
                    for (dp, &w) in cache.scratch_b.iter_mut().zip(wrow) {
                        *dp += dz * w;
                    }
                }
            }
            std::mem::swap(&mut cache.scratch_a, &mut cache.scratch_b);
        }
        jac[row * nin..(row + 1) * nin].copy_from_slice(&cache.scratch_a);
    }
    Ok(())
}

/// One-shot input Jacobian.
pub fn jac_input(spec: &NetSpec, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut cache = Cache::default();
    forward_cached(spec, theta, x, &mut cache)?;
    let mut jac = vec![0.0; spec.input_dim() * spec.output_dim()];
    jac_input_cached(spec, theta, &mut cache, &mut jac)?;
    Ok(jac)
}
