//! Dense-network building blocks with hand-written backward passes.
//!
//! Everything is f64 over flat row-major buffers. Each [`Linear`] owns its
//! weights and a gradient accumulator; backward passes *add* into the
//! accumulator so a training step can sum contributions from several loss
//! terms before the optimizer consumes them.
//!
//! Besides ordinary reverse-mode, the module exposes a forward-tangent
//! pass (`forward_tangent`) and its reverse (`backward_tangent`). Together
//! they differentiate a gradient-penalty term: the penalty's parameter
//! gradient is the reverse pass over the directional derivative of the
//! network along its own input gradient. For the piecewise-linear
//! activations used here the activation masks are locally constant, which
//! makes that second pass exact almost everywhere.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{sigmoid, sigmoid_grad};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    /// Number of rows.
    pub rows: usize,
    /// Number of columns.
    pub cols: usize,
    /// `rows * cols` values, row-major.
    pub data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Wraps an existing buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols, "matrix buffer length mismatch");
        Self { rows, cols, data }
    }

    /// An `n × 3` matrix holding the given points.
    pub fn from_points(points: &[[f64; 3]]) -> Self {
        let mut data = Vec::with_capacity(points.len() * 3);
        for p in points {
            data.extend_from_slice(p);
        }
        Self { rows: points.len(), cols: 3, data }
    }

    /// Reads a 3-column matrix back out as points.
    pub fn to_points(&self) -> Vec<[f64; 3]> {
        debug_assert_eq!(self.cols, 3, "to_points requires 3 columns");
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    /// Borrow of row `r`.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Mutable borrow of row `r`.
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Mutable view of one parameter tensor and its gradient, in the stable
/// traversal order the optimizer and serializer rely on.
pub struct TensorMut<'a> {
    /// Dotted name, e.g. `trunk0.w`.
    pub name: &'a str,
    /// Shape as `[rows, cols]` (biases use `[n, 1]`).
    pub dims: [usize; 2],
    /// Parameter values.
    pub data: &'a mut [f64],
    /// Gradient accumulator, same length as `data`.
    pub grad: &'a mut [f64],
}

/// Fully connected layer `y = W x + b` with gradient accumulators.
#[derive(Debug, Clone)]
pub struct Linear {
    /// Name used for parameter tensors (`<name>.w`, `<name>.b`).
    pub name: String,
    /// Input width.
    pub in_dim: usize,
    /// Output width.
    pub out_dim: usize,
    /// Weights, `out_dim × in_dim` row-major.
    pub w: Vec<f64>,
    /// Bias, length `out_dim`.
    pub b: Vec<f64>,
    w_name: String,
    b_name: String,
    /// Weight gradient accumulator.
    pub gw: Vec<f64>,
    /// Bias gradient accumulator.
    pub gb: Vec<f64>,
}

impl Linear {
    /// Zero-initialized layer; call [`Linear::init`] before use.
    pub fn new(name: &str, in_dim: usize, out_dim: usize) -> Self {
        let mut w_name = String::from(name);
        w_name.push_str(".w");
        let mut b_name = String::from(name);
        b_name.push_str(".b");
        Self {
            name: String::from(name),
            in_dim,
            out_dim,
            w: vec![0.0; out_dim * in_dim],
            b: vec![0.0; out_dim],
            w_name,
            b_name,
            gw: vec![0.0; out_dim * in_dim],
            gb: vec![0.0; out_dim],
        }
    }

    /// Uniform init in ±1/√in for weights and bias, each draw rounded to
    /// the nearest f32 so parameters stay exactly representable in
    /// single precision from the first step on.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let bound = 1.0 / crate::math::sqrt(self.in_dim.max(1) as f64);
        for v in self.w.iter_mut() {
            *v = rng.gen_range(-bound..bound) as f32 as f64;
        }
        for v in self.b.iter_mut() {
            *v = rng.gen_range(-bound..bound) as f32 as f64;
        }
    }

    /// `y[r] = W x[r] + b` for every row of `x`.
    pub fn forward(&self, x: &Mat) -> Mat {
        debug_assert_eq!(x.cols, self.in_dim, "linear {}: input width", self.name);
        let mut y = Mat::zeros(x.rows, self.out_dim);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for o in 0..self.out_dim {
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.b[o];
                for i in 0..self.in_dim {
                    acc += wrow[i] * xr[i];
                }
                yr[o] = acc;
            }
        }
        y
    }

    /// Accumulates `gw += Σ_r dy[r] ⊗ x[r]`, `gb += Σ_r dy[r]` and
    /// returns `dx[r] = Wᵀ dy[r]`.
    pub fn backward(&mut self, x: &Mat, dy: &Mat) -> Mat {
        debug_assert_eq!(dy.cols, self.out_dim, "linear {}: grad width", self.name);
        debug_assert_eq!(dy.rows, x.rows, "linear {}: grad rows", self.name);
        let dx = self.backward_shared(x, dy);
        for r in 0..dy.rows {
            let dyr = dy.row(r);
            for o in 0..self.out_dim {
                self.gb[o] += dyr[o];
            }
        }
        dx
    }

    /// Tangent of the layer: `ṫ_out[r] = W ṫ_in[r]` (the bias drops out).
    pub fn forward_tangent(&self, tx: &Mat) -> Mat {
        debug_assert_eq!(tx.cols, self.in_dim, "linear {}: tangent width", self.name);
        let mut y = Mat::zeros(tx.rows, self.out_dim);
        for r in 0..tx.rows {
            let xr = tx.row(r);
            let yr = y.row_mut(r);
            for o in 0..self.out_dim {
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = 0.0;
                for i in 0..self.in_dim {
                    acc += wrow[i] * xr[i];
                }
                yr[o] = acc;
            }
        }
        y
    }

    /// Reverse pass over [`Linear::forward_tangent`]: accumulates
    /// `gw += Σ_r u[r] ⊗ ṫ_in[r]` (the bias never enters the tangent
    /// path, so `gb` is untouched) and returns `Wᵀ u[r]`.
    pub fn backward_tangent(&mut self, t_in: &Mat, u: &Mat) -> Mat {
        debug_assert_eq!(u.cols, self.out_dim, "linear {}: adjoint width", self.name);
        self.backward_shared(t_in, u)
    }

    /// Input adjoint `Wᵀ dy` alone, leaving the gradient accumulators
    /// untouched. Used to differentiate a score w.r.t. the *input* only,
    /// as the gradient-penalty term requires.
    pub fn input_adjoint(&self, dy: &Mat) -> Mat {
        debug_assert_eq!(dy.cols, self.out_dim, "linear {}: adjoint width", self.name);
        let mut dx = Mat::zeros(dy.rows, self.in_dim);
        for r in 0..dy.rows {
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for o in 0..self.out_dim {
                let d = dyr[o];
                if d == 0.0 {
                    continue;
                }
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    dxr[i] += d * wrow[i];
                }
            }
        }
        dx
    }

    /// Weight-gradient accumulation and input adjoint common to both
    /// reverse passes.
    fn backward_shared(&mut self, x: &Mat, dy: &Mat) -> Mat {
        let mut dx = Mat::zeros(x.rows, self.in_dim);
        for r in 0..dy.rows {
            let xr = x.row(r);
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for o in 0..self.out_dim {
                let d = dyr[o];
                if d == 0.0 {
                    continue;
                }
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let gwrow = &mut self.gw[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    gwrow[i] += d * xr[i];
                    dxr[i] += d * wrow[i];
                }
            }
        }
        dx
    }

    /// Zeroes both gradient accumulators.
    pub fn zero_grad(&mut self) {
        self.gw.iter_mut().for_each(|g| *g = 0.0);
        self.gb.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Weight and bias tensors, weight first.
    pub fn tensors_mut(&mut self) -> [TensorMut<'_>; 2] {
        [
            TensorMut {
                name: &self.w_name,
                dims: [self.out_dim, self.in_dim],
                data: &mut self.w,
                grad: &mut self.gw,
            },
            TensorMut {
                name: &self.b_name,
                dims: [self.out_dim, 1],
                data: &mut self.b,
                grad: &mut self.gb,
            },
        ]
    }
}

/// Elementwise activation applied between layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Act {
    /// Identity.
    None,
    /// max(0, x).
    Relu,
    /// x for x > 0, slope·x otherwise.
    LeakyRelu(f64),
    /// Clamped logistic sigmoid; see [`crate::math::sigmoid`].
    Sigmoid,
}

impl Act {
    /// Applies the activation elementwise.
    pub fn forward(&self, pre: &Mat) -> Mat {
        let mut out = pre.clone();
        match self {
            Act::None => {}
            Act::Relu => out.data.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }),
            Act::LeakyRelu(s) => out.data.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= s;
                }
            }),
            Act::Sigmoid => out.data.iter_mut().for_each(|v| *v = sigmoid(*v)),
        }
        out
    }

    /// `dy ⊙ act'(pre)`. For the piecewise-linear activations this is
    /// also the tangent map, since the masks are constant a.e.
    pub fn backward(&self, pre: &Mat, dy: &Mat) -> Mat {
        debug_assert_eq!(pre.data.len(), dy.data.len(), "activation shape mismatch");
        let mut dx = dy.clone();
        match self {
            Act::None => {}
            Act::Relu => {
                for (d, p) in dx.data.iter_mut().zip(&pre.data) {
                    if *p <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Act::LeakyRelu(s) => {
                for (d, p) in dx.data.iter_mut().zip(&pre.data) {
                    if *p <= 0.0 {
                        *d *= s;
                    }
                }
            }
            Act::Sigmoid => {
                for (d, p) in dx.data.iter_mut().zip(&pre.data) {
                    *d *= sigmoid_grad(*p);
                }
            }
        }
        dx
    }

    /// True for activations whose derivative is locally constant, which
    /// the tangent passes require.
    pub fn piecewise_linear(&self) -> bool {
        !matches!(self, Act::Sigmoid)
    }
}

/// A stack of [`Linear`] layers with an activation after every layer but
/// the last, and an optional activation after the last.
#[derive(Debug, Clone)]
pub struct Mlp {
    /// The layers, input to output.
    pub layers: Vec<Linear>,
    /// Activation between layers.
    pub hidden_act: Act,
    /// Activation after the final layer.
    pub final_act: Act,
}

/// Per-layer values cached by [`Mlp::forward_cache`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input fed to each layer.
    pub inputs: Vec<Mat>,
    /// Pre-activation output of each layer.
    pub pres: Vec<Mat>,
}

/// Tangent values cached by [`Mlp::forward_tangent`].
#[derive(Debug, Clone)]
pub struct MlpTangent {
    /// Tangent input fed to each layer.
    pub t_inputs: Vec<Mat>,
    /// Tangent of the network output.
    pub out: Mat,
}

impl Mlp {
    /// Builds `widths.len()` layers threading `in_dim` through `widths`.
    /// An empty `widths` yields the identity network.
    pub fn new(name: &str, in_dim: usize, widths: &[usize], hidden_act: Act, final_act: Act) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut d = in_dim;
        for (i, &w) in widths.iter().enumerate() {
            let mut lname = String::from(name);
            lname.push_str(&alloc::format!("{i}"));
            layers.push(Linear::new(&lname, d, w));
            d = w;
        }
        Self { layers, hidden_act, final_act }
    }

    /// Output width given an input width (identity when empty).
    pub fn out_dim(&self, in_dim: usize) -> usize {
        self.layers.last().map_or(in_dim, |l| l.out_dim)
    }

    /// Initializes every layer in order.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        for l in &mut self.layers {
            l.init(rng);
        }
    }

    fn act_at(&self, i: usize) -> &Act {
        if i + 1 == self.layers.len() {
            &self.final_act
        } else {
            &self.hidden_act
        }
    }

    /// Forward pass retaining everything the reverse pass needs.
    pub fn forward_cache(&self, x: &Mat) -> (Mat, MlpCache) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pres: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let pre = l.forward(&cur);
            let post = self.act_at(i).forward(&pre);
            cache.inputs.push(cur);
            cache.pres.push(pre);
            cur = post;
        }
        (cur, cache)
    }

    /// Forward pass without caches, for inference.
    pub fn forward(&self, x: &Mat) -> Mat {
        let mut cur = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            cur = self.act_at(i).forward(&l.forward(&cur));
        }
        cur
    }

    /// Reverse pass; accumulates parameter gradients and returns the
    /// input adjoint.
    pub fn backward(&mut self, cache: &MlpCache, dy: &Mat) -> Mat {
        let mut d = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let dpre = self.act_at(i).backward(&cache.pres[i], &d);
            d = self.layers[i].backward(&cache.inputs[i], &dpre);
        }
        d
    }

    /// Reverse pass that computes only the input adjoint, leaving every
    /// gradient accumulator untouched.
    pub fn backward_input_only(&self, cache: &MlpCache, dy: &Mat) -> Mat {
        let mut d = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let dpre = self.act_at(i).backward(&cache.pres[i], &d);
            d = self.layers[i].input_adjoint(&dpre);
        }
        d
    }

    /// Tangent (directional-derivative) pass along input tangent `tx`,
    /// reusing the activation masks recorded in `cache`. Requires
    /// piecewise-linear activations.
    pub fn forward_tangent(&self, cache: &MlpCache, tx: &Mat) -> MlpTangent {
        debug_assert!(
            self.hidden_act.piecewise_linear() && self.final_act.piecewise_linear(),
            "tangent pass requires piecewise-linear activations"
        );
        let mut t_inputs = Vec::with_capacity(self.layers.len());
        let mut cur = tx.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let tpre = l.forward_tangent(&cur);
            let tpost = self.act_at(i).backward(&cache.pres[i], &tpre);
            t_inputs.push(cur);
            cur = tpost;
        }
        MlpTangent { t_inputs, out: cur }
    }

    /// Reverse pass over [`Mlp::forward_tangent`]: accumulates weight
    /// gradients (biases stay zero along the tangent path) and returns
    /// the adjoint of the input tangent.
    pub fn backward_tangent(&mut self, cache: &MlpCache, tangent: &MlpTangent, u: &Mat) -> Mat {
        let mut d = u.clone();
        for i in (0..self.layers.len()).rev() {
            let upre = self.act_at(i).backward(&cache.pres[i], &d);
            d = self.layers[i].backward_tangent(&tangent.t_inputs[i], &upre);
        }
        d
    }

    /// Zeroes all gradient accumulators.
    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.zero_grad();
        }
    }

    /// All parameter tensors in layer order.
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            let [w, b] = l.tensors_mut();
            out.push(w);
            out.push(b);
        }
        out
    }
}

/// Column-wise max over rows: returns the pooled vector and, per column,
/// the first row attaining the max. The value is invariant to row
/// permutation; only the recorded index can change on exact ties.
pub fn maxpool_rows(x: &Mat) -> (Vec<f64>, Vec<usize>) {
    debug_assert!(x.rows > 0, "maxpool over empty matrix");
    let mut vals = x.row(0).to_vec();
    let mut arg = vec![0usize; x.cols];
    for r in 1..x.rows {
        let row = x.row(r);
        for c in 0..x.cols {
            if row[c] > vals[c] {
                vals[c] = row[c];
                arg[c] = r;
            }
        }
    }
    (vals, arg)
}

/// Scatters the pooled adjoint back to the argmax rows.
pub fn maxpool_backward(argmax: &[usize], dy: &[f64], rows: usize) -> Mat {
    let mut dx = Mat::zeros(rows, dy.len());
    for (c, (&r, &d)) in argmax.iter().zip(dy).enumerate() {
        dx.row_mut(r)[c] += d;
    }
    dx
}

/// Tangent of the max-pool: gathers tangents at the argmax rows.
pub fn maxpool_tangent(argmax: &[usize], tx: &Mat) -> Vec<f64> {
    argmax.iter().enumerate().map(|(c, &r)| tx.row(r)[c]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_forward_known_values() {
        let mut l = Linear::new("t", 2, 2);
        l.w = vec![1.0, 2.0, 3.0, 4.0]; // rows (out) × cols (in)
        l.b = vec![0.5, -0.5];
        let x = Mat::from_vec(1, 2, vec![1.0, 1.0]);
        let y = l.forward(&x);
        assert_eq!(y.data, vec![3.5, 6.5]);
    }

    #[test]
    fn linear_backward_accumulates() {
        let mut l = Linear::new("t", 1, 1);
        l.w = vec![2.0];
        let x = Mat::from_vec(1, 1, vec![3.0]);
        let dy = Mat::from_vec(1, 1, vec![1.0]);
        let dx = l.backward(&x, &dy);
        let dx2 = l.backward(&x, &dy);
        assert_eq!(dx.data, vec![2.0]);
        assert_eq!(dx2.data, vec![2.0]);
        assert_eq!(l.gw, vec![6.0]); // two accumulated passes of 3.0
        assert_eq!(l.gb, vec![2.0]);
    }

    #[test]
    fn init_draws_are_f32_exact() {
        let mut l = Linear::new("t", 8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        l.init(&mut rng);
        for v in l.w.iter().chain(l.b.iter()) {
            assert_eq!(*v, *v as f32 as f64);
        }
    }

    #[test]
    fn relu_masks_tangent_and_adjoint_alike() {
        let pre = Mat::from_vec(1, 3, vec![-1.0, 0.0, 2.0]);
        let t = Mat::from_vec(1, 3, vec![5.0, 5.0, 5.0]);
        let out = Act::Relu.backward(&pre, &t);
        assert_eq!(out.data, vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn empty_mlp_is_identity() {
        let mlp = Mlp::new("id", 3, &[], Act::Relu, Act::None);
        let x = Mat::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.0, 1.0, -1.0]);
        let (y, cache) = mlp.forward_cache(&x);
        assert_eq!(y, x);
        assert!(cache.inputs.is_empty());
    }

    #[test]
    fn maxpool_picks_first_max_and_scatters() {
        let x = Mat::from_vec(3, 2, vec![1.0, 5.0, 4.0, 5.0, 4.0, 2.0]);
        let (vals, arg) = maxpool_rows(&x);
        assert_eq!(vals, vec![4.0, 5.0]);
        assert_eq!(arg, vec![1, 0]);
        let dx = maxpool_backward(&arg, &[1.0, 2.0], 3);
        assert_eq!(dx.row(0), &[0.0, 2.0]);
        assert_eq!(dx.row(1), &[1.0, 0.0]);
        assert_eq!(dx.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn tangent_along_direction_matches_fd() {
        // JVP of a 2-layer ReLU MLP along a random direction vs central
        // differences on the primal.
        let mut mlp = Mlp::new("m", 3, &[5, 2], Act::Relu, Act::None);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        mlp.init(&mut rng);
        let x = Mat::from_vec(1, 3, vec![0.3, -0.7, 0.9]);
        let v = Mat::from_vec(1, 3, vec![0.2, 0.1, -0.4]);
        let (_, cache) = mlp.forward_cache(&x);
        let tan = mlp.forward_tangent(&cache, &v);

        let h = 1e-6;
        let mut xp = x.clone();
        let mut xm = x.clone();
        for i in 0..3 {
            xp.data[i] += h * v.data[i];
            xm.data[i] -= h * v.data[i];
        }
        let yp = mlp.forward(&xp);
        let ym = mlp.forward(&xm);
        for c in 0..2 {
            let fd = (yp.data[c] - ym.data[c]) / (2.0 * h);
            assert!((tan.out.data[c] - fd).abs() < 1e-6, "col {c}: {} vs {fd}", tan.out.data[c]);
        }
    }
}
