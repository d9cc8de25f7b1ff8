//! The networks of the completion pipeline and the latent-space
//! mechanics that connect them.
//!
//! A partial cloud is encoded to a *code pair*: a complete shape code `z`
//! and an occlusion code `o` whose entries, squeezed into (0,1) by a
//! sigmoid, softly gate how much of the complete shape survives. Fusing
//! the two codes (element-wise product by default) yields the partial
//! embedding; `z` alone is the complete embedding. Two decoders of the
//! same MLP family map those embeddings back to clouds, a complete
//! auto-encoder supplies real shape codes for the latent discriminator,
//! and two WGAN critics score generated clouds and codes.
//!
//! Every network is a composition of [`Linear`] layers, so one trait
//! ([`Network`]) provides initialization, gradient plumbing, and
//! parameter-set serialization for all of them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{EncoderVariant, FusionMode, TrainConfig};
use crate::error::{CoreError, CoreResult};
use crate::geometry::{knn, PointCloud};
use crate::math::all_finite;
use crate::nn::{
    maxpool_backward, maxpool_rows, maxpool_tangent, Act, Linear, Mat, Mlp, MlpCache, MlpTangent,
    TensorMut,
};
use crate::rng;

/// Identifies which network a [`ParameterSet`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Partial encoder E_p (emits a code pair).
    PartialEncoder,
    /// Complete encoder E_c (emits a shape code only).
    CompleteEncoder,
    /// Completion decoder D_c.
    CompleteDecoder,
    /// Partial decoder D_p.
    PartialDecoder,
    /// The complete auto-encoder's own decoder.
    AeDecoder,
    /// WGAN critic on point clouds.
    PointDiscriminator,
    /// WGAN critic on shape codes.
    CodeDiscriminator,
}

impl Role {
    /// Stable spelling used in checkpoints and manifests.
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::PartialEncoder => "partial_encoder",
            Role::CompleteEncoder => "complete_encoder",
            Role::CompleteDecoder => "complete_decoder",
            Role::PartialDecoder => "partial_decoder",
            Role::AeDecoder => "ae_decoder",
            Role::PointDiscriminator => "point_discriminator",
            Role::CodeDiscriminator => "code_discriminator",
        }
    }

    /// Parses the stable spelling.
    pub fn parse(s: &str) -> CoreResult<Self> {
        Ok(match s {
            "partial_encoder" => Role::PartialEncoder,
            "complete_encoder" => Role::CompleteEncoder,
            "complete_decoder" => Role::CompleteDecoder,
            "partial_decoder" => Role::PartialDecoder,
            "ae_decoder" => Role::AeDecoder,
            "point_discriminator" => Role::PointDiscriminator,
            "code_discriminator" => Role::CodeDiscriminator,
            other => {
                return Err(CoreError::InvalidArgument(format!("unknown role `{other}`")))
            }
        })
    }

    /// Index of the initialization RNG stream assigned to this role.
    pub fn init_index(&self) -> u64 {
        match self {
            Role::PartialEncoder => 0,
            Role::CompleteEncoder => 1,
            Role::CompleteDecoder => 2,
            Role::PartialDecoder => 3,
            Role::AeDecoder => 4,
            Role::PointDiscriminator => 5,
            Role::CodeDiscriminator => 6,
        }
    }
}

impl core::fmt::Display for Role {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The latent representation of a partial point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CodePair {
    /// Complete shape code, unbounded.
    pub z: Vec<f64>,
    /// Occlusion code; every entry strictly inside (0,1).
    pub o: Vec<f64>,
}

/// One named parameter array with shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    /// Dotted name, unique within its set.
    pub name: String,
    /// `[rows, cols]`; biases use `[n, 1]`.
    pub dims: [usize; 2],
    /// Row-major values.
    pub data: Vec<f64>,
}

/// All parameters of one network, tagged with its role.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// Which network these parameters belong to.
    pub role: Role,
    /// The tensors, in the network's traversal order.
    pub tensors: Vec<NamedTensor>,
}

impl ParameterSet {
    /// Checks names unique, shapes consistent, and values finite.
    pub fn validate(&self) -> CoreResult<()> {
        for (i, t) in self.tensors.iter().enumerate() {
            if t.dims[0] * t.dims[1] != t.data.len() {
                return Err(CoreError::DimensionMismatch {
                    expected: t.dims[0] * t.dims[1],
                    got: t.data.len(),
                });
            }
            if !all_finite(&t.data) {
                return Err(CoreError::NonFinite("parameter tensor"));
            }
            for other in &self.tensors[..i] {
                if other.name == t.name {
                    return Err(CoreError::InvalidArgument(format!(
                        "duplicate tensor name `{}`",
                        t.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Common surface of every network: role, layer traversal, and the
/// parameter plumbing (seeding, gradients, serialization) derived from it.
pub trait Network {
    /// This network's role tag.
    fn role(&self) -> Role;
    /// All layers in stable traversal order.
    fn linears(&self) -> Vec<&Linear>;
    /// All layers in the same order, mutably.
    fn linears_mut(&mut self) -> Vec<&mut Linear>;

    /// Seeds every layer from the run's master seed; each role draws
    /// from its own derived stream, so networks can be re-created
    /// independently in any order.
    fn init_params(&mut self, master_seed: u64) {
        let mut r = rng::stream(master_seed, rng::TAG_INIT, self.role().init_index());
        for l in self.linears_mut() {
            l.init(&mut r);
        }
    }

    /// Zeroes every gradient accumulator.
    fn zero_grad(&mut self) {
        for l in self.linears_mut() {
            l.zero_grad();
        }
    }

    /// Parameter/gradient views in traversal order (weights then bias
    /// per layer).
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for l in self.linears_mut() {
            let [w, b] = l.tensors_mut();
            out.push(w);
            out.push(b);
        }
        out
    }

    /// Snapshots all parameters.
    fn to_parameter_set(&self) -> ParameterSet {
        let mut tensors = Vec::new();
        for l in self.linears() {
            tensors.push(NamedTensor {
                name: format!("{}.w", l.name),
                dims: [l.out_dim, l.in_dim],
                data: l.w.clone(),
            });
            tensors.push(NamedTensor {
                name: format!("{}.b", l.name),
                dims: [l.out_dim, 1],
                data: l.b.clone(),
            });
        }
        ParameterSet { role: self.role(), tensors }
    }

    /// Loads a snapshot produced by a network of the same architecture.
    /// The set must carry the right role and exactly the expected
    /// tensors (matched by name and shape).
    fn load_parameter_set(&mut self, set: &ParameterSet) -> CoreResult<()> {
        if set.role != self.role() {
            return Err(CoreError::RoleMismatch { expected: self.role(), got: set.role });
        }
        let mut targets = self.tensors_mut();
        if set.tensors.len() != targets.len() {
            return Err(CoreError::InvalidArgument(format!(
                "parameter set for {} has {} tensors, expected {}",
                set.role,
                set.tensors.len(),
                targets.len()
            )));
        }
        for t in &mut targets {
            let src = set
                .tensors
                .iter()
                .find(|s| s.name == t.name)
                .ok_or_else(|| {
                    CoreError::InvalidArgument(format!("missing tensor `{}`", t.name))
                })?;
            if src.dims != t.dims {
                return Err(CoreError::DimensionMismatch {
                    expected: t.dims[0] * t.dims[1],
                    got: src.dims[0] * src.dims[1],
                });
            }
            t.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}

/// Fuses a shape code and an occlusion code into the partial embedding.
pub fn fuse(z: &[f64], o: &[f64], mode: FusionMode) -> CoreResult<Vec<f64>> {
    match mode {
        FusionMode::Multiply | FusionMode::Add => {
            if z.len() != o.len() {
                return Err(CoreError::DimensionMismatch { expected: z.len(), got: o.len() });
            }
            Ok(if mode == FusionMode::Multiply {
                z.iter().zip(o).map(|(a, b)| a * b).collect()
            } else {
                z.iter().zip(o).map(|(a, b)| a + b).collect()
            })
        }
        FusionMode::Concat => {
            let mut v = Vec::with_capacity(z.len() + o.len());
            v.extend_from_slice(z);
            v.extend_from_slice(o);
            Ok(v)
        }
    }
}

/// Adjoints of [`fuse`]: splits the fused-code gradient into gradients
/// on `z` and `o`.
pub fn fuse_backward(z: &[f64], o: &[f64], mode: FusionMode, dfused: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match mode {
        FusionMode::Multiply => (
            dfused.iter().zip(o).map(|(d, b)| d * b).collect(),
            dfused.iter().zip(z).map(|(d, a)| d * a).collect(),
        ),
        FusionMode::Add => (dfused.to_vec(), dfused.to_vec()),
        FusionMode::Concat => (dfused[..z.len()].to_vec(), dfused[z.len()..].to_vec()),
    }
}

/// Shared encoder trunk: per-point features, optionally enriched by
/// edge layers over a static input-space kNN graph, pooled to a single
/// global feature by column-wise max.
#[derive(Debug, Clone)]
pub struct PointTrunk {
    variant: EncoderVariant,
    k_graph: usize,
    /// Edge layers (EdgeGraph only); layer `l` maps `2c → w_l` over
    /// features `[f_i ; f_j − f_i]` and max-pools over the neighbors.
    edges: Vec<Linear>,
    /// Pointwise layers applied after (or instead of) the edge layers.
    point_mlp: Mlp,
    act: Act,
    feat_dim: usize,
}

/// Values cached by [`PointTrunk::forward_cache`].
#[derive(Debug, Clone)]
pub struct TrunkCache {
    neighbors: Vec<Vec<usize>>,
    edge_inputs: Vec<Mat>,
    edge_pres: Vec<Mat>,
    edge_argmax: Vec<Vec<usize>>,
    mlp: MlpCache,
    pool_argmax: Vec<usize>,
    n_points: usize,
}

impl PointTrunk {
    /// Builds the trunk. For [`EncoderVariant::EdgeGraph`] with `n`
    /// widths, the first `n − 1` become edge layers and the last is
    /// pointwise; a single width degenerates to the pointwise trunk.
    pub fn build(
        prefix: &str,
        variant: EncoderVariant,
        widths: &[usize],
        k_graph: usize,
        act: Act,
    ) -> Self {
        let (edge_widths, point_widths): (&[usize], &[usize]) = match variant {
            EncoderVariant::PointwiseMlp => (&[], widths),
            EncoderVariant::EdgeGraph if widths.len() >= 2 => {
                (&widths[..widths.len() - 1], &widths[widths.len() - 1..])
            }
            EncoderVariant::EdgeGraph => (&[], widths),
        };
        let mut edges = Vec::with_capacity(edge_widths.len());
        let mut c = 3;
        for (i, &w) in edge_widths.iter().enumerate() {
            edges.push(Linear::new(&format!("{prefix}.e{i}"), 2 * c, w));
            c = w;
        }
        let point_mlp = Mlp::new(&format!("{prefix}.p"), c, point_widths, act, act);
        let feat_dim = point_mlp.out_dim(c);
        Self { variant, k_graph, edges, point_mlp, act, feat_dim }
    }

    /// Width of the pooled global feature.
    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    /// Runs the trunk, returning the pooled feature and the cache the
    /// reverse pass needs.
    pub fn forward_cache(&self, cloud: &PointCloud) -> CoreResult<(Vec<f64>, TrunkCache)> {
        let n = cloud.len();
        let mut neighbors: Vec<Vec<usize>> = Vec::new();
        if !self.edges.is_empty() {
            let nn = knn(cloud, cloud, self.k_graph)?;
            neighbors = nn
                .into_iter()
                .map(|ns| ns.into_iter().map(|x| x.index).collect())
                .collect();
        }
        let mut f = Mat::from_points(cloud.points());
        let mut edge_inputs = Vec::with_capacity(self.edges.len());
        let mut edge_pres = Vec::with_capacity(self.edges.len());
        let mut edge_argmax = Vec::with_capacity(self.edges.len());
        for layer in &self.edges {
            let c = f.cols;
            let k = self.k_graph;
            let mut e = Mat::zeros(n * k, 2 * c);
            for i in 0..n {
                let fi = f.row(i).to_vec();
                for (slot, &j) in neighbors[i].iter().enumerate() {
                    let row = e.row_mut(i * k + slot);
                    row[..c].copy_from_slice(&fi);
                    for (dst, (fj, fv)) in row[c..].iter_mut().zip(f.row(j).iter().zip(&fi)) {
                        *dst = fj - fv;
                    }
                }
            }
            let pre = layer.forward(&e);
            let post = self.act.forward(&pre);
            let w = layer.out_dim;
            let mut pooled = Mat::zeros(n, w);
            let mut argmax = alloc::vec![0usize; n * w];
            for i in 0..n {
                let base = i * k;
                for ch in 0..w {
                    let mut best = post.row(base)[ch];
                    let mut arg = base;
                    for slot in 1..k {
                        let v = post.row(base + slot)[ch];
                        if v > best {
                            best = v;
                            arg = base + slot;
                        }
                    }
                    pooled.row_mut(i)[ch] = best;
                    argmax[i * w + ch] = arg;
                }
            }
            edge_inputs.push(e);
            edge_pres.push(pre);
            edge_argmax.push(argmax);
            f = pooled;
        }
        let (out, mlp_cache) = self.point_mlp.forward_cache(&f);
        let (pooled, pool_argmax) = maxpool_rows(&out);
        Ok((
            pooled,
            TrunkCache {
                neighbors,
                edge_inputs,
                edge_pres,
                edge_argmax,
                mlp: mlp_cache,
                pool_argmax,
                n_points: n,
            },
        ))
    }

    /// Reverse pass from the pooled-feature adjoint down to the input
    /// coordinates; accumulates parameter gradients.
    pub fn backward(&mut self, cache: &TrunkCache, dpooled: &[f64]) -> Mat {
        let dout = maxpool_backward(&cache.pool_argmax, dpooled, cache.n_points);
        let mut df = self.point_mlp.backward(&cache.mlp, &dout);
        let k = self.k_graph;
        for (l, layer) in self.edges.iter_mut().enumerate().rev() {
            let w = layer.out_dim;
            let mut dpost = Mat::zeros(cache.edge_pres[l].rows, w);
            for i in 0..cache.n_points {
                let dfr = df.row(i);
                for ch in 0..w {
                    let r = cache.edge_argmax[l][i * w + ch];
                    dpost.row_mut(r)[ch] += dfr[ch];
                }
            }
            let dpre = self.act.backward(&cache.edge_pres[l], &dpost);
            let de = layer.backward(&cache.edge_inputs[l], &dpre);
            let c = layer.in_dim / 2;
            let mut dprev = Mat::zeros(cache.n_points, c);
            for i in 0..cache.n_points {
                for (slot, &j) in cache.neighbors[i].iter().enumerate() {
                    let der = de.row(i * k + slot);
                    for ci in 0..c {
                        dprev.row_mut(i)[ci] += der[ci] - der[c + ci];
                    }
                    for ci in 0..c {
                        dprev.row_mut(j)[ci] += der[c + ci];
                    }
                }
            }
            df = dprev;
        }
        df
    }

    fn trunk_linears(&self) -> Vec<&Linear> {
        self.edges.iter().chain(self.point_mlp.layers.iter()).collect()
    }

    fn trunk_linears_mut(&mut self) -> Vec<&mut Linear> {
        self.edges.iter_mut().chain(self.point_mlp.layers.iter_mut()).collect()
    }

    /// The configured variant.
    pub fn variant(&self) -> EncoderVariant {
        self.variant
    }
}

/// Partial encoder E_p: trunk plus two heads emitting the code pair.
#[derive(Debug, Clone)]
pub struct PartialEncoder {
    /// Shared trunk.
    pub trunk: PointTrunk,
    /// Linear head for the shape code.
    pub head_z: Linear,
    /// Linear head for the occlusion code (sigmoid applied after).
    pub head_o: Linear,
    d: usize,
}

/// Values cached by [`PartialEncoder::encode_cache`].
#[derive(Debug, Clone)]
pub struct EncoderCache {
    trunk: TrunkCache,
    pooled: Mat,
    pre_o: Mat,
}

impl PartialEncoder {
    /// Builds the encoder per the config (parameters zeroed).
    pub fn build(cfg: &TrainConfig) -> Self {
        let trunk =
            PointTrunk::build("trunk", cfg.encoder, &cfg.enc_widths, cfg.k_graph, Act::Relu);
        let feat = trunk.feat_dim();
        Self {
            trunk,
            head_z: Linear::new("head_z", feat, cfg.d),
            head_o: Linear::new("head_o", feat, cfg.d),
            d: cfg.d,
        }
    }

    /// Encodes a cloud to its code pair.
    pub fn encode(&self, cloud: &PointCloud) -> CoreResult<CodePair> {
        self.encode_cache(cloud).map(|(c, _)| c)
    }

    /// Encodes a cloud, retaining the cache for the reverse pass.
    pub fn encode_cache(&self, cloud: &PointCloud) -> CoreResult<(CodePair, EncoderCache)> {
        let (pooled_vec, trunk_cache) = self.trunk.forward_cache(cloud)?;
        let pooled = Mat::from_vec(1, pooled_vec.len(), pooled_vec);
        let z = self.head_z.forward(&pooled);
        let pre_o = self.head_o.forward(&pooled);
        let o = Act::Sigmoid.forward(&pre_o);
        if !all_finite(&z.data) || !all_finite(&o.data) {
            return Err(CoreError::NonFinite("partial encoder output"));
        }
        Ok((
            CodePair { z: z.data, o: o.data },
            EncoderCache { trunk: trunk_cache, pooled, pre_o },
        ))
    }

    /// Reverse pass given adjoints on `z` and `o`; accumulates parameter
    /// gradients and returns the input-coordinate adjoint.
    pub fn backward(&mut self, cache: &EncoderCache, dz: &[f64], d_o: &[f64]) -> Mat {
        let dz = Mat::from_vec(1, dz.len(), dz.to_vec());
        let d_o = Mat::from_vec(1, d_o.len(), d_o.to_vec());
        let dpre_o = Act::Sigmoid.backward(&cache.pre_o, &d_o);
        let mut dpooled = self.head_z.backward(&cache.pooled, &dz);
        let dp2 = self.head_o.backward(&cache.pooled, &dpre_o);
        for (a, b) in dpooled.data.iter_mut().zip(&dp2.data) {
            *a += b;
        }
        self.trunk.backward(&cache.trunk, dpooled.row(0))
    }

    /// Code dimension d.
    pub fn code_dim(&self) -> usize {
        self.d
    }
}

impl Network for PartialEncoder {
    fn role(&self) -> Role {
        Role::PartialEncoder
    }

    fn linears(&self) -> Vec<&Linear> {
        let mut v = self.trunk.trunk_linears();
        v.push(&self.head_z);
        v.push(&self.head_o);
        v
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut v = self.trunk.trunk_linears_mut();
        v.push(&mut self.head_z);
        v.push(&mut self.head_o);
        v
    }
}

/// Complete encoder E_c: trunk plus a single shape-code head.
#[derive(Debug, Clone)]
pub struct CompleteEncoder {
    /// Shared trunk.
    pub trunk: PointTrunk,
    /// Linear head for the shape code.
    pub head_z: Linear,
}

/// Values cached by [`CompleteEncoder::encode_cache`].
#[derive(Debug, Clone)]
pub struct CompleteEncoderCache {
    trunk: TrunkCache,
    pooled: Mat,
}

impl CompleteEncoder {
    /// Builds the encoder per the config (parameters zeroed).
    pub fn build(cfg: &TrainConfig) -> Self {
        let trunk =
            PointTrunk::build("trunk", cfg.encoder, &cfg.enc_widths, cfg.k_graph, Act::Relu);
        let feat = trunk.feat_dim();
        Self { trunk, head_z: Linear::new("head_z", feat, cfg.d) }
    }

    /// Encodes a complete cloud to its shape code.
    pub fn encode(&self, cloud: &PointCloud) -> CoreResult<Vec<f64>> {
        self.encode_cache(cloud).map(|(z, _)| z)
    }

    /// Encodes a cloud, retaining the cache for the reverse pass.
    pub fn encode_cache(&self, cloud: &PointCloud) -> CoreResult<(Vec<f64>, CompleteEncoderCache)> {
        let (pooled_vec, trunk_cache) = self.trunk.forward_cache(cloud)?;
        let pooled = Mat::from_vec(1, pooled_vec.len(), pooled_vec);
        let z = self.head_z.forward(&pooled);
        if !all_finite(&z.data) {
            return Err(CoreError::NonFinite("complete encoder output"));
        }
        Ok((z.data, CompleteEncoderCache { trunk: trunk_cache, pooled }))
    }

    /// Reverse pass given the adjoint on `z_c`.
    pub fn backward(&mut self, cache: &CompleteEncoderCache, dz: &[f64]) -> Mat {
        let dz = Mat::from_vec(1, dz.len(), dz.to_vec());
        let dpooled = self.head_z.backward(&cache.pooled, &dz);
        self.trunk.backward(&cache.trunk, dpooled.row(0))
    }
}

impl Network for CompleteEncoder {
    fn role(&self) -> Role {
        Role::CompleteEncoder
    }

    fn linears(&self) -> Vec<&Linear> {
        let mut v = self.trunk.trunk_linears();
        v.push(&self.head_z);
        v
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut v = self.trunk.trunk_linears_mut();
        v.push(&mut self.head_z);
        v
    }
}

/// MLP decoder mapping a code to a fixed-size point cloud. One family
/// serves D_c, D_p, and the AE decoder; only role, input width, and
/// output size differ.
#[derive(Debug, Clone)]
pub struct Decoder {
    /// Hidden layers plus the final `3·n_points`-wide linear layer.
    pub mlp: Mlp,
    role: Role,
    in_dim: usize,
    n_points: usize,
}

impl Decoder {
    /// Builds a decoder for the given role.
    pub fn build(role: Role, in_dim: usize, n_points: usize, hidden: &[usize]) -> Self {
        debug_assert!(
            matches!(role, Role::CompleteDecoder | Role::PartialDecoder | Role::AeDecoder),
            "decoder role"
        );
        let mut widths: Vec<usize> = hidden.to_vec();
        widths.push(n_points * 3);
        let mlp = Mlp::new("dec", in_dim, &widths, Act::Relu, Act::None);
        Self { mlp, role, in_dim, n_points }
    }

    /// Decodes a code into a cloud of exactly `n_points` points.
    pub fn decode(&self, code: &[f64]) -> CoreResult<PointCloud> {
        self.decode_cache(code).map(|(c, _)| c)
    }

    /// Decodes with the cache retained for the reverse pass.
    pub fn decode_cache(&self, code: &[f64]) -> CoreResult<(PointCloud, MlpCache)> {
        if code.len() != self.in_dim {
            return Err(CoreError::DimensionMismatch { expected: self.in_dim, got: code.len() });
        }
        let x = Mat::from_vec(1, code.len(), code.to_vec());
        let (out, cache) = self.mlp.forward_cache(&x);
        if !all_finite(&out.data) {
            return Err(CoreError::NonFinite("decoder output"));
        }
        let pts = out.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok((PointCloud::new(pts)?, cache))
    }

    /// Reverse pass from per-point coordinate adjoints to the code
    /// adjoint; accumulates parameter gradients.
    pub fn backward(&mut self, cache: &MlpCache, dpoints: &[[f64; 3]]) -> Vec<f64> {
        debug_assert_eq!(dpoints.len(), self.n_points, "decoder adjoint size");
        let dy = Mat::from_points(dpoints);
        let dy = Mat::from_vec(1, dy.data.len(), dy.data);
        self.mlp.backward(cache, &dy).data
    }

    /// Number of output points.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Input code width.
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }
}

impl Network for Decoder {
    fn role(&self) -> Role {
        self.role
    }

    fn linears(&self) -> Vec<&Linear> {
        self.mlp.layers.iter().collect()
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        self.mlp.layers.iter_mut().collect()
    }
}

/// WGAN critic on point clouds: pointwise trunk, max-pool, scalar head.
#[derive(Debug, Clone)]
pub struct PointDiscriminator {
    /// Per-point feature layers.
    pub trunk: Mlp,
    /// Pooled-feature-to-scalar head.
    pub head: Mlp,
    feat_dim: usize,
}

/// Values cached by [`PointDiscriminator::score_cache`].
#[derive(Debug, Clone)]
pub struct PointDiscCache {
    trunk: MlpCache,
    argmax: Vec<usize>,
    head: MlpCache,
    n_points: usize,
}

/// Tangent values threaded through the critic for the gradient penalty.
#[derive(Debug, Clone)]
pub struct PointDiscTangent {
    trunk: MlpTangent,
    head: MlpTangent,
}

const LEAKY_SLOPE: f64 = 0.2;

impl PointDiscriminator {
    /// Builds the critic per the config (parameters zeroed).
    pub fn build(cfg: &TrainConfig) -> Self {
        let act = Act::LeakyRelu(LEAKY_SLOPE);
        let trunk = Mlp::new("trunk", 3, &cfg.disc_point_trunk, act, act);
        let feat_dim = trunk.out_dim(3);
        let mut head_widths = cfg.disc_point_head.clone();
        head_widths.push(1);
        let head = Mlp::new("head", feat_dim, &head_widths, act, Act::None);
        Self { trunk, head, feat_dim }
    }

    /// Scores a cloud.
    pub fn score(&self, cloud: &PointCloud) -> CoreResult<f64> {
        self.score_cache(cloud).map(|(s, _)| s)
    }

    /// Scores a cloud, retaining the cache for reverse/tangent passes.
    pub fn score_cache(&self, cloud: &PointCloud) -> CoreResult<(f64, PointDiscCache)> {
        let x = Mat::from_points(cloud.points());
        let (tout, trunk_cache) = self.trunk.forward_cache(&x);
        let (pooled, argmax) = maxpool_rows(&tout);
        let pooled = Mat::from_vec(1, self.feat_dim, pooled);
        let (out, head_cache) = self.head.forward_cache(&pooled);
        let s = out.data[0];
        if !s.is_finite() {
            return Err(CoreError::NonFinite("point discriminator score"));
        }
        Ok((s, PointDiscCache { trunk: trunk_cache, argmax, head: head_cache, n_points: x.rows }))
    }

    /// Reverse pass: accumulates parameter gradients and returns the
    /// adjoint on the input coordinates.
    pub fn backward(&mut self, cache: &PointDiscCache, dscore: f64) -> Mat {
        let dy = Mat::from_vec(1, 1, alloc::vec![dscore]);
        let dpooled = self.head.backward(&cache.head, &dy);
        let dtout = maxpool_backward(&cache.argmax, dpooled.row(0), cache.n_points);
        self.trunk.backward(&cache.trunk, &dtout)
    }

    /// Gradient of the score w.r.t. the input coordinates only; no
    /// parameter gradients are touched.
    pub fn input_gradient(&self, cache: &PointDiscCache) -> Mat {
        let dy = Mat::from_vec(1, 1, alloc::vec![1.0]);
        let dpooled = self.head.backward_input_only(&cache.head, &dy);
        let dtout = maxpool_backward(&cache.argmax, dpooled.row(0), cache.n_points);
        self.trunk.backward_input_only(&cache.trunk, &dtout)
    }

    /// Directional derivative of the score along input direction `tx`;
    /// returns the tangent trace and the derivative value.
    pub fn tangent(&self, cache: &PointDiscCache, tx: &Mat) -> (PointDiscTangent, f64) {
        let t_trunk = self.trunk.forward_tangent(&cache.trunk, tx);
        let t_pooled = maxpool_tangent(&cache.argmax, &t_trunk.out);
        let t_pooled = Mat::from_vec(1, self.feat_dim, t_pooled);
        let t_head = self.head.forward_tangent(&cache.head, &t_pooled);
        let v = t_head.out.data[0];
        (PointDiscTangent { trunk: t_trunk, head: t_head }, v)
    }

    /// Reverse pass over [`PointDiscriminator::tangent`] with scalar
    /// adjoint `u`; accumulates weight gradients (the penalty's bias
    /// gradients vanish).
    pub fn backward_tangent(&mut self, cache: &PointDiscCache, tangent: &PointDiscTangent, u: f64) {
        let dy = Mat::from_vec(1, 1, alloc::vec![u]);
        let upooled = self.head.backward_tangent(&cache.head, &tangent.head, &dy);
        let utout = maxpool_backward(&cache.argmax, upooled.row(0), cache.n_points);
        self.trunk.backward_tangent(&cache.trunk, &tangent.trunk, &utout);
    }
}

impl Network for PointDiscriminator {
    fn role(&self) -> Role {
        Role::PointDiscriminator
    }

    fn linears(&self) -> Vec<&Linear> {
        self.trunk.layers.iter().chain(self.head.layers.iter()).collect()
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        self.trunk.layers.iter_mut().chain(self.head.layers.iter_mut()).collect()
    }
}

/// WGAN critic on shape codes: a plain MLP to a scalar.
#[derive(Debug, Clone)]
pub struct CodeDiscriminator {
    /// The whole critic.
    pub mlp: Mlp,
    d: usize,
}

impl CodeDiscriminator {
    /// Builds the critic per the config (parameters zeroed).
    pub fn build(cfg: &TrainConfig) -> Self {
        let act = Act::LeakyRelu(LEAKY_SLOPE);
        let mut widths = cfg.disc_code_widths.clone();
        widths.push(1);
        Self { mlp: Mlp::new("mlp", cfg.d, &widths, act, Act::None), d: cfg.d }
    }

    /// Scores a code.
    pub fn score(&self, z: &[f64]) -> CoreResult<f64> {
        self.score_cache(z).map(|(s, _)| s)
    }

    /// Scores a code, retaining the cache.
    pub fn score_cache(&self, z: &[f64]) -> CoreResult<(f64, MlpCache)> {
        if z.len() != self.d {
            return Err(CoreError::DimensionMismatch { expected: self.d, got: z.len() });
        }
        let x = Mat::from_vec(1, z.len(), z.to_vec());
        let (out, cache) = self.mlp.forward_cache(&x);
        let s = out.data[0];
        if !s.is_finite() {
            return Err(CoreError::NonFinite("code discriminator score"));
        }
        Ok((s, cache))
    }

    /// Reverse pass; returns the adjoint on the code.
    pub fn backward(&mut self, cache: &MlpCache, dscore: f64) -> Vec<f64> {
        let dy = Mat::from_vec(1, 1, alloc::vec![dscore]);
        self.mlp.backward(cache, &dy).data
    }

    /// Gradient of the score w.r.t. the code only.
    pub fn input_gradient(&self, cache: &MlpCache) -> Vec<f64> {
        let dy = Mat::from_vec(1, 1, alloc::vec![1.0]);
        self.mlp.backward_input_only(cache, &dy).data
    }

    /// Directional derivative of the score along `tz`.
    pub fn tangent(&self, cache: &MlpCache, tz: &[f64]) -> (MlpTangent, f64) {
        let tx = Mat::from_vec(1, tz.len(), tz.to_vec());
        let t = self.mlp.forward_tangent(cache, &tx);
        let v = t.out.data[0];
        (t, v)
    }

    /// Reverse pass over [`CodeDiscriminator::tangent`].
    pub fn backward_tangent(&mut self, cache: &MlpCache, tangent: &MlpTangent, u: f64) {
        let dy = Mat::from_vec(1, 1, alloc::vec![u]);
        self.mlp.backward_tangent(cache, tangent, &dy);
    }
}

impl Network for CodeDiscriminator {
    fn role(&self) -> Role {
        Role::CodeDiscriminator
    }

    fn linears(&self) -> Vec<&Linear> {
        self.mlp.layers.iter().collect()
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        self.mlp.layers.iter_mut().collect()
    }
}

/// Encodes a partial cloud with a stored parameter set.
pub fn encode_partial(
    cfg: &TrainConfig,
    params: &ParameterSet,
    p: &PointCloud,
) -> CoreResult<CodePair> {
    let mut enc = PartialEncoder::build(cfg);
    enc.load_parameter_set(params)?;
    enc.encode(p)
}

/// Encodes a complete cloud to its real shape code z_c.
pub fn encode_complete(
    cfg: &TrainConfig,
    params: &ParameterSet,
    y: &PointCloud,
) -> CoreResult<Vec<f64>> {
    let mut enc = CompleteEncoder::build(cfg);
    enc.load_parameter_set(params)?;
    enc.encode(y)
}

/// Decodes a shape code to the completed cloud.
pub fn decode_complete(
    cfg: &TrainConfig,
    params: &ParameterSet,
    z: &[f64],
) -> CoreResult<PointCloud> {
    let mut dec = Decoder::build(Role::CompleteDecoder, cfg.d, cfg.n_points_out, &cfg.dec_widths);
    dec.load_parameter_set(params)?;
    dec.decode(z)
}

/// Decodes a fused code to the reconstructed partial cloud.
pub fn decode_partial(
    cfg: &TrainConfig,
    params: &ParameterSet,
    fused: &[f64],
) -> CoreResult<PointCloud> {
    let mut dec =
        Decoder::build(Role::PartialDecoder, cfg.fused_dim(), cfg.n_points_in, &cfg.dec_widths);
    dec.load_parameter_set(params)?;
    dec.decode(fused)
}

/// Scores a cloud with the stored point critic.
pub fn discriminate_point(
    cfg: &TrainConfig,
    params: &ParameterSet,
    cloud: &PointCloud,
) -> CoreResult<f64> {
    let mut d = PointDiscriminator::build(cfg);
    d.load_parameter_set(params)?;
    d.score(cloud)
}

/// Scores a shape code with the stored code critic.
pub fn discriminate_code(cfg: &TrainConfig, params: &ParameterSet, z: &[f64]) -> CoreResult<f64> {
    let mut d = CodeDiscriminator::build(cfg);
    d.load_parameter_set(params)?;
    d.score(z)
}
