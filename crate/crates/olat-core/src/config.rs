//! Run configuration: every knob of the training pipeline in one flat
//! `key = value` text format.
//!
//! The format is deliberately minimal: one assignment per line, `#`
//! comments, no sections. Unknown keys are rejected so typos fail loudly.
//! [`TrainConfig::echo`] emits the canonical form (every key, declaration
//! order), which is what run logs and checkpoints embed.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};

/// How the complete shape code and occlusion code are combined into the
/// partial-shape embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Element-wise product (the default; occlusion gates each code entry).
    Multiply,
    /// Concatenation; doubles the partial decoder's input width.
    Concat,
    /// Element-wise sum.
    Add,
}

/// Which ranking supervision constrains the occlusion codes of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingMode {
    /// N-pair loss over the three anchor sets.
    Npair,
    /// Margin-based triplet variant over the same sets.
    Triplet,
    /// Ranking supervision disabled.
    None,
}

/// Where the discriminator gradient penalty is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpMode {
    /// At the generated (fake) samples.
    Fake,
    /// At uniform interpolates between real and fake samples.
    Interpolate,
}

/// Encoder trunk family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderVariant {
    /// Per-point MLP with max-pooling.
    PointwiseMlp,
    /// Edge-feature layers over a static input-space kNN graph, then a
    /// pointwise layer and max-pooling.
    EdgeGraph,
}

/// How synthetic partial views are cut from complete shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialMode {
    /// Drop everything on one side of a random plane through the shape.
    Halfspace,
    /// Drop the points facing away from a random viewpoint.
    Viewpoint,
}

macro_rules! enum_text {
    ($ty:ty { $($variant:path => $text:literal),+ $(,)? }) => {
        impl $ty {
            /// Canonical config-file spelling.
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($variant => $text),+
                }
            }

            /// Parses the config-file spelling.
            pub fn parse(s: &str) -> CoreResult<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(CoreError::InvalidArgument(alloc::format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl core::fmt::Display for $ty {
            fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

enum_text!(FusionMode {
    FusionMode::Multiply => "multiply",
    FusionMode::Concat => "concat",
    FusionMode::Add => "add",
});
enum_text!(RankingMode {
    RankingMode::Npair => "npair",
    RankingMode::Triplet => "triplet",
    RankingMode::None => "none",
});
enum_text!(GpMode {
    GpMode::Fake => "fake",
    GpMode::Interpolate => "interpolate",
});
enum_text!(EncoderVariant {
    EncoderVariant::PointwiseMlp => "pointwise_mlp",
    EncoderVariant::EdgeGraph => "edge_graph",
});
enum_text!(PartialMode {
    PartialMode::Halfspace => "halfspace",
    PartialMode::Viewpoint => "viewpoint",
});

/// Complete run configuration with paper-scale defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Master seed; every random stream in a run derives from it.
    pub seed: u64,
    /// Latent code dimension (both shape and occlusion codes).
    pub d: usize,
    /// Points removed per occlusion level (K; the second level removes 2K).
    pub k_removal: usize,
    /// Nearest predicted points kept per partial point in degradation.
    pub k_degrade: usize,
    /// Weight of the reconstruction loss in the generator objective.
    pub gamma: f64,
    /// Weight of the code-equality loss in the generator objective.
    pub beta: f64,
    /// Gradient-penalty weight for both discriminators.
    pub lambda_gp: f64,
    /// Adam learning rate (shared by all optimizers).
    pub lr: f64,
    /// Adam first-moment decay.
    pub adam_beta1: f64,
    /// Adam second-moment decay.
    pub adam_beta2: f64,
    /// Series per training step.
    pub batch_size: usize,
    /// Passes over the partial training set.
    pub epochs: usize,
    /// Hard cap on main-loop steps; 0 means no cap.
    pub max_steps: u64,
    /// Latent fusion scheme.
    pub fusion_mode: FusionMode,
    /// Ranking supervision variant.
    pub ranking: RankingMode,
    /// Margin for the triplet ranking variant.
    pub triplet_delta: f64,
    /// Gradient-penalty evaluation point.
    pub gp_mode: GpMode,
    /// Train the point-cloud discriminator.
    pub enable_point_d: bool,
    /// Train the latent-code discriminator.
    pub enable_code_d: bool,
    /// Apply the latent code swapping reconstruction terms.
    pub enable_swap: bool,
    /// Discriminator updates per generator update.
    pub d_steps_per_g: usize,
    /// Global gradient-norm clip for the generator update; <= 0 disables.
    pub grad_clip: f64,
    /// Input resample size; also the partial decoder's output size.
    pub n_points_in: usize,
    /// Completion decoder output size.
    pub n_points_out: usize,
    /// Encoder trunk family.
    pub encoder: EncoderVariant,
    /// Encoder trunk widths.
    pub enc_widths: Vec<usize>,
    /// Neighbors per point in the edge_graph encoder.
    pub k_graph: usize,
    /// Decoder hidden widths (output layer appended automatically).
    pub dec_widths: Vec<usize>,
    /// Point-discriminator trunk widths (pointwise, before pooling).
    pub disc_point_trunk: Vec<usize>,
    /// Point-discriminator head widths (a final scalar layer is appended).
    pub disc_point_head: Vec<usize>,
    /// Code-discriminator hidden widths (final scalar layer appended).
    pub disc_code_widths: Vec<usize>,
    /// Initialize the completion decoder from the pretrained AE decoder.
    pub init_dc_from_ae: bool,
    /// Passes over the complete set during AE pretraining.
    pub ae_epochs: usize,
    /// Hard cap on AE pretraining steps; 0 means no cap.
    pub ae_max_steps: u64,
    /// Emit a log record every this many steps.
    pub log_every: u64,
    /// Checkpoint every this many steps; 0 means final only.
    pub ckpt_every: u64,
    /// F1 distance threshold used in evaluation reports.
    pub tau: f64,
    /// Dataset root directory.
    pub data_dir: String,
    /// Shape categories to generate / train on (one model per category).
    pub categories: Vec<String>,
    /// Points sampled per generated shape.
    pub sample_points: usize,
    /// Partial training shapes per category.
    pub n_train_partial: usize,
    /// Unpaired complete training shapes per category.
    pub n_train_complete: usize,
    /// Held-out evaluation shapes per category.
    pub n_eval: usize,
    /// Partial-view synthesis scheme.
    pub partial_mode: PartialMode,
    /// Minimum fraction of points removed by partial-view synthesis.
    pub severity_min: f64,
    /// Maximum fraction removed; at most 0.9.
    pub severity_max: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d: 96,
            k_removal: 500,
            k_degrade: 5,
            gamma: 100.0,
            beta: 10.0,
            lambda_gp: 1.0,
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            batch_size: 16,
            epochs: 500,
            max_steps: 0,
            fusion_mode: FusionMode::Multiply,
            ranking: RankingMode::Npair,
            triplet_delta: 5.0,
            gp_mode: GpMode::Fake,
            enable_point_d: true,
            enable_code_d: true,
            enable_swap: true,
            d_steps_per_g: 1,
            grad_clip: 10.0,
            n_points_in: 2048,
            n_points_out: 2048,
            encoder: EncoderVariant::PointwiseMlp,
            enc_widths: alloc::vec![64, 128, 256],
            k_graph: 8,
            dec_widths: alloc::vec![256, 512],
            disc_point_trunk: alloc::vec![64, 128],
            disc_point_head: alloc::vec![64],
            disc_code_widths: alloc::vec![128, 64],
            init_dc_from_ae: false,
            ae_epochs: 50,
            ae_max_steps: 0,
            log_every: 10,
            ckpt_every: 0,
            tau: 0.01,
            data_dir: String::from("data"),
            categories: alloc::vec![String::from("chair_like")],
            sample_points: 2048,
            n_train_partial: 100,
            n_train_complete: 100,
            n_eval: 20,
            partial_mode: PartialMode::Halfspace,
            severity_min: 0.2,
            severity_max: 0.6,
        }
    }
}

/// Splits a comma-separated list; empty input yields an empty list.
fn parse_list<T, F: Fn(&str) -> CoreResult<T>>(s: &str, f: F) -> CoreResult<Vec<T>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|item| f(item.trim())).collect()
}

fn parse_scalar<T: core::str::FromStr>(key: &str, value: &str) -> CoreResult<T> {
    value.parse().map_err(|_| {
        CoreError::InvalidArgument(alloc::format!("key `{key}`: cannot parse `{value}`"))
    })
}

fn parse_bool(key: &str, value: &str) -> CoreResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CoreError::InvalidArgument(alloc::format!(
            "key `{key}`: expected true/false, got `{value}`"
        ))),
    }
}

fn join_usize(v: &[usize]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&x.to_string());
    }
    out
}

impl TrainConfig {
    /// Parses a whole config file (defaults plus the file's assignments).
    pub fn parse(text: &str) -> CoreResult<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::InvalidArgument(alloc::format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment (used for both file lines and
    /// command-line overrides, which take precedence by being applied
    /// later). Unknown keys are errors.
    pub fn apply(&mut self, key: &str, value: &str) -> CoreResult<()> {
        match key {
            "seed" => self.seed = parse_scalar(key, value)?,
            "d" => self.d = parse_scalar(key, value)?,
            "k_removal" => self.k_removal = parse_scalar(key, value)?,
            "k_degrade" => self.k_degrade = parse_scalar(key, value)?,
            "gamma" => self.gamma = parse_scalar(key, value)?,
            "beta" => self.beta = parse_scalar(key, value)?,
            "lambda_gp" => self.lambda_gp = parse_scalar(key, value)?,
            "lr" => self.lr = parse_scalar(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse_scalar(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse_scalar(key, value)?,
            "batch_size" => self.batch_size = parse_scalar(key, value)?,
            "epochs" => self.epochs = parse_scalar(key, value)?,
            "max_steps" => self.max_steps = parse_scalar(key, value)?,
            "fusion_mode" => self.fusion_mode = FusionMode::parse(value)?,
            "ranking" => self.ranking = RankingMode::parse(value)?,
            "triplet_delta" => self.triplet_delta = parse_scalar(key, value)?,
            "gp_mode" => self.gp_mode = GpMode::parse(value)?,
            "enable_point_d" => self.enable_point_d = parse_bool(key, value)?,
            "enable_code_d" => self.enable_code_d = parse_bool(key, value)?,
            "enable_swap" => self.enable_swap = parse_bool(key, value)?,
            "d_steps_per_g" => self.d_steps_per_g = parse_scalar(key, value)?,
            "grad_clip" => self.grad_clip = parse_scalar(key, value)?,
            "n_points_in" => self.n_points_in = parse_scalar(key, value)?,
            "n_points_out" => self.n_points_out = parse_scalar(key, value)?,
            "encoder" => self.encoder = EncoderVariant::parse(value)?,
            "enc_widths" => self.enc_widths = parse_list(value, |s| parse_scalar(key, s))?,
            "k_graph" => self.k_graph = parse_scalar(key, value)?,
            "dec_widths" => self.dec_widths = parse_list(value, |s| parse_scalar(key, s))?,
            "disc_point_trunk" => {
                self.disc_point_trunk = parse_list(value, |s| parse_scalar(key, s))?
            }
            "disc_point_head" => {
                self.disc_point_head = parse_list(value, |s| parse_scalar(key, s))?
            }
            "disc_code_widths" => {
                self.disc_code_widths = parse_list(value, |s| parse_scalar(key, s))?
            }
            "init_dc_from_ae" => self.init_dc_from_ae = parse_bool(key, value)?,
            "ae_epochs" => self.ae_epochs = parse_scalar(key, value)?,
            "ae_max_steps" => self.ae_max_steps = parse_scalar(key, value)?,
            "log_every" => self.log_every = parse_scalar(key, value)?,
            "ckpt_every" => self.ckpt_every = parse_scalar(key, value)?,
            "tau" => self.tau = parse_scalar(key, value)?,
            "data_dir" => self.data_dir = value.to_string(),
            "categories" => {
                self.categories = parse_list(value, |s| Ok(s.to_string()))?;
            }
            "sample_points" => self.sample_points = parse_scalar(key, value)?,
            "n_train_partial" => self.n_train_partial = parse_scalar(key, value)?,
            "n_train_complete" => self.n_train_complete = parse_scalar(key, value)?,
            "n_eval" => self.n_eval = parse_scalar(key, value)?,
            "partial_mode" => self.partial_mode = PartialMode::parse(value)?,
            "severity_min" => self.severity_min = parse_scalar(key, value)?,
            "severity_max" => self.severity_max = parse_scalar(key, value)?,
            _ => {
                return Err(CoreError::InvalidArgument(alloc::format!(
                    "unknown config key `{key}`"
                )))
            }
        }
        Ok(())
    }

    /// Rejects configurations that cannot run.
    pub fn validate(&self) -> CoreResult<()> {
        fn fail(msg: String) -> CoreResult<()> {
            Err(CoreError::InvalidArgument(msg))
        }
        if self.d == 0 {
            return fail("d must be positive".to_string());
        }
        if self.k_removal == 0 {
            return fail("k_removal must be positive".to_string());
        }
        if self.k_degrade == 0 || self.k_degrade > self.n_points_out {
            return fail(alloc::format!(
                "k_degrade must be in 1..={}, got {}",
                self.n_points_out,
                self.k_degrade
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".to_string());
        }
        if self.d_steps_per_g == 0 {
            return fail("d_steps_per_g must be positive".to_string());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(alloc::format!("lr must be positive and finite, got {}", self.lr));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(alloc::format!("{name} must be in [0,1), got {b}"));
            }
        }
        if self.lambda_gp < 0.0 {
            return fail(alloc::format!("lambda_gp must be non-negative, got {}", self.lambda_gp));
        }
        if self.ranking == RankingMode::Triplet && !(self.triplet_delta > 0.0) {
            return fail(alloc::format!(
                "triplet_delta must be positive, got {}",
                self.triplet_delta
            ));
        }
        if self.n_points_in <= 2 * self.k_removal {
            return fail(alloc::format!(
                "n_points_in = {} must exceed 2*k_removal = {}",
                self.n_points_in,
                2 * self.k_removal
            ));
        }
        if self.n_points_out == 0 {
            return fail("n_points_out must be positive".to_string());
        }
        if self.encoder == EncoderVariant::EdgeGraph
            && (self.k_graph == 0 || self.k_graph > self.n_points_in)
        {
            return fail(alloc::format!(
                "k_graph must be in 1..={}, got {}",
                self.n_points_in,
                self.k_graph
            ));
        }
        if self.sample_points == 0 {
            return fail("sample_points must be positive".to_string());
        }
        if self.categories.is_empty() {
            return fail("categories must not be empty".to_string());
        }
        if !(self.severity_min > 0.0 && self.severity_max <= 0.9
            && self.severity_min <= self.severity_max)
        {
            return fail(alloc::format!(
                "severity range ({}, {}) must satisfy 0 < min <= max <= 0.9",
                self.severity_min,
                self.severity_max
            ));
        }
        if !(self.tau > 0.0) {
            return fail(alloc::format!("tau must be positive, got {}", self.tau));
        }
        Ok(())
    }

    /// Canonical text form: every key in declaration order. Parsing the
    /// echo reproduces the config exactly.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &str| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        };
        kv("seed", &self.seed.to_string());
        kv("d", &self.d.to_string());
        kv("k_removal", &self.k_removal.to_string());
        kv("k_degrade", &self.k_degrade.to_string());
        kv("gamma", &self.gamma.to_string());
        kv("beta", &self.beta.to_string());
        kv("lambda_gp", &self.lambda_gp.to_string());
        kv("lr", &self.lr.to_string());
        kv("adam_beta1", &self.adam_beta1.to_string());
        kv("adam_beta2", &self.adam_beta2.to_string());
        kv("batch_size", &self.batch_size.to_string());
        kv("epochs", &self.epochs.to_string());
        kv("max_steps", &self.max_steps.to_string());
        kv("fusion_mode", self.fusion_mode.as_str());
        kv("ranking", self.ranking.as_str());
        kv("triplet_delta", &self.triplet_delta.to_string());
        kv("gp_mode", self.gp_mode.as_str());
        kv("enable_point_d", if self.enable_point_d { "true" } else { "false" });
        kv("enable_code_d", if self.enable_code_d { "true" } else { "false" });
        kv("enable_swap", if self.enable_swap { "true" } else { "false" });
        kv("d_steps_per_g", &self.d_steps_per_g.to_string());
        kv("grad_clip", &self.grad_clip.to_string());
        kv("n_points_in", &self.n_points_in.to_string());
        kv("n_points_out", &self.n_points_out.to_string());
        kv("encoder", self.encoder.as_str());
        kv("enc_widths", &join_usize(&self.enc_widths));
        kv("k_graph", &self.k_graph.to_string());
        kv("dec_widths", &join_usize(&self.dec_widths));
        kv("disc_point_trunk", &join_usize(&self.disc_point_trunk));
        kv("disc_point_head", &join_usize(&self.disc_point_head));
        kv("disc_code_widths", &join_usize(&self.disc_code_widths));
        kv("init_dc_from_ae", if self.init_dc_from_ae { "true" } else { "false" });
        kv("ae_epochs", &self.ae_epochs.to_string());
        kv("ae_max_steps", &self.ae_max_steps.to_string());
        kv("log_every", &self.log_every.to_string());
        kv("ckpt_every", &self.ckpt_every.to_string());
        kv("tau", &self.tau.to_string());
        kv("data_dir", &self.data_dir);
        kv("categories", &self.categories.join(","));
        kv("sample_points", &self.sample_points.to_string());
        kv("n_train_partial", &self.n_train_partial.to_string());
        kv("n_train_complete", &self.n_train_complete.to_string());
        kv("n_eval", &self.n_eval.to_string());
        kv("partial_mode", self.partial_mode.as_str());
        kv("severity_min", &self.severity_min.to_string());
        kv("severity_max", &self.severity_max.to_string());
        s
    }

    /// Input width of the partial decoder under the configured fusion.
    pub fn fused_dim(&self) -> usize {
        match self.fusion_mode {
            FusionMode::Multiply | FusionMode::Add => self.d,
            FusionMode::Concat => 2 * self.d,
        }
    }
}
