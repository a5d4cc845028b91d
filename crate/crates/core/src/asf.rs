//! Adaptive scale fusion: per-stage, per-pixel attention over `N`
//! resolution-aligned feature maps.
//!
//! ```text
//! S = conv3x3(concat(X_0..X_{N-1}))              [C, H, W]
//! u = sigmoid(conv3x3(relu(conv1x1(mean_c(S)))))  [1, H, W]
//! A = sigmoid(conv3x3(S + u))                     [N, H, W]
//! F = concat(A_0 * X_0, ..., A_{N-1} * X_{N-1})   [N C, H, W]
//! ```

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::map::FloatMap;
use crate::tensor::{Tape, Tensor, Var};

pub const PARAM_NAMES: [&str; 8] = [
    "reduce.weight",
    "reduce.bias",
    "spatial1.weight",
    "spatial1.bias",
    "spatial2.weight",
    "spatial2.bias",
    "scale.weight",
    "scale.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AsfParams {
    pub n_stages: usize,
    pub channels: usize,
    /// Indexed like [`PARAM_NAMES`].
    pub tensors: [Tensor; 8],
}

/// How the stage weights are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attention {
    Live,
    /// Every weight fixed to the given value; the attention branch is skipped.
    Forced(f64),
}

fn param_shapes(n: usize, c: usize) -> [Vec<usize>; 8] {
    let q = c / 4;
    [
        vec![c, n * c, 3, 3],
        vec![c],
        vec![q, 1, 1, 1],
        vec![q],
        vec![1, q, 3, 3],
        vec![1],
        vec![n, c, 3, 3],
        vec![n],
    ]
}

fn check_dims(n_stages: usize, channels: usize) -> Result<()> {
    if n_stages == 0 || channels == 0 || channels % 4 != 0 {
        return Err(Error::Domain(format!(
            "need n_stages >= 1 and channels divisible by 4, got N={n_stages}, C={channels}"
        )));
    }
    Ok(())
}

impl AsfParams {
    pub fn zeros(n_stages: usize, channels: usize) -> Result<Self> {
        check_dims(n_stages, channels)?;
        let tensors = param_shapes(n_stages, channels).map(|s| Tensor::zeros(&s));
        Ok(Self {
            n_stages,
            channels,
            tensors,
        })
    }

    /// Weights uniform in `+-fan_in^{-1/2}`, biases zero.
    pub fn init(n_stages: usize, channels: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(n_stages, channels)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for t in p.tensors.iter_mut().step_by(2) {
            let fan_in: usize = t.shape()[1..].iter().product();
            let bound = (fan_in as f64).powf(-0.5);
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        PARAM_NAMES.iter().position(|n| *n == name).map(|i| &self.tensors[i])
    }

    pub fn attach(&self, tape: &mut Tape) -> AsfVars {
        AsfVars {
            n_stages: self.n_stages,
            vars: self.tensors.clone().map(|t| tape.leaf(t)),
        }
    }

    /// Forward pass on a private tape.
    pub fn forward(&self, stages: &[Tensor], attention: Attention) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.attach(&mut tape);
        let xs: Vec<Var> = stages.iter().map(|s| tape.leaf(s.clone())).collect();
        let out = asf_forward(&mut tape, &xs, &vars, attention)?;
        Ok(tape.value(out.fused).clone())
    }

    /// Writes one container file per tensor plus `manifest.txt`.
    ///
    /// Tensors are stored as `shape[0] x prod(shape[1..])` maps; values are
    /// rounded to `f32`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        for (name, t) in PARAM_NAMES.iter().zip(&self.tensors) {
            let rows = t.shape()[0];
            let cols = t.numel() / rows;
            FloatMap::from_vec(rows, cols, t.data().to_vec())?.save(dir.join(format!("{name}.f32map")))?;
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            manifest.push_str(&format!("{name} {}\n", dims.join(" ")));
        }
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
        let mut found: Vec<Option<Tensor>> = vec![None; PARAM_NAMES.len()];
        for (ln, line) in manifest.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let mut it = line.split_whitespace();
            let name = it.next().unwrap_or_default();
            let idx = PARAM_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| perr(format!("unknown tensor {name:?}")))?;
            let shape = it
                .map(|d| d.parse::<usize>().map_err(|e| perr(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let m = FloatMap::load(dir.join(format!("{name}.f32map")))?;
            found[idx] = Some(Tensor::new(shape, m.into_vec())?);
        }
        let tensors: Vec<Tensor> = found
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| Error::Format(format!("manifest lacks {}", PARAM_NAMES[i]))))
            .collect::<Result<_>>()?;
        let n_stages = tensors[6].shape()[0];
        let channels = tensors[1].shape()[0];
        check_dims(n_stages, channels)?;
        for (t, s) in tensors.iter().zip(param_shapes(n_stages, channels)) {
            if t.shape() != s.as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: s,
                    actual: t.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            n_stages,
            channels,
            tensors: tensors.try_into().expect("eight tensors"),
        })
    }
}

/// Parameters attached to a tape.
#[derive(Debug, Clone, Copy)]
pub struct AsfVars {
    pub n_stages: usize,
    /// Indexed like [`PARAM_NAMES`].
    pub vars: [Var; 8],
}

pub struct AsfOutput {
    pub fused: Var,
    /// `[N, H, W]` weights; `None` when forced.
    pub attention: Option<Var>,
    pub intermediate: Option<Var>,
}

/// `[C, H, W] -> [N, H, W]` stage weights in `(0, 1)`.
pub fn spatial_attention(tape: &mut Tape, s: Var, p: &AsfVars) -> Result<Var> {
    let [_, _, w1, b1, w2, b2, ws, bs] = p.vars;
    let m = tape.channel_mean(s)?;
    let h = tape.conv2d(m, w1, b1)?;
    let h = tape.relu(h);
    let u = tape.conv2d(h, w2, b2)?;
    let u = tape.sigmoid(u);
    let e = tape.add(s, u)?;
    let a = tape.conv2d(e, ws, bs)?;
    Ok(tape.sigmoid(a))
}

pub fn asf_forward(tape: &mut Tape, stages: &[Var], p: &AsfVars, attention: Attention) -> Result<AsfOutput> {
    if stages.len() != p.n_stages {
        return Err(Error::StageCountMismatch {
            expected: p.n_stages,
            actual: stages.len(),
        });
    }
    let shape0 = tape.value(stages[0]).shape().to_vec();
    for s in &stages[1..] {
        if tape.value(*s).shape() != shape0.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: shape0,
                actual: tape.value(*s).shape().to_vec(),
            });
        }
    }
    let (weights, intermediate) = match attention {
        Attention::Live => {
            let x = tape.concat(stages)?;
            let s = tape.conv2d(x, p.vars[0], p.vars[1])?;
            (spatial_attention(tape, s, p)?, Some(s))
        }
        Attention::Forced(v) => {
            let [_, h, w] = shape0[..] else {
                return Err(Error::ShapeMismatch {
                    expected: vec![0, 0, 0],
                    actual: shape0,
                });
            };
            (tape.leaf(Tensor::filled(&[p.n_stages, h, w], v)), None)
        }
    };
    let mut parts = Vec::with_capacity(stages.len());
    for (i, &x) in stages.iter().enumerate() {
        let a = tape.slice(weights, i, 1)?;
        parts.push(tape.mul(a, x)?);
    }
    let fused = tape.concat(&parts)?;
    Ok(AsfOutput {
        fused,
        attention: matches!(attention, Attention::Live).then_some(weights),
        intermediate,
    })
}
