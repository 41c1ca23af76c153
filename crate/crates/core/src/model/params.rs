use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Embedding widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Entity embedding width.
    pub embed: usize,
    /// Hidden layer width of the update network.
    pub hidden: usize,
    /// Static relation embedding width.
    pub relation: usize,
}

impl Dims {
    pub fn new(embed: usize, hidden: usize, relation: usize) -> Result<Self> {
        let dims = Self {
            embed,
            hidden,
            relation,
        };
        dims.validate()?;
        Ok(dims)
    }

    /// Hidden width equal to the embedding width.
    pub fn square(embed: usize, relation: usize) -> Result<Self> {
        Self::new(embed, embed, relation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 || self.relation == 0 {
            return Err(Error::arg(format!("all widths must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    /// Width of the update network's concatenated input.
    pub fn update_input(&self) -> usize {
        2 * self.embed + self.relation
    }
}

/// Numerical guards applied when evaluating the point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Floor on `t - t̄` inside the intensity, in hours.
    pub gap_floor: f64,
    /// Scores are clamped to `[-score_clamp, score_clamp]` before `exp`.
    pub score_clamp: f64,
    /// Report expected next time as `t̄ + mean` rather than just the mean.
    pub expectation_offset: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            gap_floor: 1e-8,
            score_clamp: 50.0,
            expectation_offset: true,
        }
    }
}

impl Numerics {
    pub fn clamp_score(&self, g: f64) -> f64 {
        g.clamp(-self.score_clamp, self.score_clamp)
    }

    /// Derivative of [`Numerics::clamp_score`]; zero where the clamp is active.
    pub fn clamp_slope(&self, g: f64) -> f64 {
        if g.abs() < self.score_clamp {
            1.0
        } else {
            0.0
        }
    }
}

/// The seven trainable arrays, flat and row-major. Shared by parameters,
/// gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// `n_r` matrices `d×d`.
    pub relation_matrices: Vec<f64>,
    /// `n_r` vectors of width `c`.
    pub relation_embeddings: Vec<f64>,
    /// Temporal drift for the subject update, width `d`.
    pub drift_subject: Vec<f64>,
    /// Temporal drift for the object update, width `d`.
    pub drift_object: Vec<f64>,
    /// Hidden-to-embedding matrix, `d×l`.
    pub recurrent: Vec<f64>,
    /// Input-to-hidden projection, `l×(2d+c)`.
    pub projection: Vec<f64>,
    /// `n_e` initial entity embeddings of width `d`.
    pub initial_embeddings: Vec<f64>,
}

impl Weights {
    pub const NAMES: [&'static str; 7] = [
        "relation_matrices",
        "relation_embeddings",
        "drift_subject",
        "drift_object",
        "recurrent",
        "projection",
        "initial_embeddings",
    ];

    pub fn shapes(dims: Dims, n_entities: usize, n_relations: usize) -> [usize; 7] {
        let d = dims.embed;
        [
            n_relations * d * d,
            n_relations * dims.relation,
            d,
            d,
            d * dims.hidden,
            dims.hidden * dims.update_input(),
            n_entities * d,
        ]
    }

    pub fn zeros(dims: Dims, n_entities: usize, n_relations: usize) -> Self {
        let [a, b, c, d, e, f, g] = Self::shapes(dims, n_entities, n_relations);
        Self {
            relation_matrices: vec![0.0; a],
            relation_embeddings: vec![0.0; b],
            drift_subject: vec![0.0; c],
            drift_object: vec![0.0; d],
            recurrent: vec![0.0; e],
            projection: vec![0.0; f],
            initial_embeddings: vec![0.0; g],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.arrays_mut().into_iter().for_each(|a| a.fill(0.0));
        z
    }

    pub fn arrays(&self) -> [&[f64]; 7] {
        [
            &self.relation_matrices,
            &self.relation_embeddings,
            &self.drift_subject,
            &self.drift_object,
            &self.recurrent,
            &self.projection,
            &self.initial_embeddings,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 7] {
        [
            &mut self.relation_matrices,
            &mut self.relation_embeddings,
            &mut self.drift_subject,
            &mut self.drift_object,
            &mut self.recurrent,
            &mut self.projection,
            &mut self.initial_embeddings,
        ]
    }

    pub fn len(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|a| a.iter().all(|x| x.is_finite()))
    }

    pub fn global_norm(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|a| a.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Reads coordinate `k` in the concatenation of all arrays.
    pub fn get(&self, mut k: usize) -> f64 {
        for a in self.arrays() {
            if k < a.len() {
                return a[k];
            }
            k -= a.len();
        }
        panic!("coordinate out of range")
    }

    pub fn get_mut(&mut self, mut k: usize) -> &mut f64 {
        for a in self.arrays_mut() {
            if k < a.len() {
                return &mut a[k];
            }
            k -= a.len();
        }
        panic!("coordinate out of range")
    }

    /// Array name and local offset of global coordinate `k`.
    pub fn locate(&self, mut k: usize) -> (&'static str, usize) {
        for (name, a) in Self::NAMES.iter().zip(self.arrays()) {
            if k < a.len() {
                return (name, k);
            }
            k -= a.len();
        }
        panic!("coordinate out of range")
    }

    fn same_shape(&self, other: &Weights) -> bool {
        self.arrays()
            .iter()
            .zip(other.arrays())
            .all(|(a, b)| a.len() == b.len())
    }
}

/// All trainable parameters plus the metadata needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: Dims,
    pub n_entities: usize,
    pub n_relations: usize,
    pub numerics: Numerics,
    pub weights: Weights,
}

impl ModelParams {
    pub fn zeros(dims: Dims, n_entities: usize, n_relations: usize) -> Self {
        Self {
            dims,
            n_entities,
            n_relations,
            numerics: Numerics::default(),
            weights: Weights::zeros(dims, n_entities, n_relations),
        }
    }

    /// Training initialization: entity embeddings start at zero, every other
    /// array is uniform on `[-scale, scale]`.
    pub fn init<R: Rng>(
        dims: Dims,
        n_entities: usize,
        n_relations: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(dims, n_entities, n_relations);
        let [a, b, c, d, e, f, _] = p.weights.arrays_mut();
        for arr in [a, b, c, d, e, f] {
            fill_uniform(arr, scale, rng);
        }
        p
    }

    /// Like [`ModelParams::init`] but with random initial embeddings too.
    /// Used for ground-truth generators.
    pub fn random<R: Rng>(
        dims: Dims,
        n_entities: usize,
        n_relations: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::init(dims, n_entities, n_relations, scale, rng);
        fill_uniform(&mut p.weights.initial_embeddings, scale, rng);
        p
    }

    pub fn with_numerics(mut self, numerics: Numerics) -> Self {
        self.numerics = numerics;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let expected = Weights::shapes(self.dims, self.n_entities, self.n_relations);
        for ((name, arr), want) in Weights::NAMES
            .iter()
            .zip(self.weights.arrays())
            .zip(expected)
        {
            if arr.len() != want {
                return Err(Error::Format(format!(
                    "{name} has {} entries, expected {want}",
                    arr.len()
                )));
            }
        }
        if !self.weights.is_finite() {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, w: &Weights) -> Result<()> {
        if self.weights.same_shape(w) {
            Ok(())
        } else {
            Err(Error::arg("array shapes do not match the parameters"))
        }
    }

    pub fn relation_matrix(&self, r: usize) -> &[f64] {
        let dd = self.dims.embed * self.dims.embed;
        &self.weights.relation_matrices[r * dd..(r + 1) * dd]
    }

    pub fn relation_embedding(&self, r: usize) -> &[f64] {
        let c = self.dims.relation;
        &self.weights.relation_embeddings[r * c..(r + 1) * c]
    }

    pub fn initial_embedding(&self, e: usize) -> &[f64] {
        let d = self.dims.embed;
        &self.weights.initial_embeddings[e * d..(e + 1) * d]
    }

    pub(crate) fn check_entity(&self, e: usize) -> Result<()> {
        if e < self.n_entities {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "entity {e} out of range (n_entities {})",
                self.n_entities
            )))
        }
    }

    pub(crate) fn check_relation(&self, r: usize) -> Result<()> {
        if r < self.n_relations {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "relation {r} out of range (n_relations {})",
                self.n_relations
            )))
        }
    }
}

fn fill_uniform<R: Rng>(arr: &mut [f64], scale: f64, rng: &mut R) {
    for x in arr {
        *x = scale * (2.0 * rng.gen::<f64>() - 1.0);
    }
}
