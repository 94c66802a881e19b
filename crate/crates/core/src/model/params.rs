use rand::Rng;

use super::ModelConfig;
use crate::numerics::{DenseMatrix, FlatParams, Real};
use crate::rng::{stream, Purpose};
use crate::store::{EntityId, Vocab};

/// Identifies one learnable array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    Entity,
    Relation,
    Type,
    AttrKey,
    AttrVal,
    W1,
    W2,
    W3,
    W4,
    W5,
    ThetaNeighbor,
    ThetaAttrKey,
    ThetaType,
}

impl ParamId {
    pub const ALL: [ParamId; 13] = [
        ParamId::Entity,
        ParamId::Relation,
        ParamId::Type,
        ParamId::AttrKey,
        ParamId::AttrVal,
        ParamId::W1,
        ParamId::W2,
        ParamId::W3,
        ParamId::W4,
        ParamId::W5,
        ParamId::ThetaNeighbor,
        ParamId::ThetaAttrKey,
        ParamId::ThetaType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Entity => "W_E",
            ParamId::Relation => "W_R",
            ParamId::Type => "W_T",
            ParamId::AttrKey => "W_key",
            ParamId::AttrVal => "W_val",
            ParamId::W1 => "W1",
            ParamId::W2 => "W2",
            ParamId::W3 => "W3",
            ParamId::W4 => "W4",
            ParamId::W5 => "W5",
            ParamId::ThetaNeighbor => "theta_nbr",
            ParamId::ThetaAttrKey => "theta_key",
            ParamId::ThetaType => "theta_type",
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_attention(self) -> bool {
        matches!(self, ParamId::ThetaNeighbor | ParamId::ThetaAttrKey | ParamId::ThetaType)
    }
}

/// Category sizes that determine parameter shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VocabSizes {
    pub entities: usize,
    pub relations: usize,
    pub types: usize,
    pub attr_keys: usize,
    pub tokens: usize,
}

impl VocabSizes {
    pub fn of(vocab: &Vocab) -> Self {
        VocabSizes {
            entities: vocab.n_entities(),
            relations: vocab.n_relations(),
            types: vocab.n_types(),
            attr_keys: vocab.n_attr_keys(),
            tokens: vocab.n_tokens(),
        }
    }
}

/// All learnable arrays. Embedding tables store one row per id; `W_i` are
/// stored output-major (`rows = output dim`). Attention scalars are one-column
/// tables with one row per member id and are empty unless attention is on.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    mats: Vec<DenseMatrix<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn shapes(cfg: &ModelConfig, sizes: &VocabSizes) -> [(usize, usize); 13] {
        let (d, k, q, y) = (cfg.entity_dim, cfg.relation_dim, cfg.type_dim, cfg.attr_dim);
        let att = cfg.flags().use_attention;
        let theta = |n: usize| if att { (n, 1) } else { (0, 1) };
        [
            (sizes.entities, d),
            (sizes.relations, k),
            (sizes.types, q),
            (sizes.attr_keys, y),
            (sizes.tokens, y),
            (d, d),
            (d, d),
            (d, y),
            (d, k),
            (d, q),
            theta(sizes.entities),
            theta(sizes.attr_keys),
            theta(sizes.types),
        ]
    }

    pub fn zeros(cfg: &ModelConfig, sizes: &VocabSizes) -> Self {
        ParamSet {
            mats: Self::shapes(cfg, sizes)
                .into_iter()
                .map(|(r, c)| DenseMatrix::zeros(r, c))
                .collect(),
        }
    }

    /// Uniform in `±0.5/√dim_out`, where `dim_out` is the row length of an
    /// embedding table and the row count of a weight matrix. Attention scalars
    /// start at zero, i.e. as a plain mean.
    pub fn init(cfg: &ModelConfig, sizes: &VocabSizes, seed: u64) -> Self {
        let mut p = Self::zeros(cfg, sizes);
        for id in ParamId::ALL {
            if id.is_attention() {
                continue;
            }
            let m = &mut p.mats[id.index()];
            let dim_out = match id {
                ParamId::W1 | ParamId::W2 | ParamId::W3 | ParamId::W4 | ParamId::W5 => m.rows(),
                _ => m.cols(),
            };
            let bound = 0.5 / (dim_out.max(1) as f64).sqrt();
            let mut rng = stream(seed, Purpose::Init, id.index() as u64);
            for v in m.as_mut_slice() {
                *v = T::from_f64(rng.random_range(-bound..=bound));
            }
        }
        p
    }

    pub fn from_mats(mats: Vec<DenseMatrix<T>>) -> Self {
        assert_eq!(mats.len(), ParamId::ALL.len());
        ParamSet { mats }
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &DenseMatrix<T> {
        &self.mats[id.index()]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseMatrix<T> {
        &mut self.mats[id.index()]
    }

    pub fn mats(&self) -> &[DenseMatrix<T>] {
        &self.mats
    }

    pub fn has_attention(&self) -> bool {
        self.get(ParamId::ThetaNeighbor).rows() > 0
    }

    /// Exact number of allocated scalars.
    pub fn allocated_scalars(&self) -> usize {
        self.mats.iter().map(|m| m.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.mats.iter().all(|m| m.all_finite())
    }

    /// `(name, squared Frobenius norm)` for every array.
    pub fn norms(&self) -> Vec<(&'static str, f64)> {
        ParamId::ALL
            .iter()
            .map(|&id| (id.name(), self.get(id).squared_norm()))
            .collect()
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            mats: self.mats.iter().map(|m| m.cast()).collect(),
        }
    }

    /// Copies `from`'s embedding row and neighbor attention scalar onto `to`.
    pub fn clone_entity(&mut self, from: EntityId, to: EntityId) {
        for id in [ParamId::Entity, ParamId::ThetaNeighbor] {
            let m = &mut self.mats[id.index()];
            if m.rows() == 0 {
                continue;
            }
            let row = m.row(from.index()).to_vec();
            m.row_mut(to.index()).copy_from_slice(&row);
        }
    }

    fn locate(&self, mut i: usize) -> (ParamId, usize, usize) {
        for id in ParamId::ALL {
            let m = self.get(id);
            if i < m.len() {
                return (id, i / m.cols(), i % m.cols());
            }
            i -= m.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Offset of `(id, row, col)` in the flat view.
    pub fn flat_index(&self, id: ParamId, row: usize, col: usize) -> usize {
        let base: usize = ParamId::ALL[..id.index()].iter().map(|&p| self.get(p).len()).sum();
        base + row * self.get(id).cols() + col
    }
}

impl FlatParams for ParamSet<f64> {
    fn num_scalars(&self) -> usize {
        self.allocated_scalars()
    }

    fn get(&self, i: usize) -> f64 {
        let (id, r, c) = self.locate(i);
        self.mats[id.index()][(r, c)]
    }

    fn set(&mut self, i: usize, v: f64) {
        let (id, r, c) = self.locate(i);
        self.mats[id.index()][(r, c)] = v;
    }

    fn describe(&self, i: usize) -> String {
        let (id, r, c) = self.locate(i);
        format!("{}[{r},{c}]", id.name())
    }
}

/// Counts for the closed-form parameter complexity `H_a·(H_b + 1)` with
/// `H_a = 2·N_e·H_e + N_r·H_r + N_t·H_t + N_k·H_k + N_v·H_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComplexityCounts {
    pub n_e: u64,
    pub h_e: u64,
    pub n_r: u64,
    pub h_r: u64,
    pub n_t: u64,
    pub h_t: u64,
    pub n_k: u64,
    pub h_k: u64,
    pub n_v: u64,
    pub h_v: u64,
}

impl ComplexityCounts {
    pub fn from_model(cfg: &ModelConfig, sizes: &VocabSizes) -> Self {
        ComplexityCounts {
            n_e: sizes.entities as u64,
            h_e: cfg.entity_dim as u64,
            n_r: sizes.relations as u64,
            h_r: cfg.relation_dim as u64,
            n_t: sizes.types as u64,
            h_t: cfg.type_dim as u64,
            n_k: sizes.attr_keys as u64,
            h_k: cfg.attr_dim as u64,
            n_v: sizes.tokens as u64,
            h_v: cfg.attr_dim as u64,
        }
    }
}

/// The formula as stated, including its factor of 2 on the entity term.
/// Compare with [`ParamSet::allocated_scalars`] for the real footprint.
pub fn param_complexity(c: &ComplexityCounts, hidden: u64) -> u64 {
    let h_a = 2 * c.n_e * c.h_e + c.n_r * c.h_r + c.n_t * c.h_t + c.n_k * c.h_k + c.n_v * c.h_v;
    h_a * (hidden + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    fn toy() -> (ModelConfig, VocabSizes) {
        let cfg = ModelConfig {
            entity_dim: 8,
            relation_dim: 4,
            type_dim: 3,
            attr_dim: 2,
            variant: Variant::EmbedAllAttention,
            ..Default::default()
        };
        let sizes = VocabSizes {
            entities: 10,
            relations: 3,
            types: 2,
            attr_keys: 4,
            tokens: 6,
        };
        (cfg, sizes)
    }

    #[test]
    fn complexity_formula() {
        assert_eq!(param_complexity(&ComplexityCounts::default(), 5), 0);
        let c = ComplexityCounts {
            n_e: 10,
            h_e: 4,
            ..Default::default()
        };
        assert_eq!(param_complexity(&c, 1), 160);
    }

    #[test]
    fn allocated_count_is_sum_of_shapes() {
        let (cfg, sizes) = toy();
        let p = ParamSet::<f32>::init(&cfg, &sizes, 1);
        // tables: 10·8 + 3·4 + 2·3 + 4·2 + 6·2, weights: 64 + 64 + 16 + 32 + 24, theta: 10 + 4 + 2
        let expected = 80 + 12 + 6 + 8 + 12 + 64 + 64 + 16 + 32 + 24 + 10 + 4 + 2;
        assert_eq!(p.allocated_scalars(), expected);
        let no_att = ModelConfig {
            variant: Variant::EmbedAll,
            ..cfg
        };
        assert_eq!(ParamSet::<f32>::init(&no_att, &sizes, 1).allocated_scalars(), expected - 16);
    }

    #[test]
    fn init_respects_bounds_and_seed() {
        let (cfg, sizes) = toy();
        let a = ParamSet::<f32>::init(&cfg, &sizes, 3);
        let b = ParamSet::<f32>::init(&cfg, &sizes, 3);
        let c = ParamSet::<f32>::init(&cfg, &sizes, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 0.5 / (8f32).sqrt() + 1e-7;
        assert!(a.get(ParamId::Entity).as_slice().iter().all(|v| v.abs() <= bound));
        assert!(a.get(ParamId::ThetaNeighbor).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_view_round_trips() {
        let (cfg, sizes) = toy();
        let mut p = ParamSet::<f64>::init(&cfg, &sizes, 3);
        let i = p.flat_index(ParamId::W2, 1, 3);
        assert_eq!(p.describe(i), "W2[1,3]");
        FlatParams::set(&mut p, i, 42.0);
        assert_eq!(p.get(ParamId::W2)[(1, 3)], 42.0);
        assert_eq!(FlatParams::get(&p, i), 42.0);
    }
}
