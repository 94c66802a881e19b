//! Encoder and scorer: atomic embeddings, context aggregation, the
//! representation layer, the bilinear-diagonal triple score and its exact
//! backward pass.

mod encoder;
mod grads;
mod params;

pub use encoder::{aggregate_context, score_from_z, AggTape, Encoder, EntityTape, RelationTape, ScoreTape};
pub use grads::{GradRows, SparseGrads};
pub use params::{param_complexity, ComplexityCounts, ParamId, ParamSet, VocabSizes};

use crate::error::{Error, Result};
use crate::numerics::Activation;

/// The seven ablations, from embeddings only to everything with attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    EmbedOnly,
    AttrOnly,
    NhbrOnly,
    EmbedAttr,
    EmbedNhbr,
    EmbedAll,
    EmbedAllAttention,
}

/// Which terms enter the representation layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariantFlags {
    pub use_entity_embed: bool,
    pub use_attrs: bool,
    pub use_nhbrs: bool,
    pub use_types: bool,
    pub use_attention: bool,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::EmbedOnly,
        Variant::AttrOnly,
        Variant::NhbrOnly,
        Variant::EmbedAttr,
        Variant::EmbedNhbr,
        Variant::EmbedAll,
        Variant::EmbedAllAttention,
    ];

    pub fn flags(self) -> VariantFlags {
        let (e, a, n, t, att) = match self {
            Variant::EmbedOnly => (true, false, false, false, false),
            Variant::AttrOnly => (false, true, false, false, false),
            Variant::NhbrOnly => (false, false, true, false, false),
            Variant::EmbedAttr => (true, true, false, false, false),
            Variant::EmbedNhbr => (true, false, true, false, false),
            Variant::EmbedAll => (true, true, true, true, false),
            Variant::EmbedAllAttention => (true, true, true, true, true),
        };
        VariantFlags {
            use_entity_embed: e,
            use_attrs: a,
            use_nhbrs: n,
            use_types: t,
            use_attention: att,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::EmbedOnly => "embed_only",
            Variant::AttrOnly => "attr_only",
            Variant::NhbrOnly => "nhbr_only",
            Variant::EmbedAttr => "embed_attr",
            Variant::EmbedNhbr => "embed_nhbr",
            Variant::EmbedAll => "embed_all",
            Variant::EmbedAllAttention => "embed_all_attention",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Non-attention aggregator for the attribute context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Max,
    Mean,
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregator::Max),
            "mean" => Ok(Aggregator::Mean),
            _ => Err(Error::Config(format!("unknown aggregator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub entity_dim: usize,
    pub relation_dim: usize,
    pub type_dim: usize,
    pub attr_dim: usize,
    pub variant: Variant,
    pub atomic_activation: Activation,
    pub repr_activation: Activation,
    pub attr_aggregator: Aggregator,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            entity_dim: 256,
            relation_dim: 64,
            type_dim: 16,
            attr_dim: 16,
            variant: Variant::EmbedAllAttention,
            atomic_activation: Activation::Relu,
            repr_activation: Activation::Tanh,
            attr_aggregator: Aggregator::Max,
        }
    }
}

impl ModelConfig {
    pub fn flags(&self) -> VariantFlags {
        self.variant.flags()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("entity_dim", self.entity_dim),
            ("relation_dim", self.relation_dim),
            ("type_dim", self.type_dim),
            ("attr_dim", self.attr_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::from_name(v.name()).unwrap(), v);
        }
        assert!(Variant::from_name("embed_everything").is_err());
    }

    #[test]
    fn embed_only_disables_all_contexts() {
        let f = Variant::EmbedOnly.flags();
        assert!(f.use_entity_embed && !f.use_attrs && !f.use_nhbrs && !f.use_types && !f.use_attention);
        let f = Variant::AttrOnly.flags();
        assert!(!f.use_entity_embed && f.use_attrs && !f.use_nhbrs);
        assert!(Variant::EmbedAllAttention.flags().use_attention);
    }
}

#[cfg(test)]
mod encoder_tests;
