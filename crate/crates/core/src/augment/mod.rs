//! The action space: identity plus eight sequence- and representation-space
//! operators, and the dispatcher that turns an action into an augmented view.

pub mod ops;
mod similarity;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::Backbone;
use crate::data::ItemIdx;
use crate::error::{Error, Result};
use crate::nn::Tensor2D;
use crate::rng::StreamKey;

pub use ops::{
    apply_crop, apply_insert, apply_mask, apply_reorder, apply_substitute, apply_tmask_b,
    apply_tmask_r, apply_tnoise, removal_count, selected_count,
};
pub use similarity::{build_similarity_index, ItemSimilarityIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugAction {
    Identity,
    Crop,
    Reorder,
    Mask,
    Substitute,
    Insert,
    TMaskR,
    TNoise,
    TMaskB,
}

impl AugAction {
    pub const ALL: [AugAction; 9] = [
        AugAction::Identity,
        AugAction::Crop,
        AugAction::Reorder,
        AugAction::Mask,
        AugAction::Substitute,
        AugAction::Insert,
        AugAction::TMaskR,
        AugAction::TNoise,
        AugAction::TMaskB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugAction::Identity => "identity",
            AugAction::Crop => "crop",
            AugAction::Reorder => "reorder",
            AugAction::Mask => "mask",
            AugAction::Substitute => "substitute",
            AugAction::Insert => "insert",
            AugAction::TMaskR => "tmask_r",
            AugAction::TNoise => "tnoise",
            AugAction::TMaskB => "tmask_b",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            AugAction::Identity => "Base",
            AugAction::Crop => "+Crop",
            AugAction::Reorder => "+Reorder",
            AugAction::Mask => "+Mask",
            AugAction::Substitute => "+Substitute",
            AugAction::Insert => "+Insert",
            AugAction::TMaskR => "+TMask-R",
            AugAction::TNoise => "+TNoise",
            AugAction::TMaskB => "+TMask-B",
        }
    }

    pub fn is_representation_space(self) -> bool {
        matches!(self, AugAction::TNoise | AugAction::TMaskB)
    }
}

impl std::fmt::Display for AugAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AugAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '+'], "_");
        let key = key.trim_start_matches('_');
        AugAction::ALL
            .into_iter()
            .find(|a| a.name() == key || (key == "base" && *a == AugAction::Identity))
            .ok_or_else(|| Error::Config(format!("unknown action `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorParams {
    pub crop_ratio: f64,
    pub reorder_ratio: f64,
    pub mask_ratio: f64,
    pub substitute_ratio: f64,
    pub insert_ratio: f64,
    /// Shared by TMask-R and TMask-B.
    pub tmask_ratio: f64,
    pub noise_low: f64,
    pub noise_high: f64,
    pub similarity_top_k: usize,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            crop_ratio: 0.6,
            reorder_ratio: 0.2,
            mask_ratio: 0.3,
            substitute_ratio: 0.3,
            insert_ratio: 0.3,
            tmask_ratio: 0.3,
            noise_low: -0.1,
            noise_high: 0.1,
            similarity_top_k: 10,
        }
    }
}

impl OperatorParams {
    pub fn validate(&self) -> Result<()> {
        let ratios = [
            ("crop_ratio", self.crop_ratio),
            ("reorder_ratio", self.reorder_ratio),
            ("mask_ratio", self.mask_ratio),
            ("substitute_ratio", self.substitute_ratio),
            ("insert_ratio", self.insert_ratio),
            ("tmask_ratio", self.tmask_ratio),
        ];
        for (name, r) in ratios {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!("{name} = {r} must lie in (0, 1]")));
            }
        }
        let degenerate = self.noise_low == 0.0 && self.noise_high == 0.0;
        if !(self.noise_low < self.noise_high || degenerate) {
            return Err(Error::Config(format!(
                "noise interval ({}, {}) needs low < high",
                self.noise_low, self.noise_high
            )));
        }
        if self.similarity_top_k == 0 {
            return Err(Error::Config("similarity_top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViewContent {
    Sequence(Vec<ItemIdx>),
    Representation(Tensor2D),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedView {
    pub action: AugAction,
    pub content: ViewContent,
    /// Stream the view was drawn from, when it came from a keyed stream.
    pub stream: Option<StreamKey>,
    /// Set when the operator could not act (e.g. removal on a single item).
    pub degenerate: bool,
}

/// Applies actions against a frozen backbone.
#[derive(Clone, Copy)]
pub struct Augmenter<'a> {
    pub backbone: &'a Backbone,
    pub params: &'a OperatorParams,
    pub index: Option<&'a ItemSimilarityIndex>,
}

impl<'a> Augmenter<'a> {
    pub fn new(
        backbone: &'a Backbone,
        params: &'a OperatorParams,
        index: Option<&'a ItemSimilarityIndex>,
    ) -> Self {
        Self {
            backbone,
            params,
            index,
        }
    }

    fn index(&self, action: AugAction) -> Result<&'a ItemSimilarityIndex> {
        self.index
            .ok_or_else(|| Error::Config(format!("{action} needs an item similarity index")))
    }

    /// Produces one view of `seq`. The sequence is first truncated to the
    /// backbone's window so that ratios apply to what the model sees.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        seq: &[ItemIdx],
        action: AugAction,
        rng: &mut R,
    ) -> Result<AugmentedView> {
        let s = self.backbone.truncate(seq);
        if s.is_empty() {
            return Err(Error::dim("cannot augment an empty sequence"));
        }
        let p = self.params;
        let mut degenerate = false;
        let content = match action {
            AugAction::Identity => ViewContent::Sequence(s.to_vec()),
            AugAction::Crop => ViewContent::Sequence(apply_crop(s, p.crop_ratio, rng)),
            AugAction::Reorder => ViewContent::Sequence(apply_reorder(s, p.reorder_ratio, rng)),
            AugAction::Mask => ViewContent::Sequence(apply_mask(
                s,
                p.mask_ratio,
                self.backbone.mask_token(),
                rng,
            )),
            AugAction::Substitute => ViewContent::Sequence(apply_substitute(
                s,
                p.substitute_ratio,
                self.index(action)?,
                rng,
            )),
            AugAction::Insert => ViewContent::Sequence(apply_insert(
                s,
                p.insert_ratio,
                self.index(action)?,
                self.backbone.max_len(),
                rng,
            )),
            AugAction::TMaskR => {
                let (out, flag) = apply_tmask_r(s, p.tmask_ratio, rng);
                degenerate = flag;
                ViewContent::Sequence(out)
            }
            AugAction::TNoise => {
                let e = self.backbone.embed(s)?;
                ViewContent::Representation(apply_tnoise(&e, p.noise_low, p.noise_high, rng))
            }
            AugAction::TMaskB => {
                let e = self.backbone.embed(s)?;
                let (out, flag) = apply_tmask_b(&e, p.tmask_ratio, rng);
                degenerate = flag;
                ViewContent::Representation(out)
            }
        };
        Ok(AugmentedView {
            action,
            content,
            stream: None,
            degenerate,
        })
    }

    pub fn apply_keyed(&self, seq: &[ItemIdx], action: AugAction, key: StreamKey) -> Result<AugmentedView> {
        let mut view = self.apply(seq, action, &mut key.rng())?;
        view.stream = Some(key);
        Ok(view)
    }

    /// Backbone scores for a view.
    pub fn score_view(&self, view: &AugmentedView) -> Result<Vec<f64>> {
        match &view.content {
            ViewContent::Sequence(s) => self.backbone.scores_for(s),
            ViewContent::Representation(e) => self.backbone.scores_from_representation(e),
        }
    }
}

/// Free-function form of [`Augmenter::apply`].
pub fn apply<R: Rng + ?Sized>(
    seq: &[ItemIdx],
    backbone: &Backbone,
    action: AugAction,
    params: &OperatorParams,
    index: Option<&ItemSimilarityIndex>,
    rng: &mut R,
) -> Result<AugmentedView> {
    Augmenter::new(backbone, params, index).apply(seq, action, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_names_round_trip() {
        for a in AugAction::ALL {
            assert_eq!(a.name().parse::<AugAction>().unwrap(), a);
        }
        assert_eq!("+TMask-R".parse::<AugAction>().unwrap(), AugAction::TMaskR);
        assert_eq!("Base".parse::<AugAction>().unwrap(), AugAction::Identity);
        assert!("shuffle".parse::<AugAction>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(OperatorParams::default().validate().is_ok());
        let zero_noise = OperatorParams {
            noise_low: 0.0,
            noise_high: 0.0,
            ..Default::default()
        };
        assert!(zero_noise.validate().is_ok());
        let bad = OperatorParams {
            mask_ratio: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OperatorParams {
            noise_low: 0.2,
            noise_high: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
