//! Training hyperparameters and their `key = value` text form.
//!
//! Lines are `key = value`; `#` starts a comment. A `preset` key, wherever it
//! appears, is applied first and the remaining keys override it in file order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::RuleKind;
use crate::model::{ActivationPlan, Architecture};
use crate::rules::SlackConfig;

use super::optim::AdamHyper;
use super::sampling::DEFAULT_MAX_RETRIES;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub architecture: Architecture,
    pub learning_rate: f64,
    /// Negatives drawn per positive.
    pub negatives: usize,
    /// Temperature of the self-adversarial softmax.
    pub temperature: f64,
    /// Weight of the rule regularizer.
    pub lambda: f64,
    pub slack: SlackConfig,
    /// Mini-batches per epoch.
    pub batches: usize,
    pub max_epochs: usize,
    /// Validate every this many epochs.
    pub validation_period: usize,
    /// Validations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub grounding_free: bool,
    /// Groundings sampled per rule per epoch.
    pub grounding_cap: usize,
    pub negative_retries: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            architecture: Architecture::desk(),
            learning_rate: 0.001,
            negatives: 5,
            temperature: 1.0,
            lambda: 0.05,
            slack: SlackConfig::default(),
            batches: 10,
            max_epochs: 200,
            validation_period: 25,
            patience: 10,
            seed: 0,
            grounding_free: true,
            grounding_cap: 512,
            negative_retries: DEFAULT_MAX_RETRIES,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

pub const PRESETS: [&str; 4] = ["desk", "paper-fb15k-relu", "paper-fb15k-sigmoid", "paper-wn18-relu"];

impl TrainingConfig {
    /// Named hyperparameter sets. The `paper-*` presets use the 1000/2000/200
    /// architecture with the optima selected on FB15k and WN18.
    pub fn preset(name: &str) -> Result<Self> {
        let paper = |activation, negatives, lambda, slacks: &[(RuleKind, f64)]| -> Result<Self> {
            let mut slack = SlackConfig::default();
            for &(kind, v) in slacks {
                slack.set(kind, v)?;
            }
            Ok(TrainingConfig {
                architecture: Architecture::full_scale(activation),
                learning_rate: 0.001,
                negatives,
                lambda,
                slack,
                batches: 100,
                max_epochs: 2000,
                ..TrainingConfig::default()
            })
        };
        use RuleKind::*;
        match name {
            "desk" => Ok(TrainingConfig::default()),
            "paper-fb15k-relu" => paper(
                ActivationPlan::ReluAll,
                8,
                0.05,
                &[(Equivalence, 1.0), (Symmetric, 0.5), (Implication, 5.0), (Composition, 0.1), (Inverse, 3.0)],
            ),
            "paper-fb15k-sigmoid" => paper(
                ActivationPlan::SigmoidFinalRelu,
                8,
                0.05,
                &[(Equivalence, 0.5), (Symmetric, 0.1), (Implication, 3.0), (Composition, 0.1), (Inverse, 3.0)],
            ),
            "paper-wn18-relu" => paper(ActivationPlan::ReluAll, 5, 0.01, &[(Inverse, 0.1)]),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.negatives < 1 {
            return fail("negatives must be ≥ 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be ≥ 0, got {}", self.lambda));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return fail(format!("temperature must be ≥ 0, got {}", self.temperature));
        }
        if self.batches < 1 {
            return fail("batches must be ≥ 1".into());
        }
        if self.validation_period < 1 {
            return fail("validation_period must be ≥ 1".into());
        }
        if self.architecture.embedding_dim == 0 || self.architecture.hidden.is_empty() || self.architecture.hidden.contains(&0) {
            return fail("embedding_dim and every hidden width must be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_epsilon > 0.0) {
            return fail("adam betas must lie in [0, 1) and epsilon must be > 0".into());
        }
        Ok(())
    }

    /// Sets one key. Unknown keys are configuration errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "preset" => *self = Self::preset(value)?,
            "embedding_dim" => self.architecture.embedding_dim = num(key, value)?,
            "hidden" => {
                self.architecture.hidden = value
                    .split(',')
                    .map(|w| num(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "activation" => self.architecture.activation = value.parse().map_err(Error::Config)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "negatives" => self.negatives = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "batches" => self.batches = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "validation_period" => self.validation_period = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "grounding_free" => self.grounding_free = num(key, value)?,
            "grounding_cap" => self.grounding_cap = num(key, value)?,
            "negative_retries" => self.negative_retries = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "adam_epsilon" => self.adam_epsilon = num(key, value)?,
            _ => match RuleKind::ALL.iter().find(|&&k| SlackConfig::key(k) == key) {
                Some(&kind) => self.slack.set(kind, num(key, value)?)?,
                None => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
            },
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            pairs.push((key.trim().to_owned(), value.trim().to_owned()));
        }
        let mut config = TrainingConfig::default();
        if let Some((_, preset)) = pairs.iter().rev().find(|(k, _)| k == "preset") {
            config = Self::preset(preset)?;
        }
        for (key, value) in pairs.iter().filter(|(k, _)| k != "preset") {
            config.apply(key, value)?;
        }
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Every key, in a form [`TrainingConfig::from_text`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let a = &self.architecture;
        let hidden: Vec<String> = a.hidden.iter().map(usize::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "embedding_dim = {}", a.embedding_dim);
        let _ = writeln!(s, "hidden = {}", hidden.join(","));
        let _ = writeln!(s, "activation = {}", a.activation);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "negatives = {}", self.negatives);
        let _ = writeln!(s, "temperature = {}", self.temperature);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        for kind in RuleKind::ALL {
            let _ = writeln!(s, "{} = {}", SlackConfig::key(kind), self.slack.get(kind));
        }
        let _ = writeln!(s, "batches = {}", self.batches);
        let _ = writeln!(s, "max_epochs = {}", self.max_epochs);
        let _ = writeln!(s, "validation_period = {}", self.validation_period);
        let _ = writeln!(s, "patience = {}", self.patience);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "grounding_free = {}", self.grounding_free);
        let _ = writeln!(s, "grounding_cap = {}", self.grounding_cap);
        let _ = writeln!(s, "negative_retries = {}", self.negative_retries);
        let _ = writeln!(s, "adam_beta1 = {}", self.adam_beta1);
        let _ = writeln!(s, "adam_beta2 = {}", self.adam_beta2);
        let _ = writeln!(s, "adam_epsilon = {}", self.adam_epsilon);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_fb15k_preset_values() {
        let c = TrainingConfig::preset("paper-fb15k-relu").unwrap();
        assert_eq!(c.architecture.embedding_dim, 200);
        assert_eq!(c.architecture.hidden, vec![1000, 2000, 200]);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.negatives, 8);
        assert_eq!(c.lambda, 0.05);
        assert_eq!(c.slack.get(RuleKind::Equivalence), 1.0);
        assert_eq!(c.slack.get(RuleKind::Symmetric), 0.5);
        assert_eq!(c.slack.get(RuleKind::Implication), 5.0);
        assert_eq!(c.slack.get(RuleKind::Composition), 0.1);
        assert_eq!(c.slack.get(RuleKind::Inverse), 3.0);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainingConfig::preset("paper-fb15k-sigmoid").unwrap();
        c.seed = 42;
        c.grounding_free = false;
        assert_eq!(TrainingConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let c = TrainingConfig::from_text("lambda = 0.5 # override\npreset = paper-wn18-relu\n").unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.negatives, 5);
        assert_eq!(c.slack.get(RuleKind::Inverse), 0.1);
    }

    #[test]
    fn unknown_key_and_bad_value_rejected() {
        assert!(TrainingConfig::from_text("bogus = 1").is_err());
        assert!(TrainingConfig::from_text("lambda = lots").is_err());
        assert!(TrainingConfig::from_text("slack_sy = -1").is_err());
        assert!(TrainingConfig::from_text("no equals sign").is_err());
    }

    #[test]
    fn invariants_checked() {
        let mut c = TrainingConfig::default();
        c.validate().unwrap();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let c = TrainingConfig { negatives: 0, ..TrainingConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainingConfig { batches: 0, ..TrainingConfig::default() };
        assert!(c.validate().is_err());
    }
}
