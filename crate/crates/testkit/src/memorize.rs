use logicenn::kg::Triple;
use logicenn::model::{ActivationPlan, Architecture, LabeledSample, ModelParameters};
use logicenn::trainer::{adam_step, AdamHyper, AdamState};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Truth value of every `(h, r, t)` over a tiny vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthTable {
    pub num_entities: usize,
    pub num_relations: usize,
    cells: Vec<bool>,
}

impl GroundTruthTable {
    pub fn all_false(num_entities: usize, num_relations: usize) -> Self {
        assert!(num_entities <= 20 && num_relations <= 5, "tables are for tiny graphs");
        GroundTruthTable {
            num_entities,
            num_relations,
            cells: vec![false; num_entities * num_entities * num_relations],
        }
    }

    /// Exactly `true_facts` cells set, chosen uniformly.
    pub fn random<R: Rng>(rng: &mut R, num_entities: usize, num_relations: usize, true_facts: usize) -> Self {
        let mut table = Self::all_false(num_entities, num_relations);
        for i in sample(rng, table.cells.len(), true_facts) {
            table.cells[i] = true;
        }
        table
    }

    fn index(&self, h: usize, r: usize, t: usize) -> usize {
        (r * self.num_entities + h) * self.num_entities + t
    }

    pub fn get(&self, h: usize, r: usize, t: usize) -> bool {
        self.cells[self.index(h, r, t)]
    }

    pub fn set(&mut self, h: usize, r: usize, t: usize, value: bool) {
        let i = self.index(h, r, t);
        self.cells[i] = value;
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn true_facts(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// `(triple, truth)` for every cell.
    pub fn cells(&self) -> Vec<(Triple, bool)> {
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.num_relations {
            for h in 0..self.num_entities {
                for t in 0..self.num_entities {
                    out.push((Triple::new(h, r, t), self.get(h, r, t)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MemorizationConfig {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: ActivationPlan,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Accuracy is checked this often; training stops once it reaches 1.
    pub check_every: usize,
}

impl Default for MemorizationConfig {
    fn default() -> Self {
        MemorizationConfig {
            embedding_dim: 16,
            hidden: vec![64, 64],
            activation: ActivationPlan::ReluAll,
            max_epochs: 3000,
            learning_rate: 0.01,
            seed: 0,
            check_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemorizationReport {
    /// Fraction of cells with `f > 0` exactly when the cell is true.
    pub accuracy: f64,
    /// `min f(true cells) − max f(false cells)`; infinite if a class is empty.
    pub margin: f64,
    pub epochs: usize,
    pub final_loss: f64,
}

fn measure(params: &ModelParameters, cells: &[(Triple, bool)]) -> (f64, f64) {
    let scores = params.score_batch(&cells.iter().map(|c| c.0).collect::<Vec<_>>());
    let mut correct = 0usize;
    let (mut min_pos, mut max_neg) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((_, truth), s) in cells.iter().zip(scores) {
        if (s > 0.0) == *truth {
            correct += 1;
        }
        if *truth {
            min_pos = min_pos.min(s);
        } else {
            max_neg = max_neg.max(s);
        }
    }
    (correct as f64 / cells.len() as f64, min_pos - max_neg)
}

/// Fits the model to every cell of `table` (full batch, true cells labelled
/// +1 and false cells −1, no rules, no sampling) and reports how well the
/// scores separate the two classes.
pub fn memorization_test(table: &GroundTruthTable, config: &MemorizationConfig) -> MemorizationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let arch = Architecture {
        embedding_dim: config.embedding_dim,
        hidden: config.hidden.clone(),
        activation: config.activation,
    };
    let mut params = ModelParameters::init(&arch, table.num_entities, table.num_relations, &mut rng).unwrap();
    let cells = table.cells();
    let batch: Vec<LabeledSample> = cells
        .iter()
        .map(|&(t, truth)| if truth { LabeledSample::positive(t) } else { LabeledSample::negative(t, 1.0) })
        .collect();
    let hyper = AdamHyper::with_learning_rate(config.learning_rate);
    let mut state = AdamState::new(&params);
    let scale = 1.0 / batch.len() as f64;
    let mut final_loss = f64::NAN;
    let mut epochs = 0;
    while epochs < config.max_epochs {
        let mut grads = params.zero_gradients();
        final_loss = params.data_loss_into(&batch, scale, &mut grads).unwrap() * scale;
        adam_step(&mut params, &grads, &mut state, &hyper).unwrap();
        params.project_entities();
        epochs += 1;
        if epochs % config.check_every == 0 && measure(&params, &cells).0 == 1.0 {
            break;
        }
    }
    let (accuracy, margin) = measure(&params, &cells);
    MemorizationReport {
        accuracy,
        margin,
        epochs,
        final_loss,
    }
}
